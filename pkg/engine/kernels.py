"""Compiled inner loops: counter RNG, sampling, cell marching and the path integrator.

All kernels release the GIL so tiles can render on plain threads. Errors are
status codes here; the Python wrappers in engine.tracer translate them.
"""
import math

import numpy as np
from numba import njit

# march status codes
COLLIDED = 0
ESCAPED = 1
ABORTED = 2

# medium kinds
TET = 0
REGULAR = 1

LOCATE_EPS = 1e-12
FACE_EPS = 1e-12
NUDGE = 1e-7
ENTRY_OFFSET = 1e-10
MAX_STEPS = 1 << 22

ROULETTE_BOUNCE = 4
ROULETTE_THRESHOLD = 1e-3

# Uniform-dimension layout of one path: 0, 1 pixel jitter, then per bounce
# free path, roulette and two phase-function dimensions.
DIM_JITTER_X = 0
DIM_JITTER_Y = 1
DIM_BOUNCE = 2
DIMS_PER_BOUNCE = 4

# render parameter block
P_MAX_BOUNCES = 0
P_HG_G = 1
P_DEFAULT_ALBEDO = 2
P_ENV = 3
P_EMISSION_SCALE = 6
PARAM_COUNT = 7

# Emission ramp over normalized temperature, black -> red -> orange -> white.
EMISSION_TABLE = np.array([
    (0.00, 0.00, 0.00),
    (0.25, 0.00, 0.00),
    (0.50, 0.02, 0.00),
    (0.75, 0.10, 0.00),
    (1.00, 0.25, 0.00),
    (1.00, 0.45, 0.05),
    (1.00, 0.65, 0.20),
    (1.00, 0.85, 0.50),
    (1.00, 1.00, 1.00),
], dtype=np.float64)

_MASK32 = 0xFFFFFFFF
_GOLDEN = 0x9E3779B9


# --- counter-based RNG -----------------------------------------------------

@njit(cache=True, nogil=True)
def _hash32(x):
    x &= _MASK32
    x ^= x >> 16
    x = (x * 0x21F0AAAD) & _MASK32
    x ^= x >> 15
    x = (x * 0x735A2D97) & _MASK32
    x ^= x >> 15
    return x


@njit(cache=True, nogil=True)
def _mix(h, v):
    return _hash32(((h ^ (v & _MASK32)) + _GOLDEN) & _MASK32)


@njit(cache=True, nogil=True)
def random_uniform(seed_lo, seed_hi, pixel, sample, dim):
    """Uniform double in [0, 1) keyed by (seed, pixel, sample, dimension)."""
    h = _mix(0x85EBCA6B, seed_lo)
    h = _mix(h, seed_hi)
    h = _mix(h, pixel)
    h = _mix(h, pixel >> 32)
    h = _mix(h, sample)
    h = _mix(h, dim)
    a = h >> 5
    b = _mix(h, 0x27D4EB2F) >> 6
    return (a * 67108864 + b) / 9007199254740992.0


@njit(cache=True, nogil=True)
def random_batch(seed_lo, seed_hi, pixel, first_sample, count, dim):
    out = np.empty(count)
    for i in range(count):
        out[i] = random_uniform(seed_lo, seed_hi, pixel, first_sample + i, dim)
    return out


# --- sampling --------------------------------------------------------------

@njit(cache=True, nogil=True)
def hg_cos_theta(g, xi):
    """Invert the Henyey-Greenstein CDF; cos(theta) grows with xi for every g."""
    a = 2.0 * xi - 1.0
    if abs(g) < 1e-5:
        # rozvoj do druhého řádu v g, chyba O(g^3)
        cos_theta = a + g * (1.0 - a * a) * (1.5 - 2.0 * a * g)
    else:
        s = (1.0 - g * g) / (1.0 + g * a)
        cos_theta = (1.0 + g * g - s * s) / (2.0 * g)
    return min(1.0, max(-1.0, cos_theta))



@njit(cache=True, nogil=True)
def sample_hg(dx, dy, dz, g, xi1, xi2):
    cos_theta = hg_cos_theta(g, xi1)
    sin_theta = math.sqrt(max(0.0, 1.0 - cos_theta * cos_theta))
    phi = 2.0 * math.pi * xi2
    # orthonormal frame around the incoming direction
    sign = 1.0 if dz >= 0.0 else -1.0
    a = -1.0 / (sign + dz)
    b = dx * dy * a
    tx, ty, tz = 1.0 + sign * dx * dx * a, sign * b, -sign * dx
    bx, by, bz = b, sign + dy * dy * a, -dy
    c, s = sin_theta * math.cos(phi), sin_theta * math.sin(phi)
    ox = c * tx + s * bx + cos_theta * dx
    oy = c * ty + s * by + cos_theta * dy
    oz = c * tz + s * bz + cos_theta * dz
    norm = math.sqrt(ox * ox + oy * oy + oz * oz)
    return ox / norm, oy / norm, oz / norm


@njit(cache=True, nogil=True)
def emission_rgb(temperature, table):
    if not temperature > 0.0:
        return 0.0, 0.0, 0.0
    x = min(temperature, 1.0) * (table.shape[0] - 1)
    i = min(int(x), table.shape[0] - 2)
    f = x - i
    return ((1.0 - f) * table[i, 0] + f * table[i + 1, 0],
            (1.0 - f) * table[i, 1] + f * table[i + 1, 1],
            (1.0 - f) * table[i, 2] + f * table[i + 1, 2])


@njit(cache=True, nogil=True)
def slab_unit_cube(o, d, t_min, t_max):
    """Slab test against [0, 1]^3; returns (hit, t0, t1)."""
    t0, t1 = t_min, t_max
    for a in range(3):
        if d[a] == 0.0:
            if o[a] < 0.0 or o[a] > 1.0:
                return False, 0.0, 0.0
        else:
            inv = 1.0 / d[a]
            near = (0.0 - o[a]) * inv
            far = (1.0 - o[a]) * inv
            if near > far:
                near, far = far, near
            t0 = max(t0, near)
            t1 = min(t1, far)
    if t1 <= t0:
        return False, 0.0, 0.0
    return True, t0, t1


# --- tetrahedral grid ------------------------------------------------------

@njit(cache=True, nogil=True)
def locate_tet(tm, p):
    """Leaf index containing p: roots in id order, then one split-plane test per level."""
    node = -1
    for r in range(tm.roots.shape[0]):
        inside = True
        for f in range(4):
            pl = tm.root_planes[r, f]
            if pl[0] * p[0] + pl[1] * p[1] + pl[2] * p[2] - pl[3] > LOCATE_EPS:
                inside = False
                break
        if inside:
            node = tm.roots[r]
            break
    if node < 0:
        return -1
    while tm.node_leaf[node] < 0:
        sp = tm.split_planes[node]
        if sp[0] * p[0] + sp[1] * p[1] + sp[2] * p[2] - sp[3] <= LOCATE_EPS:
            node = tm.children[node, 0]
        else:
            node = tm.children[node, 1]
    return tm.node_leaf[node]


@njit(cache=True, nogil=True)
def exit_face(tm, leaf, o, d, t):
    """Face the ray o + s*d leaves `leaf` through, for s >= t. Returns (-1, inf) if none qualifies."""
    best_face = -1
    best_t = np.inf
    for f in range(4):
        n = tm.face_normals[tm.normal_ids[leaf, f]]
        dn = n[0] * d[0] + n[1] * d[1] + n[2] * d[2]
        if dn <= FACE_EPS:
            continue
        tf = (tm.offsets[leaf, f] - (n[0] * o[0] + n[1] * o[1] + n[2] * o[2])) / dn
        if tf < t:
            tf = t
        if tf < best_t:
            best_t = tf
            best_face = f
    return best_face, best_t


@njit(cache=True, nogil=True)
def march_tet(tm, o, d, t_start, t_end, leaf, target, seg_ids, seg_t0, seg_t1):
    """Regular tracking from t_start inside `leaf` until optical depth `target` or t_end.

    Returns (status, t, leaf, optical depth, cells visited, segment count).
    Segments are written while the buffers have room.
    """
    tau = 0.0
    t = t_start
    cells = 0
    nseg = 0
    nudged = False
    p = np.empty(3)
    for _ in range(MAX_STEPS):
        face, t_exit = exit_face(tm, leaf, o, d, t)
        if face < 0:
            # tečný paprsek: jeden posun o NUDGE a nová lokalizace, podruhé se vzdáme
            if nudged:
                return ABORTED, t, leaf, tau, cells, nseg
            nudged = True
            t += NUDGE
            if t >= t_end:
                return ESCAPED, t_end, leaf, tau, cells, nseg
            for a in range(3):
                p[a] = o[a] + t * d[a]
            leaf = locate_tet(tm, p)
            if leaf < 0:
                return ESCAPED, t, leaf, tau, cells, nseg
            continue
        nudged = False
        if t_exit > t_end:
            t_exit = t_end
        cells += 1
        sigma = tm.density[leaf]
        # Srážka uvnitř buňky, hustota je v ní konstantní
        dtau = sigma * (t_exit - t)
        if sigma > 0.0 and tau + dtau >= target:
            t_hit = t + (target - tau) / sigma
            return COLLIDED, min(t_hit, t_exit), leaf, target, cells, nseg
        tau += dtau
        if nseg < seg_ids.shape[0]:
            seg_ids[nseg] = leaf
            seg_t0[nseg] = t
            seg_t1[nseg] = t_exit
        nseg += 1
        if t_exit >= t_end:
            return ESCAPED, t_end, leaf, tau, cells, nseg
        # Přes sdílenou stěnu do souseda, -1 je hranice krychle
        nb = tm.neighbors[leaf, face]
        if nb < 0:
            return ESCAPED, t_exit, leaf, tau, cells, nseg
        leaf = nb
        t = t_exit
    return ABORTED, t, leaf, tau, cells, nseg


# --- regular grid ------------------------------------------------------------

@njit(cache=True, nogil=True)
def locate_cell(rm, p):
    idx = np.empty(3, dtype=np.int64)
    for a in range(3):
        n = rm.dims[a]
        i = int(math.floor(p[a] * n))
        idx[a] = min(max(i, 0), n - 1)
    return idx


@njit(cache=True, nogil=True)
def march_dda(rm, o, d, t_start, t_end, idx, target, seg_ids, seg_t0, seg_t1):
    """Amanatides-Woo traversal with regular tracking; same contract as march_tet."""
    nx, ny = rm.dims[0], rm.dims[1]
    step = np.zeros(3, dtype=np.int64)
    for a in range(3):
        if d[a] > 0.0:
            step[a] = 1
        elif d[a] < 0.0:
            step[a] = -1
    tau = 0.0
    t = t_start
    cells = 0
    nseg = 0
    for _ in range(MAX_STEPS):
        axis = -1
        t_exit = np.inf
        for a in range(3):
            if step[a] == 0:
                continue
            # nejbližší hranice buňky ve směru paprsku
            boundary = (idx[a] + (1 if step[a] > 0 else 0)) / rm.dims[a]
            ta = (boundary - o[a]) / d[a]
            if ta < t_exit:
                t_exit = ta
                axis = a
        if t_exit < t:
            t_exit = t
        if t_exit > t_end:
            t_exit = t_end
        flat = idx[0] + nx * (idx[1] + ny * idx[2])
        cells += 1
        sigma = rm.density[flat]
        dtau = sigma * (t_exit - t)
        if sigma > 0.0 and tau + dtau >= target:
            t_hit = t + (target - tau) / sigma
            return COLLIDED, min(t_hit, t_exit), flat, target, cells, nseg
        tau += dtau
        if nseg < seg_ids.shape[0]:
            seg_ids[nseg] = flat
            seg_t0[nseg] = t
            seg_t1[nseg] = t_exit
        nseg += 1
        if t_exit >= t_end or axis < 0:
            return ESCAPED, t_end, flat, tau, cells, nseg
        idx[axis] += step[axis]
        if idx[axis] < 0 or idx[axis] >= rm.dims[axis]:
            return ESCAPED, t_exit, flat, tau, cells, nseg
        t = t_exit
    return ABORTED, t, -1, tau, cells, nseg


# --- shared integrator -------------------------------------------------------

@njit(cache=True, nogil=True)
def march(kind, tm, rm, o, d, t0, t1, target, seg_ids, seg_t0, seg_t1):
    """Locate the entry cell just past t0 and march the chord [t0, t1]."""
    # Vstupní buňka se hledá kousek za vstupem do krychle
    t_inside = t0 + min(ENTRY_OFFSET, 0.5 * (t1 - t0))
    p = np.empty(3)
    for a in range(3):
        p[a] = min(max(o[a] + t_inside * d[a], 0.0), 1.0)
    if kind == TET:
        leaf = locate_tet(tm, p)
        if leaf < 0:
            return ESCAPED, t1, -1, 0.0, 0, 0
        return march_tet(tm, o, d, t0, t1, leaf, target, seg_ids, seg_t0, seg_t1)
    idx = locate_cell(rm, p)
    return march_dda(rm, o, d, t0, t1, idx, target, seg_ids, seg_t0, seg_t1)


@njit(cache=True, nogil=True)
def cell_payload(kind, tm, rm, cell):
    """(temperature, albedo) of a cell; negative values mean the channel is absent."""
    if kind == TET:
        return tm.temperature[cell], tm.albedo[cell]
    return rm.temperature[cell], rm.albedo[cell]


@njit(cache=True, nogil=True)
def trace_path(kind, tm, rm, o, d, seed_lo, seed_hi, pixel, sample, params, table):
    """One radiance sample along (o, d). Returns (r, g, b, cells visited, aborted)."""
    max_bounces = int(params[P_MAX_BOUNCES])
    g = params[P_HG_G]
    env_r, env_g, env_b = params[P_ENV], params[P_ENV + 1], params[P_ENV + 2]
    emission_scale = params[P_EMISSION_SCALE]
    no_record = np.empty(0, dtype=np.int64)
    no_t = np.empty(0)

    pos = o.copy()
    dirn = d.copy()
    throughput = 1.0
    r = gr = b = 0.0
    cells = 0
    for bounce in range(max_bounces):
        hit, t0, t1 = slab_unit_cube(pos, dirn, 0.0, np.inf)
        if not hit:
            return r + throughput * env_r, gr + throughput * env_g, b + throughput * env_b, cells, 0
        dim = DIM_BOUNCE + DIMS_PER_BOUNCE * bounce
        # Exp(1) cílová optická hloubka pro regular tracking
        target = -math.log(1.0 - random_uniform(seed_lo, seed_hi, pixel, sample, dim))
        status, t_hit, cell, _, visited, _ = march(kind, tm, rm, pos, dirn, t0, t1, target,
                                                   no_record, no_t, no_t)
        cells += visited
        if status == ABORTED:
            return r, gr, b, cells, 1
        if status == ESCAPED:
            return r + throughput * env_r, gr + throughput * env_g, b + throughput * env_b, cells, 0

        for a in range(3):
            pos[a] = pos[a] + t_hit * dirn[a]
        temperature, albedo = cell_payload(kind, tm, rm, cell)
        if temperature > 0.0:
            er, eg, eb = emission_rgb(temperature, table)
            r += throughput * emission_scale * er
            gr += throughput * emission_scale * eg
            b += throughput * emission_scale * eb
        # absorpce
        throughput *= albedo if albedo >= 0.0 else params[P_DEFAULT_ALBEDO]
        if throughput <= 0.0:
            return r, gr, b, cells, 0
        # Russian roulette, survivor keeps throughput 1
        if bounce >= ROULETTE_BOUNCE and throughput < ROULETTE_THRESHOLD:
            if random_uniform(seed_lo, seed_hi, pixel, sample, dim + 1) >= throughput:
                return r, gr, b, cells, 0
            throughput = 1.0
        xi1 = random_uniform(seed_lo, seed_hi, pixel, sample, dim + 2)
        xi2 = random_uniform(seed_lo, seed_hi, pixel, sample, dim + 3)
        nx, ny, nz = sample_hg(dirn[0], dirn[1], dirn[2], g, xi1, xi2)
        dirn[0] = nx
        dirn[1] = ny
        dirn[2] = nz
    return r, gr, b, cells, 0


@njit(cache=True, nogil=True)
def render_tile(kind, tm, rm, cam, x0, y0, x1, y1, width, height, spp, seed_lo, seed_hi,
                params, table, mean, m2, counters):
    """Render pixels [x0, x1) x [y0, y1) into the shared mean/m2 images.

    Each pixel depends only on its own RNG keys, so the image does not depend
    on the tiling. counters receives (cells visited, aborted paths).
    """
    pos = cam[0:3]
    fwd = cam[3:6]
    right = cam[6:9]
    up = cam[9:12]
    tan_half = cam[12]
    aspect = cam[13]
    d = np.empty(3)
    cells = 0
    aborted = 0
    for py in range(y0, y1):
        for px in range(x0, x1):
            pixel = py * width + px
            mr = mg = mb = 0.0
            qr = qg = qb = 0.0
            for s in range(spp):
                jx = random_uniform(seed_lo, seed_hi, pixel, s, DIM_JITTER_X)
                jy = random_uniform(seed_lo, seed_hi, pixel, s, DIM_JITTER_Y)
                sx = ((px + jx) / width * 2.0 - 1.0) * tan_half * aspect
                sy = (1.0 - (py + jy) / height * 2.0) * tan_half
                for a in range(3):
                    d[a] = fwd[a] + sx * right[a] + sy * up[a]
                norm = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
                for a in range(3):
                    d[a] /= norm
                r, g, b, visited, ab = trace_path(kind, tm, rm, pos, d, seed_lo, seed_hi,
                                                  pixel, s, params, table)
                cells += visited
                aborted += ab
                n = s + 1.0
                delta = r - mr
                mr += delta / n
                qr += delta * (r - mr)
                delta = g - mg
                mg += delta / n
                qg += delta * (g - mg)
                delta = b - mb
                mb += delta / n
                qb += delta * (b - mb)
            mean[py, px, 0] = mr
            mean[py, px, 1] = mg
            mean[py, px, 2] = mb
            m2[py, px, 0] = qr
            m2[py, px, 1] = qg
            m2[py, px, 2] = qb
    counters[0] += cells
    counters[1] += aborted
