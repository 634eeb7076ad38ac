"""Sub-command implementations. Each returns a process exit code; JSON results go to stdout."""
import json
import logging
from pathlib import Path

import numpy as np

from engine.compare import compare_renders
from engine.image_io import read_pfm, stats_path, variance_path, write_image, write_pfm
from engine.medium import scene_from_grid
from engine.reference import from_volume, render_reference
from engine.renderer import render
from engine.tracer import Ray, march_segments, segments_match
from grid.builder import AdaptiveBuilder, ConfigError
from grid.leb import ROOT_COUNT
from grid.tgrid_io import load_grid, save_grid
from volume.dense import load_dvol, save_dvol
from volume.procedural import generator_names, get_generator

from .config import RenderJob, load_job

logger = logging.getLogger(__name__)

STATS_SCHEMA = 1


def emit(payload: dict) -> None:
    # jeden řádek JSON na stdout, logy jdou na stderr
    print(json.dumps(payload, sort_keys=True))


def _job(args, overrides=()) -> RenderJob:
    return load_job(getattr(args, "config", None), list(overrides) + list(getattr(args, "set", None) or []))


def _flag_overrides(args, mapping: dict) -> list:
    # Volby z příkazové řádky se převedou na --set přepisy, aby měly přednost před souborem úlohy
    overrides = []
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    return overrides


BUILD_FLAGS = {
    "threshold": "build.variation_threshold",
    "max_level": "build.max_level",
    "pixel_threshold": "build.pixel_threshold",
    "density_scale": "build.density_scale",
    "use_camera": "build.use_camera",
}

RENDER_FLAGS = {
    "spp": "render.spp",
    "seed": "render.seed",
    "threads": "render.threads",
    "tile_size": "render.tile_size",
    "max_bounces": "render.max_bounces",
    "g": "render.hg_g",
    "width": "camera.width",
    "height": "camera.height",
}


def load_scene_volume(job: RenderJob, path=None):
    """Volume from an explicit path, the job's [scene] volume, or its procedural generator."""
    if path is not None:
        return load_dvol(path)
    if job.scene.volume is not None:
        return load_dvol(job.scene.volume)
    if job.scene.generate is not None:
        kind, size = job.scene.generator()
        return _generator(kind).generate(size, job.scene.temperature)
    raise ConfigError("No volume given: pass a .dvol path or set [scene] volume / generate")


def _generator(kind: str):
    try:
        return get_generator(kind)
    except KeyError as e:
        raise ConfigError(str(e.args[0])) from None


def cmd_gen(args) -> int:
    volume = _generator(args.kind).generate(args.size, temperature=args.temperature)
    save_dvol(volume, args.output)
    emit({"schema": STATS_SCHEMA, "kind": args.kind, "dims": list(volume.dims),
          "channels": list(volume.channels)})
    return 0


def cmd_build(args) -> int:
    job = _job(args, _flag_overrides(args, BUILD_FLAGS))
    volume = load_scene_volume(job, args.volume)
    camera = job.camera.camera() if job.build.use_camera else None
    builder = AdaptiveBuilder(volume, job.build, camera)
    grid = builder.build()
    # Neplatnou mřížku neukládáme
    report = grid.validate()
    if not report.ok:
        logger.error(f"Built grid failed validation: {report.first}")
        return 1
    save_grid(grid, args.output)
    emit({
        "schema": STATS_SCHEMA,
        "leafCount": grid.leaf_count,
        "vertexCount": len(grid.vertices),
        "maxDepthReached": grid.max_depth(),
        "buildSeconds": builder.stats.seconds,
        "criteriaSplits": builder.stats.criteria_splits,
    })
    return 0


def cmd_render(args) -> int:
    job = _job(args, _flag_overrides(args, RENDER_FLAGS) + _flag_overrides(args, BUILD_FLAGS))
    output = Path(args.output) if args.output else job.output.image
    if output is None:
        raise ConfigError("No output image: pass one or set [output] image")
    camera = job.camera.camera()
    source = Path(args.input) if args.input else None

    # Hotová mřížka se jen renderuje, objem se nejdřív postaví (nebo jde do DDA reference)
    if source is not None and source.suffix == ".tgrid":
        if args.reference:
            raise ConfigError("--reference renders need a volume (.dvol), not a grid")
        image = render(load_grid(source), camera, job.render)
    else:
        volume = load_scene_volume(job, source)
        if args.reference:
            image = render_reference(from_volume(volume, job.build.density_scale), camera, job.render)
        else:
            build_camera = camera if job.build.use_camera else None
            image = render(AdaptiveBuilder(volume, job.build, build_camera).build(), camera, job.render)

    write_image(output, image.mean, job.render.exposure, job.render.gamma)
    write_pfm(variance_path(output), image.variance_of_mean())
    # sidecar stats, compare je načte vedle obrázku
    stats = {"schema": STATS_SCHEMA, **image.stats}
    stats_file = job.output.stats or stats_path(output)
    Path(stats_file).write_text(json.dumps(stats, sort_keys=True, indent=2), encoding="utf-8")
    emit(stats)
    return 0


def _read_optional(path: Path, reader):
    return reader(path) if path.exists() else None


def _read_stats(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def cmd_compare(args) -> int:
    image, reference = read_pfm(args.image), read_pfm(args.reference)
    # chybějící sidecar soubory znamenají null v reportu
    report = compare_renders(
        image, reference,
        _read_optional(stats_path(args.image), _read_stats) or {},
        _read_optional(stats_path(args.reference), _read_stats) or {},
        _read_optional(variance_path(args.image), read_pfm),
        _read_optional(variance_path(args.reference), read_pfm),
    )
    emit(report)
    return 0


def random_rays(count: int, seed: int) -> list:
    """Rays from a shell around the cube toward uniformly random interior points."""
    rng = np.random.default_rng(seed)
    rays = []
    for _ in range(count):
        outward = rng.normal(size=3)
        origin = 0.5 + 1.5 * outward / np.linalg.norm(outward)
        target = rng.random(3)
        rays.append(Ray(origin, target - origin))
    return rays


def cmd_validate(args) -> int:
    grid = load_grid(args.grid)
    # nejdřív strukturální kontrola, paprsky jen nad platnou mřížkou
    report = grid.validate()
    result = {"schema": STATS_SCHEMA, "ok": report.ok, "leafCount": report.leaf_count,
              "raysChecked": 0, "firstViolation": report.first}
    if report.ok:
        scene = scene_from_grid(grid)
        for i, ray in enumerate(random_rays(args.rays, args.seed)):
            # Pochod sousedy musí souhlasit s hrubou silou přes všechny listy
            problem = segments_match(march_segments(scene, ray), grid.brute_force_segments(ray))
            result["raysChecked"] = i + 1
            if problem is not None:
                result["ok"] = False
                result["firstViolation"] = f"ray {i}: {problem}"
                break
    emit(result)
    if not result["ok"]:
        logger.error(f"Validation failed: {result['firstViolation']}")
        return 1
    logger.info(f"Grid {args.grid} is valid ({report.leaf_count} leaves, {result['raysChecked']} rays)")
    return 0


def cmd_stats(args) -> int:
    grid = load_grid(args.grid)
    depth = grid.max_depth()
    emit({
        "schema": STATS_SCHEMA,
        "leafCount": grid.leaf_count,
        "tetCount": len(grid.tets),
        "vertexCount": len(grid.vertices),
        "maxDepthReached": depth,
        "levelHistogram": {str(k): v for k, v in grid.level_histogram().items()},
        # Kolik listů by měla uniformní mřížka stejné hloubky
        "uniformLeafCount": ROOT_COUNT << depth,
    })
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "build": cmd_build,
    "render": cmd_render,
    "compare": cmd_compare,
    "validate": cmd_validate,
    "stats": cmd_stats,
}

GENERATOR_KINDS = generator_names()
