import struct

import numpy as np
import pytest

from engine.image_io import (ImageFormatError, read_pfm, stats_path, tonemap, variance_path, write_image,
                             write_pfm)


def test_pfm_layout(tmp_path):
    rgb = np.zeros((2, 3, 3))
    rgb[0, 0] = (1.0, 2.0, 3.0)  # top-left
    path = tmp_path / "a.pfm"
    write_pfm(path, rgb)
    data = path.read_bytes()
    header = b"PF\n3 2\n-1.0\n"
    assert data.startswith(header)
    assert len(data) == len(header) + 2 * 3 * 3 * 4
    # rows run bottom to top, so the top-left pixel opens the second row
    assert struct.unpack_from("<3f", data, len(header) + 3 * 3 * 4) == (1.0, 2.0, 3.0)


def test_pfm_round_trip(tmp_path, rng):
    rgb = rng.random((5, 4, 3)).astype(np.float32).astype(np.float64)
    path = tmp_path / "b.pfm"
    write_pfm(path, rgb)
    np.testing.assert_array_equal(read_pfm(path), rgb)


def test_big_endian_pfm(tmp_path):
    path = tmp_path / "be.pfm"
    path.write_bytes(b"PF\n1 1\n1.0\n" + struct.pack(">3f", 0.5, 1.5, 2.5))
    np.testing.assert_array_equal(read_pfm(path)[0, 0], [0.5, 1.5, 2.5])


@pytest.mark.parametrize("data", [
    b"P6\n1 1\n255\n\x00\x00\x00",
    b"PF\n2 2\n-1.0\n" + b"\x00" * 12,
    b"garbage",
])
def test_malformed_pfm(tmp_path, data):
    path = tmp_path / "bad.pfm"
    path.write_bytes(data)
    with pytest.raises(ImageFormatError):
        read_pfm(path)


def test_tonemap_values():
    rgb = np.array([[[1.0, 0.5, 0.0]]])
    np.testing.assert_array_equal(tonemap(rgb, gamma=1.0), [[[255, 128, 0]]])
    np.testing.assert_array_equal(tonemap(rgb, exposure=1.0, gamma=1.0), [[[255, 255, 0]]])
    np.testing.assert_array_equal(tonemap(np.array([[[4.0, -1.0, 0.25]]]), gamma=2.0), [[[255, 0, 128]]])


def test_ppm_header(tmp_path):
    path = tmp_path / "c.ppm"
    write_image(path, np.ones((2, 3, 3)))
    data = path.read_bytes()
    assert data == b"P6\n3 2\n255\n" + b"\xff" * 18


def test_unsupported_suffix(tmp_path):
    with pytest.raises(ImageFormatError):
        write_image(tmp_path / "d.png", np.zeros((1, 1, 3)))


def test_sidecar_paths(tmp_path):
    assert variance_path(tmp_path / "out.pfm") == tmp_path / "out.var.pfm"
    assert stats_path(tmp_path / "out.ppm") == tmp_path / "out.json"
