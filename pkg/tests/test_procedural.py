import numpy as np
import pytest

from volume.procedural import (BlobVolume, NoiseVolume, VOLUME_TYPES, VolumeGenerator, generator_names,
                               get_generator)


def test_registry_names():
    assert generator_names() == ["constant", "ramp", "blob", "step", "noise"]
    for cls in VOLUME_TYPES:
        assert issubclass(cls, VolumeGenerator)
        assert cls().description


def test_lookup_is_case_insensitive():
    assert isinstance(get_generator("BLOB"), BlobVolume)


def test_unknown_kind():
    with pytest.raises(KeyError):
        get_generator("fractal-tree")


def test_constant():
    volume = get_generator("constant").generate(4)
    assert volume.dims == (4, 4, 4)
    assert np.all(volume.density == 1.0)
    assert not volume.has_channel("temperature")


def test_ramp_follows_x():
    density = get_generator("ramp").generate(4).density
    np.testing.assert_allclose(density[:, 1, 2], [0.125, 0.375, 0.625, 0.875])
    assert np.all(density[2] == density[2, 0, 0])


def test_blob_peaks_at_center():
    density = get_generator("blob").generate(5).density
    assert density[2, 2, 2] == pytest.approx(1.0)
    assert density[0, 0, 0] == 0.0
    assert density.min() >= 0.0


def test_step_splits_at_half():
    density = get_generator("step").generate(4).density
    assert np.all(density[:2] == 1.0)
    assert np.all(density[2:] == 0.0)


def test_noise_is_normalized_and_deterministic():
    a = NoiseVolume().generate(12).density
    b = NoiseVolume().generate(12).density
    np.testing.assert_array_equal(a, b)
    assert a.min() == pytest.approx(0.0, abs=1e-6)
    assert a.max() == pytest.approx(1.0, abs=1e-6)
    assert len(np.unique(a)) > 100


def test_temperature_channel_tracks_density():
    volume = get_generator("blob").generate(6, temperature=True)
    temperature = volume.channel("temperature")
    assert temperature.max() == pytest.approx(1.0)
    np.testing.assert_allclose(temperature, volume.density / volume.density.max(), rtol=1e-6)


def test_size_must_be_positive():
    with pytest.raises(ValueError):
        get_generator("ramp").generate(0)
