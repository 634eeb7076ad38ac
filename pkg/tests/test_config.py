import pytest

from cli.config import load_job, parse_override
from grid.builder import ConfigError


def write_job(tmp_path, text, name="job.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults():
    job = load_job()
    assert job.render.spp == 16
    assert job.build.variation_threshold == 0.5
    assert job.camera.position == (0.5, 0.5, -1.5)
    assert job.scene.volume is None and job.scene.generate is None


def test_file_sections(tmp_path):
    path = write_job(tmp_path, """
[scene]
generate = blob:24
temperature = yes

[camera]
position = 0.5, 2.0, 0.5
up = 0 0 1
width = 32

[build]
max_level = 9
use_camera = true

[render]
spp = 8
environment = 0.1 0.2 0.3
""")
    job = load_job(path)
    assert job.scene.generator() == ("blob", 24)
    assert job.scene.temperature is True
    assert job.camera.position == (0.5, 2.0, 0.5)
    assert job.camera.width == 32
    assert job.build.max_level == 9 and job.build.use_camera
    assert job.render.spp == 8
    assert job.render.environment == (0.1, 0.2, 0.3)


def test_overrides_apply_after_file(tmp_path):
    path = write_job(tmp_path, "[render]\nspp = 8\n")
    job = load_job(path, ["render.spp=32", "camera.vfov=30"])
    assert job.render.spp == 32
    assert job.camera.vfov == 30.0


def test_hex_seed():
    assert load_job(overrides=["render.seed=0xff"]).render.seed == 255


def test_default_generator_size():
    assert load_job(overrides=["scene.generate=noise"]).scene.generator() == ("noise", 32)


@pytest.mark.parametrize("text", ["render.spp", "spp=4", ".spp=4", "render.=4"])
def test_malformed_override(text):
    with pytest.raises(ConfigError):
        parse_override(text)


def test_parse_override():
    assert parse_override(" Render.SPP = 4 ") == ("render", "spp", "4")


@pytest.mark.parametrize("overrides", [
    ["lights.count=2"],
    ["render.samples=4"],
    ["render.spp=many"],
    ["camera.position=1,2"],
    ["build.use_camera=maybe"],
    ["render.spp=0"],
    ["camera.vfov=200"],
    ["scene.generate=blob:big"],
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        job = load_job(overrides=overrides)
        job.scene.generator()


def test_unknown_section_in_file(tmp_path):
    with pytest.raises(ConfigError, match="unknown section"):
        load_job(write_job(tmp_path, "[lights]\ncount = 2\n"))


def test_syntax_error_in_file(tmp_path):
    with pytest.raises(ConfigError):
        load_job(write_job(tmp_path, "spp = 4\n"))


def test_relative_volume_resolves_against_job_file(tmp_path):
    (tmp_path / "scenes").mkdir()
    (tmp_path / "scenes" / "fog.dvol").write_bytes(b"")
    job = load_job(write_job(tmp_path, "[scene]\nvolume = fog.dvol\n", name="scenes/job.ini"))
    assert job.scene.volume == tmp_path / "scenes" / "fog.dvol"


def test_missing_volume_file(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_job(write_job(tmp_path, "[scene]\nvolume = nowhere.dvol\n"))


def test_volume_and_generate_are_exclusive(tmp_path):
    (tmp_path / "fog.dvol").write_bytes(b"")
    with pytest.raises(ConfigError, match="mutually exclusive"):
        load_job(write_job(tmp_path, "[scene]\nvolume = fog.dvol\ngenerate = blob:8\n"))


def test_missing_job_file(tmp_path):
    with pytest.raises(OSError):
        load_job(tmp_path / "absent.ini")
