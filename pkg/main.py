import argparse
import logging
import sys

from cli.commands import COMMANDS, GENERATOR_KINDS
from engine.compare import CompareError
from engine.image_io import ImageFormatError
from grid.builder import ConfigError
from grid.errors import LebError
from volume.dense import VolumeError


def setup_logging(verbose=False):
    """Nastaví logging pro aplikaci (diagnostika jde na stderr, JSON výsledky na stdout)."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s -  %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stderr)
        ]
    )
    logging.getLogger('numba').setLevel(logging.WARNING)
    logging.debug("Logging system initialized")


def _add_config_options(parser):
    parser.add_argument("--config", help="job file with [scene]/[camera]/[build]/[render]/[output] sections")
    parser.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")


def _add_build_options(parser):
    parser.add_argument("--threshold", type=float, help="density variation threshold")
    parser.add_argument("--max-level", type=int, help="refinement cap")
    parser.add_argument("--pixel-threshold", type=float, help="projected-size threshold in pixels")
    parser.add_argument("--density-scale", type=float, help="multiplier for stored densities")
    parser.add_argument("--camera", dest="use_camera", action="store_const", const="true",
                        help="enable the frustum and projected-size criteria")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Adaptive tetrahedral grids from dense volumes, and a volumetric path tracer for them.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a procedural test volume (.dvol)")
    gen.add_argument("kind", choices=GENERATOR_KINDS)
    gen.add_argument("size", type=int, help="voxels per axis")
    gen.add_argument("output")
    gen.add_argument("--temperature", action="store_true", help="add a temperature channel")

    build = sub.add_parser("build", help="build an adaptive grid (.tgrid) from a volume")
    build.add_argument("volume", nargs="?", help=".dvol input (default: [scene] of the job file)")
    build.add_argument("output")
    _add_config_options(build)
    _add_build_options(build)

    render = sub.add_parser("render", help="render a grid or volume to .pfm/.ppm")
    render.add_argument("input", nargs="?", help=".tgrid or .dvol (default: [scene] of the job file)")
    render.add_argument("-o", "--output", help="image path (.pfm or .ppm)")
    render.add_argument("--reference", action="store_true", help="render the regular-grid reference")
    render.add_argument("--spp", type=int)
    render.add_argument("--seed", type=int)
    render.add_argument("--threads", type=int)
    render.add_argument("--tile-size", type=int)
    render.add_argument("--max-bounces", type=int)
    render.add_argument("--g", type=float, help="Henyey-Greenstein anisotropy")
    render.add_argument("--width", type=int)
    render.add_argument("--height", type=int)
    _add_config_options(render)
    _add_build_options(render)

    compare = sub.add_parser("compare", help="compare a render against a reference render")
    compare.add_argument("image", help="tetrahedral render (.pfm)")
    compare.add_argument("reference", help="reference render (.pfm)")

    validate = sub.add_parser("validate", help="check grid invariants and traversal")
    validate.add_argument("grid")
    validate.add_argument("--rays", type=int, default=100, help="random traversal spot checks")
    validate.add_argument("--seed", type=int, default=0)

    stats = sub.add_parser("stats", help="print grid statistics")
    stats.add_argument("grid")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    logger = logging.getLogger(__name__)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return 2
    except (VolumeError, LebError, CompareError, ImageFormatError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    except Exception:
        logger.exception(f"Unexpected error in '{args.command}'")
        return 1


if __name__ == "__main__":
    sys.exit(main())
