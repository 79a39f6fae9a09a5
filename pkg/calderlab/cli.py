"""Command-line driver: calderlab <experiment> [--flag value ...]."""
import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from . import __version__
from .config import EXPERIMENTS, FORMATS, KINDS, LOG_LEVELS, PARTS, ConfigError, ConfigManager, FIELD_TYPES, \
    convert_value
from .experiments import manifest_path, run
from .monitoring.core import monitoring_system

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='calderlab',
        allow_abbrev=False,
        description="Numerical verification experiments for the first Calderon commutator",
    )
    parser.add_argument('experiment', choices=EXPERIMENTS)
    parser.add_argument('--config', help="key=value configuration file; flags override it")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--L', help="half width of the grid [-L, L)")
    parser.add_argument('--N', help="number of samples (power of two)")
    parser.add_argument('--kind', choices=KINDS)
    parser.add_argument('--a')
    parser.add_argument('--b')
    parser.add_argument('--part', choices=PARTS)
    parser.add_argument('--k', help="Whitney scale")
    parser.add_argument('--nmax')
    parser.add_argument('--resolution')
    parser.add_argument('--epsilon', help="inner truncation; 0 selects the grid spacing")
    parser.add_argument('--p')
    parser.add_argument('--shifts', help="comma separated, strictly increasing")
    parser.add_argument('--trials')
    parser.add_argument('--seed')
    parser.add_argument('--points')
    parser.add_argument('--nodes')
    parser.add_argument('--xi')
    parser.add_argument('--xi1')
    parser.add_argument('--xi2')
    parser.add_argument('--out', help="output directory")
    parser.add_argument('--format', help=f"comma separated subset of {','.join(FORMATS)}")
    parser.add_argument('--log-level', dest='log_level', choices=LOG_LEVELS, type=str.upper)
    parser.add_argument('--database-path', dest='database_path')
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Flags given on the command line, converted with the config file rules."""
    updates: Dict[str, Any] = {'experiment': args.experiment}
    for key in FIELD_TYPES:
        raw = getattr(args, key, None)
        if key == 'experiment' or raw is None:
            continue
        updates[key] = convert_value(key, raw)
    return updates


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manager = ConfigManager(args.config)
        manager.load_config()
        config = manager.update_config(overrides_from_args(args))
    except ConfigError as e:
        print(f"calderlab: {e}", file=sys.stderr)
        return EXIT_CONFIG

    monitoring_system.initialize(config)
    try:
        manifest = run(config)
    except Exception as e:
        logging.getLogger(__name__).error(f"Run failed before a manifest was written: {e}")
        print(f"calderlab: {e}", file=sys.stderr)
        return EXIT_FAIL

    for result in manifest.assertions:
        mark = '✓' if result.passed else '✗'
        value = '' if result.value is None else f" {result.value:.6g}"
        print(f"{mark} {result.name}{value}")
    for key, value in sorted(manifest.summary.items()):
        print(f"  {key} = {value}")
    print(f"Manifest: {manifest_path(config)}")
    return EXIT_PASS if manifest.passed else EXIT_FAIL


if __name__ == '__main__':
    sys.exit(main())
