"""
Command-line front end.

Subcommands run single stages (``design``, ``evolve``, ``bpm``,
``two-boson``, ``compare``, ``sweep``) or the configured pipeline
(``all``). Exit code 0 means every check passed, 2 that an acceptance
threshold failed and 1 that an error was raised.
"""

import argparse
import logging
from pathlib import Path
from typing import List, Optional, Sequence

from src.experiments.config import load_config
from src.experiments.runner import run_all, run_stages
from src.models.data_models import Stage
from src.utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_THRESHOLD = 2

COMMAND_STAGES = {
    "design": Stage.DESIGN,
    "evolve": Stage.TIGHT_BINDING,
    "bpm": Stage.BPM,
    "two-boson": Stage.TWO_BOSON,
    "compare": Stage.COMPARE,
    "sweep": Stage.SWEEP,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bosehubbard-lattice",
        description="Design and validate waveguide arrays that realize the two-site Bose-Hubbard model"
    )
    parser.add_argument('command', choices=[*COMMAND_STAGES, "all"], help='Stage to run')
    parser.add_argument('--config', type=Path, default=None, help='Config file (defaults when omitted)')
    parser.add_argument('--out', default=None, help='Output directory, same as --override run.out_dir=DIR')
    parser.add_argument('--override', action='append', default=[], metavar='SECTION.KEY=VALUE',
                        help='Override one config value; repeatable')
    parser.add_argument('--log-level',
                        default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
                        help='Set the logging level')
    parser.add_argument('--no-log-file',
                        action='store_true',
                        help='Disable logging to file')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the command and return the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(log_level=args.log_level, log_to_file=not args.no_log_file)

    overrides: List[str] = list(args.override)
    if args.out is not None:
        overrides.append(f"run.out_dir={args.out}")

    try:
        config = load_config(args.config, overrides)
        if args.command == "all":
            results = run_all(config)
        else:
            results = run_stages(config, [COMMAND_STAGES[args.command]])
    except Exception as e:  # pylint: disable=broad-except
        logger.error("%s failed: %s", args.command, e)
        logger.debug("Traceback", exc_info=True)
        return EXIT_ERROR

    failed = [result.stage.value for result in results if not result.passed]
    logger.info("Results in %s", config.run_directory())
    if failed:
        logger.error("Acceptance checks failed in: %s", ", ".join(failed))
        return EXIT_THRESHOLD
    logger.info("All checks passed")
    return EXIT_PASS
