"""
Command-line entry point: gen-data -> train -> attack -> bench.
"""
import argparse
import asyncio
import logging
import sys
from typing import Optional, Sequence

from commands import register_commands
from database import init_database, repository
from evaluation import BenchmarkError
from model import RunStatus
from utils import ConfigError, config_hash, load_config

logger = logging.getLogger("dpattack")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
USAGE_ERRORS = (ConfigError, BenchmarkError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Train, attack and evaluate visual diffusion policies")
    parser.add_argument("--config", type=str, help="JSON config document; flags override it")
    parser.add_argument("--seed", type=int, help="Master seed (default: 0)")
    parser.add_argument("--ledger", type=str, help="Run ledger database (default: runs/ledger.db)")
    parser.add_argument("--log-level", type=str, default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level (default: INFO)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_commands(subparsers)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,
    )


def _recorded_args(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("command_module", "record")}


async def execute(args: argparse.Namespace) -> int:
    """Resolve the config, record the run in the ledger and dispatch the subcommand."""
    command = args.command_module
    try:
        config = load_config(args.config, {"seed": args.seed, "paths.ledger": args.ledger, **command.overrides(args)})
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE

    if not getattr(args, "record", True):
        await command.run(args, config)
        return EXIT_OK

    ledger = await init_database(config.paths.ledger)
    record = await repository.create_run(args.command, config_hash(config), config.seed,
                                         _recorded_args(args), db_path=ledger)
    await repository.update_run_status(record.id, RunStatus.RUNNING, db_path=ledger)
    logger.info(f"Run {record.id} ({args.command}) started, config {record.config_hash}")

    try:
        outputs = await command.run(args, config)
    except Exception as e:
        await repository.update_run_status(record.id, RunStatus.FAILED, error=f"{type(e).__name__}: {e}",
                                           db_path=ledger)
        if isinstance(e, USAGE_ERRORS):
            logger.error(f"Run {record.id} failed: {e}")
            return EXIT_USAGE
        logger.exception(f"Run {record.id} failed: {e}")
        return EXIT_FAILURE

    await repository.update_run_status(record.id, RunStatus.COMPLETED, outputs=outputs, db_path=ledger)
    logger.info(f"Run {record.id} completed")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    return asyncio.run(execute(args))


if __name__ == "__main__":
    sys.exit(main())
