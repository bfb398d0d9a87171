"""
gen-data: collect scripted expert demonstrations.
"""
import argparse
import asyncio
import logging

from commands.common import stamp_metadata
from envs import generate_dataset
from model import RunConfig

logger = logging.getLogger(__name__)

NAME = "gen-data"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="Generate an expert demonstration dataset")
    parser.add_argument("--episodes", type=int, help="Successful demonstrations to collect (default: 150)")
    parser.add_argument("--max-steps", type=int, help="Step cap per demonstration (default: 200)")
    parser.add_argument("--out", type=str, help="Dataset file (default: runs/demos.dpab)")
    return parser


def overrides(args: argparse.Namespace) -> dict:
    return {"train.episodes": args.episodes, "train.max_steps": args.max_steps, "paths.data": args.out}


async def run(args: argparse.Namespace, config: RunConfig) -> dict:
    dataset = await asyncio.to_thread(
        generate_dataset, config.train.episodes, config.train.max_steps, config.seed,
        config.env.resolution, stamp_metadata(config),
    )
    path = dataset.save(config.paths.data)
    logger.info(f"Wrote {len(dataset)} demonstrations ({dataset.total_steps} steps) to {path}")
    return {"dataset": str(path), "episodes": len(dataset), "steps": dataset.total_steps}
