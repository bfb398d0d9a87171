"""
train: behavior-clone the diffusion policy on a demonstration dataset.
"""
import argparse
import asyncio
import logging

from commands.common import stamp_metadata
from envs import DemoDataset
from model import RunConfig
from policy import load_policy, save_policy, train_policy

logger = logging.getLogger(__name__)

NAME = "train"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="Train the visual diffusion policy")
    parser.add_argument("--data", type=str, help="Dataset file (default: runs/demos.dpab)")
    parser.add_argument("--epochs", type=int, help="Total training epochs, including resumed ones (default: 60)")
    parser.add_argument("--batch", type=int, help="Minibatch size (default: 64)")
    parser.add_argument("--lr", type=float, help="Adam learning rate (default: 1e-3)")
    parser.add_argument("--out", type=str, help="Checkpoint file (default: runs/policy.dpab)")
    parser.add_argument("--resume", type=str, help="Continue training from this checkpoint")
    return parser


def overrides(args: argparse.Namespace) -> dict:
    return {
        "paths.data": args.data,
        "train.epochs": args.epochs,
        "train.batch": args.batch,
        "train.lr": args.lr,
        "paths.checkpoint": args.out,
    }


async def run(args: argparse.Namespace, config: RunConfig) -> dict:
    dataset = DemoDataset.load(config.paths.data)
    resume = load_policy(args.resume, resume=True) if args.resume else None
    if resume is not None:
        logger.info(f"Resuming from {args.resume} after {resume.training_state.epochs_completed} epochs")
    policy = await asyncio.to_thread(
        train_policy, dataset, config.train.epochs, config.train.batch, config.train.lr,
        config.seed, config.policy, resume,
    )
    path = save_policy(policy, config.paths.checkpoint, stamp_metadata(config))
    losses = policy.training_state.epoch_losses if policy.training_state else []
    return {"checkpoint": str(path), "epochs": len(losses), "final_loss": losses[-1] if losses else None}
