"""
Helpers shared by the subcommands.
"""
import argparse
from pathlib import Path
from typing import Any, Optional, Sequence

from attacks import Artifact, load_artifact
from model import AttackMode, RunConfig
from policy import DiffusionPolicy, load_policy
from utils import ConfigError, config_hash


def add_mode_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--targeted", dest="mode", action="store_const", const=AttackMode.TARGETED.value,
                       help="Drive the policy toward the target trajectory")
    group.add_argument("--untargeted", dest="mode", action="store_const", const=AttackMode.UNTARGETED.value,
                       help="Push the policy away from its clean trajectory")


def stamp_metadata(config: RunConfig) -> dict[str, Any]:
    """Resolved config, its hash and the master seed, embedded in every output file."""
    return {"config": config.model_dump(mode="json"), "config_hash": config_hash(config), "seed": config.seed}


def parse_artifact_specs(specs: Optional[Sequence[str]]) -> dict[str, Path]:
    """KEY=PATH pairs, e.g. 'offline=runs/artifacts/offline.dpab'."""
    parsed: dict[str, Path] = {}
    for spec in specs or ():
        key, sep, path = spec.partition("=")
        if not sep or not key or not path:
            raise ConfigError(f"--artifacts expects KEY=PATH, got '{spec}'")
        if key in parsed:
            raise ConfigError(f"Artifact key '{key}' given twice")
        parsed[key] = Path(path)
    return parsed


def load_artifacts(specs: Optional[Sequence[str]]) -> dict[str, Artifact]:
    return {key: load_artifact(path) for key, path in parse_artifact_specs(specs).items()}


def load_matching_policy(config: RunConfig) -> DiffusionPolicy:
    """Load the checkpoint and reject an environment that renders at another size."""
    policy = load_policy(config.paths.checkpoint)
    if policy.config.image_size != config.env.resolution:
        raise ConfigError(f"env.resolution is {config.env.resolution}px but the checkpoint "
                          f"expects {policy.config.image_size}px frames")
    return policy
