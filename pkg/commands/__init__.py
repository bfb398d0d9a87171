"""
CLI subcommands.

Each module exposes NAME, register(subparsers), overrides(args) mapping
flags to dotted config keys, and an async run(args, config) returning the
outputs recorded in the run ledger.
"""
from commands import attack, bench, gen_data, runs, train

COMMANDS = [gen_data, train, attack, bench, runs]


def register_commands(subparsers) -> None:
    for command in COMMANDS:
        parser = command.register(subparsers)
        parser.set_defaults(command_module=command)


__all__ = ["COMMANDS", "register_commands", "attack", "bench", "gen_data", "runs", "train"]
