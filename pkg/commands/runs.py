"""
runs: list the run ledger.
"""
import argparse

from database import init_database, repository
from model import RunConfig

NAME = "runs"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="List recorded runs")
    parser.add_argument("--command", dest="filter_command", type=str, help="Only runs of this command")
    parser.add_argument("--limit", type=int, default=50, help="Max records to show (default: 50)")
    parser.add_argument("--offset", type=int, default=0, help="Offset for pagination (default: 0)")
    parser.add_argument("--id", dest="run_id", type=str, help="Show one run in full")
    parser.set_defaults(record=False)
    return parser


def overrides(args: argparse.Namespace) -> dict:
    return {}


async def run(args: argparse.Namespace, config: RunConfig) -> dict:
    ledger = await init_database(config.paths.ledger)
    if args.run_id:
        record = await repository.get_run(args.run_id, db_path=ledger)
        if record is None:
            print(f"No run with id {args.run_id}")
            return {"found": False}
        print(record.model_dump_json(indent=2))
        return {"found": True}

    summaries, total = await repository.list_runs(args.filter_command, args.limit, args.offset, db_path=ledger)
    print(f"{'ID':<36}  {'COMMAND':<9}  {'STATUS':<9}  {'CONFIG':<16}  CREATED")
    for s in summaries:
        print(f"{s.id:<36}  {s.command:<9}  {s.status.value:<9}  {s.config_hash:<16}  {s.created_at.isoformat()}")
    print(f"{len(summaries)} of {total} runs")
    return {"shown": len(summaries), "total": total}
