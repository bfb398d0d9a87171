"""
Run-ledger records: one row per CLI command invocation.
"""
import json
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Union

from database.database import DATABASE_PATH, get_db
from model import RunRecord, RunStatus, RunSummary

PathLike = Union[str, Path]


def _now() -> datetime:
    return datetime.now(timezone.utc)


async def create_run(
    command: str,
    config_hash: str,
    seed: int,
    args: dict[str, Any],
    db_path: PathLike = DATABASE_PATH,
    run_id: Optional[str] = None,
) -> RunRecord:
    """Record a new pending run."""
    run_id = run_id or str(uuid.uuid4())
    now = _now()
    async with get_db(db_path) as db:
        await db.execute(
            """
            INSERT INTO runs (id, command, status, config_hash, seed, args, created_at)
            VALUES (?, ?, ?, ?, ?, ?, ?)
            """,
            (run_id, command, RunStatus.PENDING.value, config_hash, seed,
             json.dumps(args, sort_keys=True, default=str), now.isoformat()),
        )
        await db.commit()

    return RunRecord(
        id=run_id,
        command=command,
        status=RunStatus.PENDING,
        config_hash=config_hash,
        seed=seed,
        args=json.loads(json.dumps(args, default=str)),
        created_at=now,
    )


async def update_run_status(
    run_id: str,
    status: RunStatus,
    outputs: Optional[dict[str, Any]] = None,
    error: Optional[str] = None,
    db_path: PathLike = DATABASE_PATH,
) -> None:
    """Move a run along pending -> running -> completed/failed."""
    finished = status in (RunStatus.COMPLETED, RunStatus.FAILED)
    async with get_db(db_path) as db:
        await db.execute(
            """
            UPDATE runs
            SET status = ?, outputs = COALESCE(?, outputs), error = ?, completed_at = ?
            WHERE id = ?
            """,
            (
                status.value,
                json.dumps(outputs, sort_keys=True, default=str) if outputs is not None else None,
                error,
                _now().isoformat() if finished else None,
                run_id,
            ),
        )
        await db.commit()


async def get_run(run_id: str, db_path: PathLike = DATABASE_PATH) -> Optional[RunRecord]:
    async with get_db(db_path) as db:
        cursor = await db.execute("SELECT * FROM runs WHERE id = ?", (run_id,))
        row = await cursor.fetchone()
        return _row_to_record(row) if row else None


async def list_runs(
    command: Optional[str] = None,
    limit: int = 50,
    offset: int = 0,
    db_path: PathLike = DATABASE_PATH,
) -> tuple[list[RunSummary], int]:
    """Most recent runs first, optionally filtered by command, plus the total count."""
    where, params = ("WHERE command = ?", (command,)) if command else ("", ())
    async with get_db(db_path) as db:
        cursor = await db.execute(f"SELECT COUNT(*) FROM runs {where}", params)
        total = (await cursor.fetchone())[0]

        cursor = await db.execute(
            f"""
            SELECT id, command, status, config_hash, created_at
            FROM runs
            {where}
            ORDER BY created_at DESC
            LIMIT ? OFFSET ?
            """,
            (*params, limit, offset),
        )
        rows = await cursor.fetchall()

    summaries = [
        RunSummary(
            id=row["id"],
            command=row["command"],
            status=RunStatus(row["status"]),
            config_hash=row["config_hash"],
            created_at=datetime.fromisoformat(row["created_at"]),
        )
        for row in rows
    ]
    return summaries, total


def _row_to_record(row) -> RunRecord:
    return RunRecord(
        id=row["id"],
        command=row["command"],
        status=RunStatus(row["status"]),
        config_hash=row["config_hash"],
        seed=row["seed"],
        args=json.loads(row["args"]),
        outputs=json.loads(row["outputs"]) if row["outputs"] else None,
        error=row["error"],
        created_at=datetime.fromisoformat(row["created_at"]),
        completed_at=datetime.fromisoformat(row["completed_at"]) if row["completed_at"] else None,
    )
