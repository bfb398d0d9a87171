"""
SQLite run ledger: connection and schema management.
"""
import aiosqlite
from pathlib import Path
from contextlib import asynccontextmanager
from typing import Union

DATABASE_PATH = Path("runs") / "ledger.db"

SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    id TEXT PRIMARY KEY,
    command TEXT NOT NULL,
    status TEXT NOT NULL CHECK(status IN ('pending', 'running', 'completed', 'failed')),
    config_hash TEXT NOT NULL,
    seed INTEGER NOT NULL,
    args TEXT NOT NULL,
    outputs TEXT,
    error TEXT,
    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
    completed_at TIMESTAMP
);

CREATE INDEX IF NOT EXISTS idx_runs_command ON runs(command);
CREATE INDEX IF NOT EXISTS idx_runs_status ON runs(status);
CREATE INDEX IF NOT EXISTS idx_runs_created_at ON runs(created_at DESC);
"""


async def init_database(path: Union[str, Path] = DATABASE_PATH) -> Path:
    """Create the ledger file and tables if missing."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    async with aiosqlite.connect(path) as db:
        await db.executescript(SCHEMA)
        await db.commit()
    return path


@asynccontextmanager
async def get_db(path: Union[str, Path] = DATABASE_PATH):
    """Get database connection context manager."""
    db = await aiosqlite.connect(Path(path))
    db.row_factory = aiosqlite.Row
    try:
        yield db
    finally:
        await db.close()
