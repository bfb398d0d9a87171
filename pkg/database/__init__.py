"""Run ledger persistence."""
from database.database import DATABASE_PATH, get_db, init_database
from database import repository

__all__ = ["DATABASE_PATH", "get_db", "init_database", "repository"]
