"""
Database configuration and initialization for the FairRec marketing-bias lab
The database holds the run manifest: one row per command invocation
"""

import logging
import sqlite3
from functools import wraps

from flask_sqlalchemy import SQLAlchemy
from sqlalchemy import event
from sqlalchemy.engine import Engine
from sqlalchemy.exc import SQLAlchemyError

logger = logging.getLogger(__name__)

# Seconds a command waits for another process holding <out>/runs.db
MANIFEST_BUSY_TIMEOUT = 5

db = SQLAlchemy()


@event.listens_for(Engine, "connect")
def set_sqlite_pragma(dbapi_connection, connection_record):
    """Let concurrent sweeps over one output directory share the manifest"""
    if isinstance(dbapi_connection, sqlite3.Connection):
        cursor = dbapi_connection.cursor()
        cursor.execute(f"PRAGMA busy_timeout={MANIFEST_BUSY_TIMEOUT * 1000}")
        cursor.close()


def init_db(app):
    """Create the manifest tables for an application"""
    with app.app_context():
        from models.run import ExperimentRun  # noqa: F401

        db.create_all()
        logger.debug("Run manifest ready at %s", app.config['SQLALCHEMY_DATABASE_URI'])


class DatabaseError(Exception):
    """A manifest write failed; the session has been rolled back"""


def handle_db_error(func):
    """Roll back and re-raise manifest failures as DatabaseError"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SQLAlchemyError as e:
            db.session.rollback()
            logger.debug("Manifest operation %s failed: %s", func.__name__, e)
            raise DatabaseError(f"Manifest write failed: {e}") from e
    return wrapper
