"""
Database helper utilities for the FairRec marketing-bias lab
Run-manifest writes never change a command's outcome: failures are logged and reported as (False, message)
"""

import logging

from sqlalchemy.exc import IntegrityError

from database import DatabaseError, db, handle_db_error

logger = logging.getLogger(__name__)


@handle_db_error
def _add_and_commit(obj):
    db.session.add(obj)
    db.session.commit()


@handle_db_error
def _commit():
    db.session.commit()


def safe_add_and_commit(obj):
    """Safely add object to database with error handling"""
    try:
        _add_and_commit(obj)
        return True, "Record added successfully"
    except DatabaseError as e:
        if isinstance(e.__cause__, IntegrityError):
            message = "Database constraint violation"
        else:
            message = str(e)
        logger.warning("Run manifest write failed: %s", message)
        return False, message


def safe_update_and_commit():
    """Safely commit database changes with error handling"""
    try:
        _commit()
        return True, "Records updated successfully"
    except DatabaseError as e:
        logger.warning("Run manifest update failed: %s", e)
        return False, str(e)
