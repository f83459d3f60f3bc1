"""
FairRec marketing-bias lab
Main application entry point: `python app.py <verb>`
"""

import logging.config

from flask import Flask

from config import Config
from database import db, init_db


def configure_logging(level='INFO'):
    """One stderr handler for the whole process"""
    logging.config.dictConfig({
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'default': {'format': '%(asctime)s %(levelname)s %(name)s: %(message)s'},
        },
        'handlers': {
            'stderr': {
                'class': 'logging.StreamHandler',
                'stream': 'ext://sys.stderr',
                'formatter': 'default',
            },
        },
        'root': {'level': level, 'handlers': ['stderr']},
    })


def create_app(overrides=None):
    """Application factory pattern"""
    app = Flask(__name__)
    app.config.from_object(Config)
    if overrides:
        app.config.update(overrides)

    # Initialize extensions with app
    db.init_app(app)

    # Initialize database
    init_db(app)

    return app


if __name__ == '__main__':
    from commands import cli

    cli()
