"""
Run manifest model for the FairRec marketing-bias lab
ExperimentRun records every command invocation; it is the only place timestamps live
"""

from datetime import datetime, timezone

from database import db


def _utcnow():
    return datetime.now(timezone.utc).replace(tzinfo=None)


class ExperimentRun(db.Model):
    """One invocation of an analysis/training/evaluation command"""
    __tablename__ = 'experiment_run'

    id = db.Column(db.Integer, primary_key=True)
    command = db.Column(db.String(20), nullable=False, index=True)
    model_name = db.Column(db.String(60), nullable=True)
    dataset_name = db.Column(db.String(120), nullable=True)
    config_hash = db.Column(db.String(32), nullable=True)
    seed = db.Column(db.Integer, nullable=True)
    status = db.Column(db.String(20), nullable=False, default='started')
    exit_code = db.Column(db.Integer, nullable=True)
    output_path = db.Column(db.String(500), nullable=True)
    message = db.Column(db.Text, nullable=True)
    created_at = db.Column(db.DateTime, default=_utcnow)
    finished_at = db.Column(db.DateTime, nullable=True)

    def finish(self, exit_code, message=None):
        """Mark the run as finished with an exit code"""
        self.exit_code = exit_code
        self.status = 'succeeded' if exit_code == 0 else 'failed'
        self.message = message
        self.finished_at = _utcnow()

    @staticmethod
    def recent(limit=20):
        """Most recent runs first"""
        return ExperimentRun.query.order_by(ExperimentRun.id.desc()).limit(limit).all()

    def to_dict(self):
        """Convert run to dictionary"""
        return {
            'id': self.id,
            'command': self.command,
            'model_name': self.model_name,
            'dataset_name': self.dataset_name,
            'config_hash': self.config_hash,
            'seed': self.seed,
            'status': self.status,
            'exit_code': self.exit_code,
            'output_path': self.output_path,
            'message': self.message,
            'created_at': self.created_at.isoformat() if self.created_at else None,
            'finished_at': self.finished_at.isoformat() if self.finished_at else None,
        }

    def __repr__(self):
        return f'<ExperimentRun {self.id} {self.command}: {self.status}>'
