from app import db
from datetime import datetime
import json


class RunRecord(db.Model):
    __tablename__ = 'run_records'

    id = db.Column(db.Integer, primary_key=True)
    scenario = db.Column(db.String(100), nullable=False, index=True)
    seed = db.Column(db.Integer, nullable=False)
    passed = db.Column(db.Boolean, nullable=False)
    steps = db.Column(db.Integer, nullable=False)
    trace_digest = db.Column(db.String(64), nullable=False)
    verdicts = db.Column(db.Text)  # JSON object: checker name -> 'pass' | 'fail'
    created_at = db.Column(db.DateTime, default=datetime.utcnow, index=True)

    def to_dict(self):
        """Convert run record to dictionary"""
        return {
            'id': self.id,
            'scenario': self.scenario,
            'seed': self.seed,
            'passed': self.passed,
            'steps': self.steps,
            'trace_digest': self.trace_digest,
            'verdicts': json.loads(self.verdicts) if self.verdicts else {},
            'created_at': self.created_at.isoformat() if self.created_at else None
        }

    def __repr__(self):
        return f'<RunRecord {self.scenario}#{self.seed} {"pass" if self.passed else "fail"}>'
