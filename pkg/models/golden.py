from app import db
from datetime import datetime


class GoldenValue(db.Model):
    __tablename__ = 'golden_values'
    __table_args__ = (db.UniqueConstraint('scenario', 'seed', 'name', name='uq_golden_measure'),)

    id = db.Column(db.Integer, primary_key=True)
    scenario = db.Column(db.String(100), nullable=False, index=True)
    seed = db.Column(db.Integer, nullable=False)
    name = db.Column(db.String(50), nullable=False)  # 'convergence_step', 'label_creations', ...
    value = db.Column(db.Integer, nullable=False)
    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    def to_dict(self):
        """Convert golden value to dictionary"""
        return {
            'id': self.id,
            'scenario': self.scenario,
            'seed': self.seed,
            'name': self.name,
            'value': self.value,
            'created_at': self.created_at.isoformat() if self.created_at else None
        }

    def __repr__(self):
        return f'<GoldenValue {self.scenario}#{self.seed} {self.name}={self.value}>'
