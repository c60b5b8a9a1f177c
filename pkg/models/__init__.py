from models.golden import GoldenValue
from models.run_record import RunRecord

__all__ = ['GoldenValue', 'RunRecord']
