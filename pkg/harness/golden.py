"""
Golden values: measurements blessed once per (scenario, seed) and asserted afterwards
"""
import logging

from sqlalchemy.exc import SQLAlchemyError

from harness.checkers import Verdict
from models import GoldenValue

logger = logging.getLogger(__name__)

GOLDEN_MEASURES = (
    'convergence_step',
    'label_convergence_step',
    'label_creations',
    'counter_label_creations',
    'triggers',
    'install_step',
    'coordinator_step',
)


def collect_measures(verdicts):
    """Integer measures worth blessing, first occurrence wins"""
    measures = {}
    for verdict in verdicts:
        for name, value in verdict.measures.items():
            if name in GOLDEN_MEASURES and isinstance(value, int) and not isinstance(value, bool):
                measures.setdefault(name, value)
    return measures


def bless(db, scenario, measures):
    """
    Store measures as the golden values of (scenario, seed)

    Returns:
        int: number of values written, or None when the database is unavailable
    """
    try:
        for name, value in sorted(measures.items()):
            golden = db.session.query(GoldenValue).filter_by(
                scenario=scenario.name, seed=scenario.seed, name=name).first()
            if golden:
                golden.value = value
            else:
                db.session.add(GoldenValue(scenario=scenario.name, seed=scenario.seed, name=name, value=value))
        db.session.commit()
        logger.info("blessed %s golden values for %s#%s", len(measures), scenario.name, scenario.seed)
        return len(measures)
    except SQLAlchemyError as e:
        db.session.rollback()
        logger.warning("could not bless golden values: %s", e)
        return None


def compare(db, scenario, measures):
    """Verdict comparing measures with the blessed values; passes when nothing is blessed yet"""
    try:
        stored = db.session.query(GoldenValue).filter_by(scenario=scenario.name, seed=scenario.seed).all()
    except SQLAlchemyError as e:
        db.session.rollback()
        logger.warning("golden values unavailable: %s", e)
        return Verdict('golden', True, measures={'blessed': 0, 'available': False})

    drift = {}
    for golden in stored:
        measured = measures.get(golden.name)
        if measured != golden.value:
            drift[golden.name] = {'golden': golden.value, 'measured': measured}
    if drift:
        return Verdict('golden', False, witness={'step': None, 'reason': 'golden drift', 'drift': drift},
                       measures={'blessed': len(stored)})
    return Verdict('golden', True, measures={'blessed': len(stored)})


def blessed(db, scenario):
    """Number of golden values stored for (scenario, seed); 0 when the database is unavailable"""
    try:
        return db.session.query(GoldenValue).filter_by(scenario=scenario.name, seed=scenario.seed).count()
    except SQLAlchemyError as e:
        db.session.rollback()
        logger.warning("golden values unavailable: %s", e)
        return 0
