"""
Application configuration
"""
import os
from dotenv import load_dotenv

load_dotenv()


def _env_int(name, default):
    return int(os.environ.get(name, default))


class Config:
    """Base configuration"""
    LOG_LEVEL = os.environ.get('RECONF_LOG_LEVEL', 'WARNING')
    SQLALCHEMY_DATABASE_URI = os.environ.get('DATABASE_URL', 'sqlite:///reconf_runs.db')
    SQLALCHEMY_TRACK_MODIFICATIONS = False
    SQLALCHEMY_ECHO = False

    # Failure detector
    GAP_FACTOR = float(os.environ.get('RECONF_GAP_FACTOR', 4))

    # Channels and scheduling
    DEFAULT_CAP = _env_int('RECONF_CAP', 2)
    DEFAULT_FAIRNESS_WINDOW = _env_int('RECONF_FAIRNESS_WINDOW', 200)
    DEFAULT_STEP_BUDGET = _env_int('RECONF_STEP_BUDGET', 10000)
    TIMER_PROBABILITY = float(os.environ.get('RECONF_TIMER_PROBABILITY', 0.3))

    # Counters: sequence numbers are exhausted at 2**COUNTER_BITS
    COUNTER_BITS = _env_int('RECONF_COUNTER_BITS', 64)

    # Acceptance sweeps
    ACCEPTANCE_SEEDS = _env_int('RECONF_ACCEPTANCE_SEEDS', 50)

    SCENARIO_DIR = os.environ.get(
        'RECONF_SCENARIO_DIR', os.path.join(os.path.dirname(os.path.abspath(__file__)), 'scenarios'))


class DevelopmentConfig(Config):
    """Development configuration"""
    LOG_LEVEL = os.environ.get('RECONF_LOG_LEVEL', 'INFO')
    SQLALCHEMY_DATABASE_URI = os.environ.get('DATABASE_URL', 'sqlite:///reconf_dev.db')
    COUNTER_BITS = _env_int('RECONF_COUNTER_BITS', 16)


class ReleaseConfig(Config):
    """Release configuration"""
    LOG_LEVEL = os.environ.get('RECONF_LOG_LEVEL', 'WARNING')
    COUNTER_BITS = _env_int('RECONF_COUNTER_BITS', 64)


class TestingConfig(Config):
    """Testing configuration"""
    TESTING = True
    LOG_LEVEL = 'WARNING'
    SQLALCHEMY_DATABASE_URI = 'sqlite://'
    COUNTER_BITS = 16
    ACCEPTANCE_SEEDS = _env_int('RECONF_ACCEPTANCE_SEEDS', 3)


config = {
    'development': DevelopmentConfig,
    'release': ReleaseConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}
