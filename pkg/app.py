"""
Application factory: configuration profile, logging and the run database
"""
import logging
import os

from flask import Flask
from flask_sqlalchemy import SQLAlchemy
from sqlalchemy.exc import SQLAlchemyError

from utils.helpers import ConfigurationError

logger = logging.getLogger(__name__)

# Initialize extensions
db = SQLAlchemy()


def create_app(config_name=None, test_config=None):
    from config import config

    config_name = config_name or os.environ.get('RECONF_ENV', 'default')
    if config_name not in config:
        raise ConfigurationError(f"unknown configuration profile '{config_name}'")

    app = Flask(__name__)
    app.config.from_object(config[config_name])
    app.config['PROFILE'] = config_name
    if test_config:
        app.config.from_mapping(test_config)

    logging.basicConfig(
        level=app.config['LOG_LEVEL'],
        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    logging.getLogger().setLevel(app.config['LOG_LEVEL'])

    db.init_app(app)
    with app.app_context():
        import models  # noqa: F401  registers the tables
        try:
            db.create_all()
            logger.info("Run database ready at %s", app.config['SQLALCHEMY_DATABASE_URI'])
        except SQLAlchemyError as e:
            print(f"❌ Database error: {str(e)}")
            # Runs still work without history or golden values

    return app
