"""
Planner settings - environment configuration and logging setup
Every tunable is read once from the environment (.env supported)
"""

import logging
import os
from logging.handlers import RotatingFileHandler
from typing import Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Configuration
LOG_DIR = os.environ.get('PLANNER_LOG_DIR', 'logs')
LOG_LEVEL = os.environ.get('PLANNER_LOG_LEVEL', 'INFO')
LOG_MAX_BYTES = int(os.environ.get('PLANNER_LOG_MAX_BYTES', 10 * 1024 * 1024))  # 10MB
LOG_BACKUPS = int(os.environ.get('PLANNER_LOG_BACKUPS', 5))
OUTPUT_DIR = os.environ.get('PLANNER_OUTPUT_DIR', 'output')
DEFAULT_BUDGET_MS = int(os.environ.get('PLANNER_BUDGET_MS', 1000))
DEFAULT_JOBS = int(os.environ.get('PLANNER_JOBS', 1))
DEFAULT_MASTER_SEED = int(os.environ.get('PLANNER_MASTER_SEED', 1))

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
ERROR_LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'


def setup_logging(name: str = 'planner', log_dir: Optional[str] = None,
                  level: Optional[str] = None, console: bool = True) -> logging.Logger:
    """Setup rotating file logging plus an error log and optional console output"""
    log_dir = log_dir or LOG_DIR
    level = (level or LOG_LEVEL).upper()

    # Ensure log directory exists
    os.makedirs(log_dir, exist_ok=True)

    # Handlers attach to the root logger so module loggers propagate into them
    logger = logging.getLogger()
    logger.setLevel(getattr(logging, level, logging.INFO))

    if any(getattr(h, '_planner_handler', False) for h in logger.handlers):
        return logging.getLogger(name)

    # File handler with rotation
    file_handler = RotatingFileHandler(
        os.path.join(log_dir, f'{name}.log'),
        maxBytes=LOG_MAX_BYTES,
        backupCount=LOG_BACKUPS
    )
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    file_handler._planner_handler = True
    logger.addHandler(file_handler)

    # Error handler
    error_handler = RotatingFileHandler(
        os.path.join(log_dir, f'{name}_error.log'),
        maxBytes=LOG_MAX_BYTES,
        backupCount=LOG_BACKUPS
    )
    error_handler.setLevel(logging.ERROR)
    error_handler.setFormatter(logging.Formatter(ERROR_LOG_FORMAT))
    error_handler._planner_handler = True
    logger.addHandler(error_handler)

    # Also log to console
    if console:
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        console_handler._planner_handler = True
        logger.addHandler(console_handler)

    return logging.getLogger(name)
