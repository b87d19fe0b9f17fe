'''
Logging configuration for the command-line drivers
'''

import logging
import os
from datetime import datetime
from typing import Optional

from .config import load_yaml

DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(config_path: Optional[str] = None, log_dir: str = 'logs') -> str:
    '''File handler under log_dir plus a stream handler; returns the log file path'''
    settings = load_yaml(config_path) if config_path else {}
    level = getattr(logging, str(settings.get('level', 'INFO')).upper(), logging.INFO)
    fmt = settings.get('format', DEFAULT_FORMAT)
    prefix = settings.get('file', 'experiments')

    os.makedirs(log_dir, exist_ok=True)
    log_file = os.path.join(log_dir, f'{prefix}_{datetime.now().strftime("%Y%m%d_%H%M%S")}.log')
    logging.basicConfig(
        level=level,
        format=fmt,
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler()
        ],
        force=True
    )
    return log_file
