'''
YAML configuration loading
'''

import logging
import os
from typing import Dict

import yaml

logger = logging.getLogger(__name__)


def load_yaml(path: str) -> Dict:
    '''Load a YAML mapping; a missing file yields an empty dict'''
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        logger.warning(f"Config file not found: {path}")
        return {}
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"Config file {path} must hold a mapping, got {type(data).__name__}")
    return data


def project_path(*parts: str) -> str:
    '''Path relative to the repository root'''
    root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..'))
    return os.path.join(root, *parts)
