import copy
import logging
import os
import yaml

STATE_BUDGET_VARIABLE = 'PINWHEELKIT_STATE_BUDGET'

DEFAULTS = {
    'solver': {
        'state_budget': 500_000_000,
        'debug': False
    },
    'campaign': {
        'workers': 1,
        'progress_seconds': 30,
        'chunksize': 16
    },
    'window': {
        'max_states': 1_000_000
    },
    'tables': {
        'directory': None,
        'max_jobs': None,
        'workers': 1,
        'solve_on_miss': False
    },
    'output': {
        'format': 'text'
    }
}

logger = logging.getLogger(__name__)


def _merge(base, override):
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_filename=None):
    """Built-in defaults, overlaid by the YAML file and then by the environment."""
    config = copy.deepcopy(DEFAULTS)

    if config_filename is not None:
        with open(config_filename, 'r') as config_file:
            loaded = yaml.safe_load(config_file) or dict()

        if not isinstance(loaded, dict):
            raise ValueError(f"{config_filename} must contain a mapping, got {type(loaded).__name__}")

        config = _merge(config, loaded)

    budget = os.environ.get(STATE_BUDGET_VARIABLE)
    if budget:
        try:
            config['solver']['state_budget'] = int(budget)
        except ValueError:
            raise ValueError(f"{STATE_BUDGET_VARIABLE} must be an integer, got {budget!r}")

    return config
