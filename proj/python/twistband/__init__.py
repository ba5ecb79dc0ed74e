import json

from ._core import (
    QUARTER_PI_SQ,
    ConfigError,
    CountSpec,
    NotCritical,
    config_hash,
    convergence_table,
    count_bound_states,
    bound_state_energies,
    critical_length_on_grid,
    discrete_threshold,
    find_critical_length,
    fit_rate,
    green_kernel,
    transverse_energy,
    virtual_level,
)
from . import _core


def parse_config(text):
    return json.loads(_core.parse_config(text))


def run(config):
    if not isinstance(config, str):
        config = json.dumps(config)
    ok, summary = _core.run(config)
    return ok, json.loads(summary)


__all__ = [
    "QUARTER_PI_SQ",
    "ConfigError",
    "CountSpec",
    "NotCritical",
    "bound_state_energies",
    "config_hash",
    "convergence_table",
    "count_bound_states",
    "critical_length_on_grid",
    "discrete_threshold",
    "find_critical_length",
    "fit_rate",
    "green_kernel",
    "parse_config",
    "run",
    "transverse_energy",
    "virtual_level",
]
