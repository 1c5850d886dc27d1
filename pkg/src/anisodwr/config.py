"""Run configuration: INI-style files with strictly validated keys."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .adaptivity import AdaptConfig
from .errors import ConfigError

_SCHEMA = {
    "run": {"benchmark", "max_loops", "output_dir", "emit_vtk", "threads",
            "solver"},
    "discretization": {"epsilon", "delta0", "p", "r", "nx", "ny",
                       "n_intervals", "hemker_initial_refines"},
    "goals": {"cutoff1", "cutoff2", "weight1", "weight2", "weight_mode"},
    "adaptivity": {"theta_h", "theta_tau", "max_total_dofs", "stop_tolerance",
                   "temporal_floor"},
}

_BENCHMARKS = ("moving_hump", "hemker", "manufactured")


@dataclass
class RunConfig:
    benchmark: str = "moving_hump"
    max_loops: int = 8
    output_dir: str = "out"
    emit_vtk: bool = False
    threads: int = 0
    solver: str = "direct"
    epsilon: float = 1e-6
    delta0: float = 1.0
    p: int = 1
    r: int = 0
    nx: int = 5
    ny: int = 5
    n_intervals: int = 5
    hemker_initial_refines: int = 2
    cutoff1: float = 0.05
    cutoff2: float = 0.05
    weight1: float = 1.0
    weight2: float = 1.0
    weight_mode: str = "fixed"
    adapt: AdaptConfig = field(default_factory=AdaptConfig)

    def __post_init__(self):
        if self.benchmark not in _BENCHMARKS:
            raise ConfigError(f"unknown benchmark {self.benchmark!r}; "
                              f"choose one of {_BENCHMARKS}")
        if self.solver not in ("direct", "iterative"):
            raise ConfigError("solver must be 'direct' or 'iterative'")
        if self.weight_mode not in ("fixed", "signed"):
            raise ConfigError("weight_mode must be 'fixed' or 'signed'")
        if self.r != 0:
            raise ConfigError("benchmarks run with dG(0); set r = 0")
        if self.p < 1:
            raise ConfigError("p must be >= 1")


def load_config(path):
    """Parse and validate a config file; unknown sections/keys are rejected."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    kwargs = {}
    adapt_kwargs = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            if section == "adaptivity" and key != "max_total_dofs":
                adapt_kwargs[key] = float(value)
            elif key in ("max_loops", "threads", "p", "r", "nx", "ny",
                         "n_intervals", "hemker_initial_refines"):
                kwargs[key] = int(value)
            elif key == "max_total_dofs":
                adapt_kwargs[key] = int(value)
            elif key == "emit_vtk":
                kwargs[key] = parser.getboolean(section, key)
            elif key in ("benchmark", "output_dir", "solver", "weight_mode"):
                kwargs[key] = value.strip()
            else:
                kwargs[key] = float(value)
    try:
        adapt = AdaptConfig(**adapt_kwargs)
        cfg = RunConfig(adapt=adapt, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))
    cfg.adapt.max_loops = cfg.max_loops
    return cfg
