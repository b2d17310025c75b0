"""Parametric semi-Markov multi-state survival modeling.

Two equivalent parameterizations of a semi-Markov process are supported and
interconvertible: the sojourn-time form (embedded transition matrix plus
per-transition sojourn distributions, "approach I") and the
intensity-transition form (per-transition cause-specific hazards,
"approach II").  The package provides censored-data maximum likelihood for
both, trajectory simulation, and Nelson-Aalen benchmarking, with a CLI on
top.
"""

from .errors import (
    ComparisonError,
    DataError,
    DefectiveDistributionError,
    DomainError,
    ImpossiblePathError,
    ModelError,
    NumericsError,
    ParameterError,
    QuadratureError,
    SemiMarkovError,
    SimulationError,
)
from .families import FAMILIES, get_family

__version__ = "0.1.0"
