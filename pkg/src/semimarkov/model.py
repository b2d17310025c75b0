"""Core semi-Markov model types for both parameterizations.

A model under the sojourn parameterization (:class:`SojournModelI`) couples an
embedded transition matrix with one sojourn-time law per possible transition.
Under the intensity parameterization (:class:`IntensityModelII`) each
transition carries a cause-specific intensity law and the embedded matrix is
implied.  Covariates act proportionally on every law through per-transition
coefficients over a declared subset (mask) of the dataset covariates.

All types are immutable after construction and every evaluator is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, ModelError
from .families import Family, get_family
from .quadrature import DEFAULT_QUADRATURE, integrate

__all__ = [
    "StateSpace",
    "EmbeddedChain",
    "TransitionLaw",
    "SojournModelI",
    "IntensityModelII",
    "TransitionSpec",
    "ModelSpec",
    "adjusted_hazard",
    "holding_survival_i",
    "log_holding_survival_i",
    "total_intensity",
    "total_cumulative_intensity",
    "holding_survival_ii",
    "cif",
]

ROW_SUM_TOL = 1e-10


def as_covariates(z, dim: Optional[int] = None) -> np.ndarray:
    """Coerce a covariate vector; ``None`` means the zero (baseline) vector."""
    if z is None:
        return np.zeros(dim if dim is not None else 0)
    arr = np.atleast_1d(np.asarray(z, dtype=float))
    if arr.ndim != 1:
        raise DomainError("covariate vector must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DomainError("covariate values must be finite")
    if dim is not None and arr.size != dim:
        raise DomainError(f"expected {dim} covariate(s), got {arr.size}")
    return arr


@dataclass(frozen=True)
class StateSpace:
    """State labels plus the set of absorbing state indices (0-based)."""

    labels: Tuple[str, ...]
    absorbing: frozenset

    def __init__(self, labels, absorbing=()):
        object.__setattr__(self, "labels", tuple(str(s) for s in labels))
        object.__setattr__(self, "absorbing", frozenset(int(i) for i in absorbing))
        if len(set(self.labels)) != len(self.labels):
            raise ModelError("state labels must be unique")
        if len(self.labels) < 2:
            raise ModelError("a multi-state model needs at least two states")
        for i in self.absorbing:
            if not 0 <= i < len(self.labels):
                raise ModelError(f"absorbing index {i} out of range")

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise ModelError(f"unknown state label {label!r}") from None

    def label(self, i: int) -> str:
        return self.labels[i]

    def is_absorbing(self, i: int) -> bool:
        return i in self.absorbing

    def transient(self):
        return [i for i in range(self.n_states) if i not in self.absorbing]


class EmbeddedChain:
    """Transition matrix of the embedded jump chain.

    Diagonal entries are zero; rows of non-absorbing states sum to one and
    rows of absorbing states to zero (checked on construction).
    """

    def __init__(self, probs, absorbing=None):
        probs = np.array(probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
            raise ModelError("embedded chain matrix must be square")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ModelError("embedded chain entries must be finite and nonnegative")
        if np.any(np.abs(np.diag(probs)) > 0):
            raise ModelError("embedded chain diagonal must be zero")
        sums = probs.sum(axis=1)
        derived = frozenset(int(i) for i in np.flatnonzero(sums == 0.0))
        for i, s in enumerate(sums):
            if i not in derived and abs(s - 1.0) > ROW_SUM_TOL:
                raise ModelError(
                    f"row {i} of the embedded chain sums to {s!r}, expected 1"
                )
        if absorbing is not None and frozenset(absorbing) != derived:
            raise ModelError(
                f"absorbing states declared as {sorted(absorbing)} but the chain "
                f"implies {sorted(derived)}"
            )
        probs.setflags(write=False)
        self.probs = probs
        self.absorbing = derived

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    def p(self, i: int, j: int) -> float:
        return float(self.probs[i, j])

    def row(self, i: int) -> np.ndarray:
        return self.probs[i]

    def targets(self, i: int):
        return [int(j) for j in np.flatnonzero(self.probs[i] > 0.0)]

    def __eq__(self, other):
        return isinstance(other, EmbeddedChain) and np.array_equal(
            self.probs, other.probs
        )

    def __repr__(self):
        return f"EmbeddedChain({self.probs.tolist()})"


@dataclass(frozen=True, eq=False)
class TransitionLaw:
    """A parametric law for one transition with proportional covariate effects.

    ``beta[k]`` multiplies covariate ``mask[k]`` of the dataset covariate
    vector on the log-hazard scale.
    """

    family: Family
    params: np.ndarray
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mask: Tuple[int, ...] = ()

    def __post_init__(self):
        family = get_family(self.family)
        object.__setattr__(self, "family", family)
        params = family.check_params(self.params)
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        beta = np.asarray(self.beta, dtype=float).ravel()
        if not np.all(np.isfinite(beta)):
            raise ModelError("regression coefficients must be finite")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        mask = tuple(int(m) for m in self.mask)
        if len(mask) != beta.size:
            raise ModelError(
                f"covariate mask has {len(mask)} entries but beta has {beta.size}"
            )
        if any(m < 0 for m in mask):
            raise ModelError("covariate mask indices must be nonnegative")
        object.__setattr__(self, "mask", mask)

    def linear_predictor(self, z) -> float:
        if self.beta.size == 0:
            return 0.0
        z = as_covariates(z)
        if max(self.mask) >= z.size:
            raise DomainError(
                f"law references covariate index {max(self.mask)} but only "
                f"{z.size} covariate(s) were supplied"
            )
        return float(self.beta @ z[list(self.mask)])

    def log_hazard(self, z, t):
        return self.family.log_hazard(self.params, t) + self.linear_predictor(z)

    def hazard(self, z, t):
        return self.family.hazard(self.params, t) * np.exp(self.linear_predictor(z))

    def cumulative_hazard(self, z, t):
        return self.family.cumulative_hazard(self.params, t) * np.exp(
            self.linear_predictor(z)
        )

    def log_survival(self, z, t):
        return -self.cumulative_hazard(z, t)

    def survival(self, z, t):
        return np.exp(-self.cumulative_hazard(z, t))

    def log_density(self, z, t):
        return self.log_hazard(z, t) - self.cumulative_hazard(z, t)

    def density(self, z, t):
        return np.exp(self.log_density(z, t))


def _check_laws(space: StateSpace, laws: Mapping) -> Dict[Tuple[int, int], TransitionLaw]:
    checked = {}
    for key, law in laws.items():
        i, j = (int(key[0]), int(key[1]))
        if not (0 <= i < space.n_states and 0 <= j < space.n_states):
            raise ModelError(f"transition {key} out of range")
        if i == j:
            raise ModelError(f"self-transition {key} is not allowed")
        if space.is_absorbing(i):
            raise ModelError(
                f"state {space.label(i)!r} is declared absorbing but has an outgoing law"
            )
        if not isinstance(law, TransitionLaw):
            raise ModelError(f"law for {key} must be a TransitionLaw")
        checked[(i, j)] = law
    return checked


@dataclass(frozen=True, eq=False)
class SojournModelI:
    """Sojourn-time parameterization: embedded chain + per-transition sojourn laws."""

    space: StateSpace
    chain: EmbeddedChain
    laws: Mapping[Tuple[int, int], TransitionLaw]

    def __post_init__(self):
        if self.chain.n_states != self.space.n_states:
            raise ModelError("embedded chain size does not match the state space")
        if self.chain.absorbing != self.space.absorbing:
            raise ModelError(
                f"absorbing states {sorted(self.space.absorbing)} contradict the "
                f"chain, which implies {sorted(self.chain.absorbing)}"
            )
        laws = _check_laws(self.space, self.laws)
        expected = {
            (i, j)
            for i in range(self.space.n_states)
            for j in self.chain.targets(i)
        }
        if set(laws) != expected:
            raise ModelError(
                f"sojourn laws must exist exactly for transitions with positive "
                f"probability; expected {sorted(expected)}, got {sorted(laws)}"
            )
        object.__setattr__(self, "laws", laws)

    def targets(self, i: int):
        return self.chain.targets(i)


@dataclass(frozen=True, eq=False)
class IntensityModelII:
    """Intensity-transition parameterization: cause-specific intensity laws only."""

    space: StateSpace
    laws: Mapping[Tuple[int, int], TransitionLaw]

    def __post_init__(self):
        laws = _check_laws(self.space, self.laws)
        with_exit = {i for i, _ in laws}
        for i in range(self.space.n_states):
            if not self.space.is_absorbing(i) and i not in with_exit:
                raise ModelError(
                    f"non-absorbing state {self.space.label(i)!r} has no outgoing law"
                )
        object.__setattr__(self, "laws", laws)

    def targets(self, i: int):
        return sorted(j for (a, j) in self.laws if a == i)


# ---------------------------------------------------------------------------
# Derived quantities


def adjusted_hazard(law: TransitionLaw, z, t):
    """Baseline hazard scaled by exp(beta . z) at the law's covariate mask."""
    return law.hazard(z, t)


def log_holding_survival_i(model: SojournModelI, i: int, z, t):
    """log of the holding-time survival in state i: log sum_j p_ij * S_ij(t|z)."""
    if model.space.is_absorbing(i):
        raise DomainError(
            f"state {model.space.label(i)!r} is absorbing; its holding time is not defined"
        )
    targets = model.targets(i)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    terms = np.stack(
        [
            np.log(model.chain.p(i, j))
            + np.broadcast_to(model.laws[(i, j)].log_survival(z, t_arr), t_arr.shape)
            for j in targets
        ]
    )
    # A survival mixture cannot exceed 1; clip the rounding of logsumexp and
    # pin the exact t = 0 value.
    out = np.where(t_arr == 0.0, 0.0, np.minimum(logsumexp(terms, axis=0), 0.0))
    return float(out[0]) if np.ndim(t) == 0 else out


def holding_survival_i(model: SojournModelI, i: int, z, t):
    return np.exp(log_holding_survival_i(model, i, z, t))


def total_intensity(model: IntensityModelII, i: int, z, t):
    """Sum of adjusted intensities out of state i; zero for absorbing states."""
    if model.space.is_absorbing(i):
        return 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
    total = 0.0
    for j in model.targets(i):
        total = total + model.laws[(i, j)].hazard(z, t)
    return total


def total_cumulative_intensity(model: IntensityModelII, i: int, z, t):
    if model.space.is_absorbing(i):
        return 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
    total = 0.0
    for j in model.targets(i):
        total = total + model.laws[(i, j)].cumulative_hazard(z, t)
    return total


def holding_survival_ii(model: IntensityModelII, i: int, z, t):
    """Holding-time survival from the intensity side: exp of minus the total
    cumulative intensity."""
    return np.exp(-total_cumulative_intensity(model, i, z, t))


def cif(model: IntensityModelII, i: int, j: int, z, t, spec=DEFAULT_QUADRATURE):
    """Cumulative incidence of the i -> j transition by time t (t may be inf).

    Integrates S_i(u) * intensity_ij(u) over [0, t] with the adaptive engine.
    """
    if (i, j) not in model.laws:
        raise ModelError(
            f"transition {model.space.label(i)}->{model.space.label(j)} is not in the model"
        )
    t = float(t)
    if t < 0:
        raise DomainError("time must be nonnegative")
    if t == 0.0:
        return 0.0
    law = model.laws[(i, j)]

    def integrand(u):
        return float(
            np.exp(
                law.log_hazard(z, u) - total_cumulative_intensity(model, i, z, u)
            )
        )

    value, _ = integrate(integrand, 0.0, t, spec)
    return value


# ---------------------------------------------------------------------------
# Model specification (fitting input / file round-trip)


@dataclass
class TransitionSpec:
    """Declared structure of one transition: family, covariate mask, optional values."""

    family: Family
    mask: Tuple[int, ...] = ()
    params: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None

    def __post_init__(self):
        self.family = get_family(self.family)
        self.mask = tuple(int(m) for m in self.mask)
        if self.params is not None:
            self.params = self.family.check_params(self.params)
        if self.beta is not None:
            self.beta = np.asarray(self.beta, dtype=float).ravel()
            if self.beta.size != len(self.mask):
                raise ModelError("beta length must match the covariate mask")

    def law(self) -> TransitionLaw:
        if self.params is None:
            raise ModelError("transition has no parameter values; fit or supply them")
        beta = self.beta if self.beta is not None else np.zeros(len(self.mask))
        return TransitionLaw(self.family, self.params, beta, self.mask)


@dataclass
class ModelSpec:
    """A full model description: structure always, parameter values optionally.

    ``tied_states`` lists states whose outgoing transitions share a single
    sojourn law (target-independent sojourn times) when fitting under the
    sojourn parameterization.
    """

    space: StateSpace
    covariate_names: Tuple[str, ...]
    transitions: Dict[Tuple[int, int], TransitionSpec]
    chain: Optional[EmbeddedChain] = None
    tied_states: frozenset = frozenset()

    def __post_init__(self):
        self.covariate_names = tuple(self.covariate_names)
        self.tied_states = frozenset(int(i) for i in self.tied_states)
        keys = {}
        for key, ts in self.transitions.items():
            i, j = int(key[0]), int(key[1])
            if i == j or not (
                0 <= i < self.space.n_states and 0 <= j < self.space.n_states
            ):
                raise ModelError(f"invalid transition key {key}")
            if self.space.is_absorbing(i):
                raise ModelError(
                    f"absorbing state {self.space.label(i)!r} cannot have transitions"
                )
            for m in ts.mask:
                if m >= len(self.covariate_names):
                    raise ModelError(
                        f"transition {key} references covariate index {m} but only "
                        f"{len(self.covariate_names)} are declared"
                    )
            keys[(i, j)] = ts
        self.transitions = keys
        for i in range(self.space.n_states):
            if not self.space.is_absorbing(i) and not any(
                a == i for a, _ in self.transitions
            ):
                raise ModelError(
                    f"non-absorbing state {self.space.label(i)!r} has no transitions"
                )
        for i in self.tied_states:
            specs = [ts for (a, _), ts in self.transitions.items() if a == i]
            if len({ts.family.name for ts in specs}) > 1 or len(
                {ts.mask for ts in specs}
            ) > 1:
                raise ModelError(
                    f"tied state {self.space.label(i)!r} requires a common family "
                    f"and covariate mask on all outgoing transitions"
                )
        if self.chain is not None:
            self._check_chain(self.chain)

    def _check_chain(self, chain: EmbeddedChain):
        if chain.n_states != self.space.n_states:
            raise ModelError("chain size does not match the state space")
        if chain.absorbing != self.space.absorbing:
            raise ModelError("chain absorbing rows contradict the declared states")
        if {
            (i, j) for i in range(chain.n_states) for j in chain.targets(i)
        } != set(self.transitions):
            raise ModelError(
                "chain support must match the declared transitions exactly"
            )

    def targets(self, i: int):
        return sorted(j for (a, j) in self.transitions if a == i)

    def build_sojourn_model(self) -> SojournModelI:
        if self.chain is None:
            raise ModelError("a sojourn model needs the embedded chain matrix")
        laws = {key: ts.law() for key, ts in self.transitions.items()}
        return SojournModelI(self.space, self.chain, laws)

    def build_intensity_model(self) -> IntensityModelII:
        laws = {key: ts.law() for key, ts in self.transitions.items()}
        return IntensityModelII(self.space, laws)
