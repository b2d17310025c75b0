"""Censored-data log-likelihood for both parameterizations.

Under the sojourn form a subject contributes ``log p + log f`` per observed
transition plus the log of the mixture holding survival at the censored tail.
Under the intensity form the same contribution decouples over transitions:
every epoch spent in state i yields, for each possible target j, either an
event term (intensity at the sojourn, when j was entered) or a pure survival
term.  ``decouple`` materializes those per-target records so each transition
can be treated as an independent two-state censored survival problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .convert import as_intensity_surface
from .errors import (
    ImpossiblePathError,
    ModelError,
    SingularLikelihoodError,
)
from .model import SojournModelI, TransitionLaw, log_holding_survival_i

__all__ = [
    "SubjectHistory",
    "TransitionRecord",
    "Dataset",
    "subject_loglik_i",
    "subject_loglik_ii",
    "decouple",
    "transition_loglik",
    "total_loglik",
    "total_loglik_decoupled",
    "records_arrays",
]


@dataclass(frozen=True, eq=False)
class SubjectHistory:
    """One subject: visited states, sojourn times, and the censoring tail.

    ``censored`` holds the residual time U observed in the last state when the
    subject was right-censored, and is None when the subject ended in an
    absorbing state (delta = 1).
    """

    subject_id: str
    initial_state: int
    states: Tuple[int, ...]
    sojourns: np.ndarray
    censored: Optional[float]
    covariates: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        sojourns = np.asarray(self.sojourns, dtype=float).ravel()
        sojourns.setflags(write=False)
        object.__setattr__(self, "sojourns", sojourns)
        z = np.asarray(self.covariates, dtype=float).ravel()
        z.setflags(write=False)
        object.__setattr__(self, "covariates", z)
        if len(self.states) != sojourns.size:
            raise ModelError(
                f"subject {self.subject_id!r}: {len(self.states)} transitions but "
                f"{sojourns.size} sojourn times"
            )
        if np.any(sojourns <= 0) or not np.all(np.isfinite(sojourns)):
            raise ModelError(
                f"subject {self.subject_id!r}: sojourn times must be strictly positive"
            )
        path = self.path
        if any(path[k] == path[k + 1] for k in range(len(path) - 1)):
            raise ModelError(
                f"subject {self.subject_id!r}: consecutive states must differ"
            )
        if self.censored is not None:
            u = float(self.censored)
            if not (u >= 0.0 and math.isfinite(u)):
                raise ModelError(
                    f"subject {self.subject_id!r}: censored tail must be a "
                    f"nonnegative finite time"
                )
            object.__setattr__(self, "censored", u)
        if not np.all(np.isfinite(z)):
            raise ModelError(f"subject {self.subject_id!r}: covariates must be finite")

    @property
    def path(self) -> Tuple[int, ...]:
        return (int(self.initial_state),) + self.states

    @property
    def delta(self) -> int:
        return 0 if self.censored is not None else 1

    @property
    def final_state(self) -> int:
        return self.path[-1]

    @property
    def n_transitions(self) -> int:
        return len(self.states)


@dataclass(frozen=True, eq=False)
class TransitionRecord:
    """One epoch viewed against a single target: event or censored duration."""

    from_state: int
    to_state: Optional[int]  # None: epoch ended without entering the target
    duration: float
    covariates: np.ndarray

    def __post_init__(self):
        if not self.duration > 0:
            raise ModelError("record durations must be strictly positive")

    @property
    def event(self) -> bool:
        return self.to_state is not None


@dataclass(eq=False)
class Dataset:
    """Independent subjects sharing one covariate layout."""

    subjects: List[SubjectHistory]
    covariate_names: Tuple[str, ...] = ()

    def __post_init__(self):
        self.subjects = list(self.subjects)
        self.covariate_names = tuple(self.covariate_names)
        dim = len(self.covariate_names)
        for h in self.subjects:
            if h.covariates.size != dim:
                raise ModelError(
                    f"subject {h.subject_id!r} has {h.covariates.size} covariates, "
                    f"dataset declares {dim}"
                )

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    def observed_keys(self):
        keys = set()
        for h in self.subjects:
            path = h.path
            keys.update((path[k], path[k + 1]) for k in range(h.n_transitions))
        return sorted(keys)


def _check_terminal(h: SubjectHistory, space):
    final = h.final_state
    if h.delta == 1 and not space.is_absorbing(final):
        raise ModelError(
            f"subject {h.subject_id!r} ends uncensored in non-absorbing state "
            f"{space.label(final)!r}"
        )
    if h.delta == 0 and space.is_absorbing(final):
        raise ModelError(
            f"subject {h.subject_id!r} is censored inside absorbing state "
            f"{space.label(final)!r}"
        )


def subject_loglik_i(model: SojournModelI, h: SubjectHistory) -> float:
    """Log-likelihood contribution of one subject under the sojourn form."""
    _check_terminal(h, model.space)
    path = h.path
    z = h.covariates
    terms = []
    for k in range(h.n_transitions):
        key = (path[k], path[k + 1])
        if key not in model.laws:
            raise ImpossiblePathError(
                f"subject {h.subject_id!r}, step {k + 1}: transition "
                f"{model.space.label(key[0])}->{model.space.label(key[1])} has "
                f"probability zero under the model",
                subject_id=h.subject_id,
                step=k + 1,
            )
        tau = float(h.sojourns[k])
        contrib = math.log(model.chain.p(*key)) + float(
            model.laws[key].log_density(z, tau)
        )
        if not math.isfinite(contrib):
            raise SingularLikelihoodError(
                f"subject {h.subject_id!r}, step {k + 1}: sojourn density is "
                f"singular at duration {tau}"
            )
        terms.append(contrib)
    if h.delta == 0 and h.censored > 0.0:
        terms.append(float(log_holding_survival_i(model, h.final_state, z, h.censored)))
    return math.fsum(terms)


def subject_loglik_ii(model, h: SubjectHistory) -> float:
    """Log-likelihood contribution of one subject under the intensity form.

    ``model`` may be a parametric :class:`IntensityModelII` or any intensity
    surface (e.g. the conversion of a sojourn model).
    """
    surface = as_intensity_surface(model)
    _check_terminal(h, surface.space)
    path = h.path
    z = h.covariates
    terms = []
    for k in range(h.n_transitions):
        i, j = path[k], path[k + 1]
        if j not in surface.targets(i):
            raise ImpossiblePathError(
                f"subject {h.subject_id!r}, step {k + 1}: transition "
                f"{surface.space.label(i)}->{surface.space.label(j)} is not in the model",
                subject_id=h.subject_id,
                step=k + 1,
            )
        tau = float(h.sojourns[k])
        contrib = float(surface.log_intensity(i, j, z, tau)) - float(
            surface.total_cumulative(i, z, tau)
        )
        if not math.isfinite(contrib):
            raise SingularLikelihoodError(
                f"subject {h.subject_id!r}, step {k + 1}: intensity is singular "
                f"at duration {tau}"
            )
        terms.append(contrib)
    if h.delta == 0 and h.censored > 0.0:
        terms.append(-float(surface.total_cumulative(h.final_state, z, h.censored)))
    return math.fsum(terms)


def decouple(dataset: Dataset, i: int, j: int) -> List[TransitionRecord]:
    """Two-state records for transition i -> j across the whole dataset.

    Every epoch spent in state i contributes one record: an event when the
    epoch ended by entering j, censored otherwise (including censored tails
    with positive residual time).
    """
    i, j = int(i), int(j)
    records = []
    for h in dataset.subjects:
        path = h.path
        for k in range(h.n_transitions):
            if path[k] == i:
                records.append(
                    TransitionRecord(
                        from_state=i,
                        to_state=j if path[k + 1] == j else None,
                        duration=float(h.sojourns[k]),
                        covariates=h.covariates,
                    )
                )
        if h.delta == 0 and h.final_state == i and h.censored > 0.0:
            records.append(
                TransitionRecord(
                    from_state=i,
                    to_state=None,
                    duration=h.censored,
                    covariates=h.covariates,
                )
            )
    return records


def records_arrays(records: Sequence[TransitionRecord]):
    """Vectorized view of records: durations, event flags, covariate matrix."""
    n = len(records)
    durations = np.array([r.duration for r in records], dtype=float)
    events = np.array([r.event for r in records], dtype=bool)
    dim = records[0].covariates.size if n else 0
    z = np.zeros((n, dim))
    for row, r in enumerate(records):
        z[row] = r.covariates
    return durations, events, z


def transition_loglik(law: TransitionLaw, records: Sequence[TransitionRecord]) -> float:
    """Right-censored survival log-likelihood of one transition's records."""
    if not records:
        return 0.0
    durations, events, z = records_arrays(records)
    if law.mask:
        lp = z[:, list(law.mask)] @ law.beta
    else:
        lp = np.zeros(len(records))
    log_haz = law.family.log_hazard(law.params, durations) + lp
    cum = law.family.cumulative_hazard(law.params, durations) * np.exp(lp)
    if np.any(~np.isfinite(log_haz[events])):
        raise SingularLikelihoodError(
            "event at a duration where the intensity is singular"
        )
    return float(np.sum(log_haz[events]) - np.sum(cum))


def total_loglik(model, dataset: Dataset, approach: Optional[str] = None) -> float:
    """Dataset log-likelihood; the parameterization is taken from the model
    unless forced via ``approach`` ("I" or "II")."""
    if approach is None:
        approach = "I" if isinstance(model, SojournModelI) else "II"
    approach = str(approach).upper()
    if approach == "I":
        return math.fsum(subject_loglik_i(model, h) for h in dataset.subjects)
    if approach == "II":
        surface = as_intensity_surface(model)
        return math.fsum(subject_loglik_ii(surface, h) for h in dataset.subjects)
    raise ModelError(f"unknown approach {approach!r}; expected 'I' or 'II'")


def total_loglik_decoupled(model, dataset: Dataset) -> float:
    """Intensity-form dataset log-likelihood summed transition by transition.

    Algebraically identical to :func:`total_loglik` on the same model; kept
    separate because it is the quantity per-transition fitting maximizes.
    """
    from .model import IntensityModelII

    if not isinstance(model, IntensityModelII):
        raise ModelError("decoupled evaluation needs a parametric intensity model")
    return math.fsum(
        transition_loglik(law, decouple(dataset, i, j))
        for (i, j), law in sorted(model.laws.items())
    )
