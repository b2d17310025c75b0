"""Conversion between the sojourn and intensity parameterizations.

The sojourn form converts to intensities exactly:

    intensity_ij(t) = p_ij * f_ij(t) / S_i(t),

where S_i is the mixture holding-time survival.  The result is generally not
a named family, so it is exposed as an evaluator (:class:`ConvertedIntensity`)
rather than force-fitted.  The reverse direction integrates

    p_ij = integral_0^inf intensity_ij(t) * exp(-total_cumulative_i(t)) dt

with the adaptive engine, using closed forms when every exit law is
exponential or when all exits share a Weibull shape.
"""

from __future__ import annotations

import warnings
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import DefectiveDistributionError, DomainError, ModelError, NumericsError
from .model import (
    EmbeddedChain,
    IntensityModelII,
    SojournModelI,
    StateSpace,
    log_holding_survival_i,
    total_cumulative_intensity,
)
from .quadrature import DEFAULT_QUADRATURE, QuadratureSpec, integrate

__all__ = [
    "IntensitySurface",
    "ParametricIntensity",
    "ConvertedIntensity",
    "as_intensity_surface",
    "i_to_ii",
    "ii_to_i_probs",
    "ii_to_i_density",
    "TransitionDistribution",
    "ctmc_to_generator",
    "generator_to_ctmc",
    "weibull_closure",
    "integrate",
    "QuadratureSpec",
    "DEFAULT_QUADRATURE",
]

# Row sums this far from 1 are treated as quadrature noise and renormalized;
# anything worse is reported as a genuinely defective exit distribution.
DEFECT_TOL = 1e-4


class IntensitySurface:
    """Minimal interface shared by parametric and converted intensity models."""

    space: StateSpace

    def targets(self, i: int):
        raise NotImplementedError

    def log_intensity(self, i: int, j: int, z, t):
        raise NotImplementedError

    def intensity(self, i: int, j: int, z, t):
        return np.exp(self.log_intensity(i, j, z, t))

    def total_cumulative(self, i: int, z, t):
        """Integral of the summed exit intensities over [0, t]."""
        raise NotImplementedError


class ParametricIntensity(IntensitySurface):
    """Adapter exposing an :class:`IntensityModelII` through the surface API."""

    def __init__(self, model: IntensityModelII):
        self.model = model
        self.space = model.space

    def targets(self, i):
        return self.model.targets(i)

    def log_intensity(self, i, j, z, t):
        return self.model.laws[(i, j)].log_hazard(z, t)

    def total_cumulative(self, i, z, t):
        return total_cumulative_intensity(self.model, i, z, t)


class ConvertedIntensity(IntensitySurface):
    """Intensity evaluator implied by a sojourn-parameterized model.

    All evaluation is in log space, so the mixture denominator never
    underflows at finite times; it is exactly zero only where the holding
    survival is identically zero, which is reported as an error.
    """

    def __init__(self, model: SojournModelI):
        self.model = model
        self.space = model.space

    def targets(self, i):
        return self.model.targets(i)

    def log_intensity(self, i, j, z, t):
        if (i, j) not in self.model.laws:
            raise ModelError(
                f"transition {self.space.label(i)}->{self.space.label(j)} has zero probability"
            )
        log_s_i = log_holding_survival_i(self.model, i, z, t)
        if np.any(np.isneginf(log_s_i)):
            raise NumericsError(
                f"holding survival of state {self.space.label(i)!r} is exactly zero "
                f"in the requested tail; the intensity is undefined there"
            )
        law = self.model.laws[(i, j)]
        return np.log(self.model.chain.p(i, j)) + law.log_density(z, t) - log_s_i

    def total_cumulative(self, i, z, t):
        return -log_holding_survival_i(self.model, i, z, t)


def as_intensity_surface(model) -> IntensitySurface:
    if isinstance(model, IntensitySurface):
        return model
    if isinstance(model, IntensityModelII):
        return ParametricIntensity(model)
    if isinstance(model, SojournModelI):
        return ConvertedIntensity(model)
    raise ModelError(f"cannot interpret {type(model).__name__} as an intensity model")


def i_to_ii(model: SojournModelI) -> ConvertedIntensity:
    """Intensity evaluator of a sojourn-parameterized model."""
    return ConvertedIntensity(model)


def _exit_laws_closed_form(model: IntensityModelII, i, z):
    """Closed-form exit probabilities for all-exponential or common-shape
    Weibull exits, or None when neither applies."""
    targets = model.targets(i)
    laws = [model.laws[(i, j)] for j in targets]
    rr = [np.exp(law.linear_predictor(z)) for law in laws]
    names = {law.family.name for law in laws}
    if names == {"exponential"}:
        rates = np.array([law.params[0] * r for law, r in zip(laws, rr)])
        return targets, rates / rates.sum()
    if names == {"weibull"}:
        shapes = {float(law.params[0]) for law in laws}
        if len(shapes) == 1:
            shape = shapes.pop()
            weights = np.array(
                [law.params[1] ** -shape * r for law, r in zip(laws, rr)]
            )
            return targets, weights / weights.sum()
    return None


def ii_to_i_probs(
    model,
    z=None,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    with_report: bool = False,
):
    """Embedded-chain matrix implied by an intensity model at covariates z.

    Uses closed forms where available, adaptive quadrature otherwise.  Rows
    within ``DEFECT_TOL`` of one are renormalized with a warning; rows further
    away raise :class:`DefectiveDistributionError` naming the state.
    """
    surface = as_intensity_surface(model)
    space = surface.space
    probs = np.zeros((space.n_states, space.n_states))
    report: Dict[Tuple[int, int], float] = {}
    row_sums: Dict[int, float] = {}
    for i in range(space.n_states):
        if space.is_absorbing(i):
            continue
        closed = (
            _exit_laws_closed_form(surface.model, i, z)
            if isinstance(surface, ParametricIntensity)
            else None
        )
        if closed is not None:
            targets, row = closed
            for j, p in zip(targets, row):
                probs[i, j] = p
                report[(i, j)] = 0.0
            row_sums[i] = 1.0
            continue
        total = 0.0
        for j in surface.targets(i):

            def integrand(u, i=i, j=j):
                return float(
                    np.exp(
                        surface.log_intensity(i, j, z, u)
                        - surface.total_cumulative(i, z, u)
                    )
                )

            value, err = integrate(integrand, 0.0, np.inf, spec)
            probs[i, j] = value
            report[(i, j)] = err
            total += value
        row_sums[i] = total
        if abs(total - 1.0) > DEFECT_TOL:
            raise DefectiveDistributionError(
                f"exit probabilities of state {space.label(i)!r} sum to {total:.6g}; "
                f"the exit distribution is defective or the integral failed",
                state=space.label(i),
                row_sum=total,
            )
        if total != 1.0:
            if abs(total - 1.0) > 10 * max(spec.rel_tol, 1e-12):
                warnings.warn(
                    f"renormalizing exit probabilities of state {space.label(i)!r} "
                    f"(sum {total!r})",
                    stacklevel=2,
                )
            probs[i] /= total
    chain = EmbeddedChain(probs, absorbing=space.absorbing)
    if with_report:
        return chain, {"quadrature_errors": report, "row_sums": row_sums}
    return chain


class TransitionDistribution:
    """Sojourn-time law of one transition recovered from an intensity model."""

    def __init__(self, surface: IntensitySurface, i: int, j: int, z, p_ij: float, spec):
        self._surface = surface
        self._key = (i, j)
        self._z = z
        self.p = p_ij
        self._spec = spec

    def density(self, t):
        i, j = self._key
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        vals = np.exp(
            self._surface.log_intensity(i, j, self._z, t_arr)
            - self._surface.total_cumulative(i, self._z, t_arr)
        ) / self.p
        return float(vals[0]) if np.ndim(t) == 0 else vals

    def cdf(self, t):
        t = float(t)
        if t < 0:
            raise DomainError("time must be nonnegative")
        if t == 0.0:
            return 0.0
        value, _ = integrate(self.density, 0.0, t, self._spec)
        return min(value, 1.0)

    def survival(self, t):
        return 1.0 - self.cdf(t)

    def hazard(self, t):
        return self.density(t) / self.survival(t)


def ii_to_i_density(
    model,
    i: int,
    j: int,
    z=None,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    p_ij: Optional[float] = None,
) -> TransitionDistribution:
    """Sojourn density/survival evaluators for transition i -> j.

    ``p_ij`` may be passed in (e.g. a whole chain was already converted);
    otherwise the single probability is integrated here.
    """
    surface = as_intensity_surface(model)
    if j not in surface.targets(i):
        raise ModelError(
            f"transition {surface.space.label(i)}->{surface.space.label(j)} "
            f"is not in the model"
        )
    if p_ij is None:

        def integrand(u):
            return float(
                np.exp(
                    surface.log_intensity(i, j, z, u)
                    - surface.total_cumulative(i, z, u)
                )
            )

        p_ij, _ = integrate(integrand, 0.0, np.inf, spec)
    if p_ij <= 0.0:
        raise DomainError(
            f"transition {surface.space.label(i)}->{surface.space.label(j)} has zero "
            f"probability; its conditional sojourn law is undefined"
        )
    return TransitionDistribution(surface, i, j, z, float(p_ij), spec)


def ctmc_to_generator(chain: EmbeddedChain, rates) -> np.ndarray:
    """Generator matrix of the CTMC with jump chain ``chain`` and exit rates."""
    rates = np.asarray(rates, dtype=float)
    n = chain.n_states
    if rates.shape != (n,):
        raise ModelError(f"need one exit rate per state, got shape {rates.shape}")
    q = np.zeros((n, n))
    for i in range(n):
        if i in chain.absorbing:
            if rates[i] != 0.0:
                raise ModelError(f"absorbing state {i} must have exit rate 0")
            continue
        if not rates[i] > 0:
            raise ModelError(f"exit rate of state {i} must be positive")
        q[i] = rates[i] * chain.row(i)
        q[i, i] = -rates[i]
    return q


def generator_to_ctmc(q) -> Tuple[EmbeddedChain, np.ndarray]:
    """Inverse of :func:`ctmc_to_generator`; zero rows are absorbing."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ModelError("generator matrix must be square")
    n = q.shape[0]
    off_diag = q.copy()
    np.fill_diagonal(off_diag, 0.0)
    if np.any(off_diag < 0):
        raise ModelError("generator off-diagonal entries must be nonnegative")
    if np.any(np.abs(q.sum(axis=1)) > 1e-10):
        raise ModelError("generator rows must sum to zero")
    rates = -np.diag(q).astype(float)
    probs = np.zeros((n, n))
    for i in range(n):
        if rates[i] > 0:
            probs[i] = off_diag[i] / rates[i]
    return EmbeddedChain(probs), rates


def weibull_closure(model: SojournModelI, z=None) -> Dict[int, bool]:
    """Per-state diagnostic: does the converted intensity stay Weibull?

    True for state i exactly when every exit law is Weibull with a common
    shape and common covariate-adjusted scale, in which case the conversion
    only rescales each exit law by p_ij**(-1/shape).
    """
    out = {}
    for i in range(model.space.n_states):
        if model.space.is_absorbing(i):
            continue
        laws = [model.laws[(i, j)] for j in model.targets(i)]
        if any(law.family.name != "weibull" for law in laws):
            out[i] = False
            continue
        shapes = {float(law.params[0]) for law in laws}
        scales = {
            float(law.params[1] * np.exp(-law.linear_predictor(z) / law.params[0]))
            for law in laws
        }
        out[i] = len(shapes) == 1 and len(scales) == 1
    return out
