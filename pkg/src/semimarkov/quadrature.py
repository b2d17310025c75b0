"""Adaptive quadrature engine used for conversions and incidence curves.

Thin contract layer over QUADPACK (``scipy.integrate.quad``): per-panel
Gauss-Kronrod with adaptive subdivision and extrapolation, which copes with
the integrable endpoint singularities (t**(shape-1) with shape < 1) that
arise from decreasing hazards.  Infinite upper limits are mapped to a finite
interval by the library's rational change of variable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import DomainError, QuadratureError

__all__ = ["QuadratureSpec", "DEFAULT_QUADRATURE", "integrate"]


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def integrate(f, lower, upper, spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Integrate ``f`` over [lower, upper] (upper may be +inf).

    Returns ``(value, error_estimate)``.  Raises :class:`QuadratureError`
    carrying the best estimate when the subdivision budget is exhausted or
    the integral fails to converge.
    """
    lower = float(lower)
    upper = float(upper)
    if np.isnan(lower) or np.isnan(upper) or np.isinf(lower):
        raise DomainError("integration bounds must be finite below and non-NaN")
    if upper < lower:
        raise DomainError("upper bound must not be below lower bound")
    if upper == lower:
        return 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, err = quad(
                f,
                lower,
                upper,
                epsabs=spec.abs_tol,
                epsrel=spec.rel_tol,
                limit=spec.max_subdivisions,
            )
        except IntegrationWarning as w:
            value, err = quad(
                f,
                lower,
                upper,
                epsabs=spec.abs_tol,
                epsrel=spec.rel_tol,
                limit=spec.max_subdivisions,
                full_output=True,
            )[:2]
            raise QuadratureError(
                f"integration did not converge: {w}",
                estimate=value,
                error_estimate=err,
            ) from None
    return value, err
