"""Parametric nonnegative-time distribution families.

Every family exposes the same evaluator surface: hazard, cumulative hazard,
survival, density (plus log versions) and quantile, all closed form.  Natural
parameters are strictly positive; ``to_unconstrained``/``from_unconstrained``
map them to and from the real line via elementwise log/exp so optimizers can
work unconstrained.

Conventions (documented in the README):
  * ``exponential``: (rate,), hazard = rate.
  * ``weibull``: (shape, scale) with hazard (shape/scale)*(t/scale)**(shape-1).
  * ``gamma``: (shape, rate).
  * ``gengamma``: Stacy generalized gamma (shape_b, scale, shape_k) with
    density b/(scale*Gamma(k)) * (t/scale)**(b*k-1) * exp(-(t/scale)**b).
    Equals the positive-Q region of the Prentice family; shape_k=1 gives
    weibull, shape_b=1 gives gamma.
  * ``expweibull``: exponentiated Weibull, CDF (1-exp(-(t/scale)**shape))**power.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaincc, gammaincinv, gammaln

from .errors import DomainError, ParameterError

__all__ = [
    "Family",
    "FAMILIES",
    "get_family",
    "hazard",
    "cumulative_hazard",
    "survival",
    "density",
    "quantile",
    "to_unconstrained",
    "from_unconstrained",
]


def _as_times(t):
    """Validate t >= 0 and return (array, was_scalar)."""
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr) | np.isposinf(arr)):
        raise DomainError("time values must be finite or +inf")
    if np.any(arr < 0):
        raise DomainError("time values must be nonnegative")
    return arr, arr.ndim == 0


def _ret(values, scalar):
    values = np.asarray(values, dtype=float)
    return float(values[()]) if scalar else values


class Family:
    """A parametric family of distributions on [0, inf).

    Subclasses implement ``_log_hazard``/``_cumulative_hazard`` or
    ``_log_density``/``_log_survival`` on validated positive parameter arrays
    and nonnegative time arrays; the base class derives the rest so the
    identities density = hazard * survival and survival = exp(-cumhaz) hold
    exactly as computed.
    """

    name: str = ""
    n_params: int = 0
    param_names: tuple = ()

    def check_params(self, params) -> np.ndarray:
        p = np.asarray(params, dtype=float).ravel()
        if p.size != self.n_params:
            raise ParameterError(
                f"{self.name} takes {self.n_params} parameter(s) "
                f"{self.param_names}, got {p.size}"
            )
        if not np.all(np.isfinite(p)) or np.any(p <= 0.0):
            raise ParameterError(
                f"{self.name} parameters must be finite and strictly positive, got {p.tolist()}"
            )
        return p

    # Subclass hooks, called with validated inputs.
    def _log_hazard(self, p, t):
        return self._log_density(p, t) - self._log_survival(p, t)

    def _cumulative_hazard(self, p, t):
        return -self._log_survival(p, t)

    def _log_survival(self, p, t):
        return -self._cumulative_hazard(p, t)

    def _log_density(self, p, t):
        return self._log_hazard(p, t) - self._cumulative_hazard(p, t)

    def _quantile(self, p, prob):
        raise NotImplementedError

    # Public evaluators.
    def log_hazard(self, params, t):
        p = self.check_params(params)
        arr, scalar = _as_times(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _ret(self._log_hazard(p, arr), scalar)

    def hazard(self, params, t):
        p = self.check_params(params)
        arr, scalar = _as_times(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _ret(np.exp(self._log_hazard(p, arr)), scalar)

    def cumulative_hazard(self, params, t):
        p = self.check_params(params)
        arr, scalar = _as_times(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _ret(self._cumulative_hazard(p, arr), scalar)

    def log_survival(self, params, t):
        p = self.check_params(params)
        arr, scalar = _as_times(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _ret(self._log_survival(p, arr), scalar)

    def survival(self, params, t):
        p = self.check_params(params)
        arr, scalar = _as_times(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _ret(np.exp(self._log_survival(p, arr)), scalar)

    def log_density(self, params, t):
        p = self.check_params(params)
        arr, scalar = _as_times(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _ret(self._log_density(p, arr), scalar)

    def density(self, params, t):
        p = self.check_params(params)
        arr, scalar = _as_times(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _ret(np.exp(self._log_density(p, arr)), scalar)

    def quantile(self, params, prob):
        """Smallest t with CDF(t) >= prob, for prob in [0, 1)."""
        p = self.check_params(params)
        arr = np.asarray(prob, dtype=float)
        scalar = arr.ndim == 0
        if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr >= 1.0):
            raise DomainError("quantile probability must lie in [0, 1)")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _ret(self._quantile(p, arr), scalar)

    def to_unconstrained(self, params):
        p = self.check_params(params)
        return np.log(p)

    def from_unconstrained(self, x):
        arr = np.asarray(x, dtype=float).ravel()
        if arr.size != self.n_params:
            raise ParameterError(
                f"{self.name} takes {self.n_params} unconstrained value(s), got {arr.size}"
            )
        if not np.all(np.isfinite(arr)):
            raise ParameterError("unconstrained parameters must be finite")
        return np.exp(arr)

    def __repr__(self):
        return f"<family {self.name}>"


def _pow_log(exponent, log_t):
    """exponent * log_t with the t -> 0 limit handled (0*inf would be nan)."""
    if exponent == 0.0:
        return np.zeros_like(log_t)
    return exponent * log_t


class Exponential(Family):
    """Constant-hazard distribution, parameter (rate,)."""

    name = "exponential"
    n_params = 1
    param_names = ("rate",)

    def _log_hazard(self, p, t):
        return np.full_like(t, np.log(p[0]))

    def _cumulative_hazard(self, p, t):
        return p[0] * t

    def _quantile(self, p, prob):
        return -np.log1p(-prob) / p[0]


class Weibull(Family):
    """Power-law hazard, parameters (shape, scale)."""

    name = "weibull"
    n_params = 2
    param_names = ("shape", "scale")

    def _log_hazard(self, p, t):
        shape, scale = p
        return np.log(shape / scale) + _pow_log(shape - 1.0, np.log(t / scale))

    def _cumulative_hazard(self, p, t):
        shape, scale = p
        result = np.where(t == np.inf, np.inf, np.power(t / scale, shape))
        return result

    def _quantile(self, p, prob):
        shape, scale = p
        return scale * np.power(-np.log1p(-prob), 1.0 / shape)


class Gamma(Family):
    """Gamma distribution, parameters (shape, rate)."""

    name = "gamma"
    n_params = 2
    param_names = ("shape", "rate")

    def _log_density(self, p, t):
        shape, rate = p
        return (
            shape * np.log(rate)
            + _pow_log(shape - 1.0, np.log(t))
            - rate * t
            - gammaln(shape)
        )

    def _log_survival(self, p, t):
        shape, rate = p
        return np.log(gammaincc(shape, rate * t))

    def _quantile(self, p, prob):
        shape, rate = p
        return gammaincinv(shape, prob) / rate


class GeneralizedGamma(Family):
    """Stacy generalized gamma, parameters (shape_b, scale, shape_k).

    (t/scale)**shape_b is standard-gamma(shape_k) distributed.  shape_k = 1
    recovers weibull(shape_b, scale); shape_b = 1 recovers
    gamma(shape_k, 1/scale).
    """

    name = "gengamma"
    n_params = 3
    param_names = ("shape_b", "scale", "shape_k")

    def _log_density(self, p, t):
        b, scale, k = p
        return (
            np.log(b / scale)
            - gammaln(k)
            + _pow_log(b * k - 1.0, np.log(t / scale))
            - np.where(t == np.inf, np.inf, np.power(t / scale, b))
        )

    def _log_survival(self, p, t):
        b, scale, k = p
        x = np.where(t == np.inf, np.inf, np.power(t / scale, b))
        return np.log(gammaincc(k, x))

    def _quantile(self, p, prob):
        b, scale, k = p
        return scale * np.power(gammaincinv(k, prob), 1.0 / b)


class ExponentiatedWeibull(Family):
    """Exponentiated Weibull, parameters (shape, scale, power).

    CDF is (1 - exp(-(t/scale)**shape))**power.
    """

    name = "expweibull"
    n_params = 3
    param_names = ("shape", "scale", "power")

    @staticmethod
    def _log_weibull_cdf(x):
        # log(1 - exp(-x)) without cancellation; -inf at x = 0.
        return np.log(-np.expm1(-x))

    def _log_survival(self, p, t):
        shape, scale, power = p
        x = np.where(t == np.inf, np.inf, np.power(t / scale, shape))
        log_f_weib = self._log_weibull_cdf(x)
        # S = 1 - exp(power * log_f_weib); the argument is <= 0.
        return np.log(-np.expm1(power * log_f_weib))

    def _log_density(self, p, t):
        shape, scale, power = p
        x = np.where(t == np.inf, np.inf, np.power(t / scale, shape))
        log_f_weib = self._log_weibull_cdf(x)
        out = (
            np.log(power)
            + np.log(shape / scale)
            + _pow_log(shape - 1.0, np.log(t / scale))
            - x
            + _pow_log(power - 1.0, log_f_weib)
        )
        # At t = 0 the two power terms can disagree in sign; the density
        # behaves like t**(shape*power - 1) there, so take that limit.
        at_zero = t == 0.0
        if np.any(at_zero):
            c = shape * power - 1.0
            if c < 0.0:
                limit = np.inf
            elif c > 0.0:
                limit = -np.inf
            else:
                limit = np.log(power * shape / scale)
            out = np.where(at_zero, limit, out)
        return out

    def _quantile(self, p, prob):
        shape, scale, power = p
        with np.errstate(divide="ignore"):
            root = np.exp(np.log(prob) / power)  # prob**(1/power), 0 at prob=0
        x = -np.log1p(-root)
        return scale * np.power(x, 1.0 / shape)


FAMILIES = {
    fam.name: fam
    for fam in (Exponential(), Weibull(), Gamma(), GeneralizedGamma(), ExponentiatedWeibull())
}


def get_family(family) -> Family:
    """Resolve a family instance from its lowercase name (or pass one through)."""
    if isinstance(family, Family):
        return family
    try:
        return FAMILIES[str(family).lower()]
    except KeyError:
        raise ParameterError(
            f"unknown family {family!r}; choose from {sorted(FAMILIES)}"
        ) from None


def hazard(family, params, t):
    return get_family(family).hazard(params, t)


def cumulative_hazard(family, params, t):
    return get_family(family).cumulative_hazard(params, t)


def survival(family, params, t):
    return get_family(family).survival(params, t)


def density(family, params, t):
    return get_family(family).density(params, t)


def quantile(family, params, p):
    return get_family(family).quantile(params, p)


def to_unconstrained(family, params):
    return get_family(family).to_unconstrained(params)


def from_unconstrained(family, x):
    return get_family(family).from_unconstrained(x)
