"""Right-censored trajectory simulation from either parameterization.

Randomness comes from a counter-based Philox generator with one independent
stream per subject, keyed by (seed, subject index).  Output is therefore
bit-reproducible regardless of scheduling, and any subject can be re-simulated
in isolation.

Under the sojourn form, the next state is drawn from the embedded chain row
and the sojourn by inverting the covariate-adjusted sojourn CDF.  Under the
intensity form, the holding time is drawn by inverting the total cumulative
intensity against a standard exponential and the destination from the
cause-specific intensity ratios at the realized time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.stats import chi2_contingency, ks_2samp

from .convert import as_intensity_surface
from .errors import DomainError, ModelError, SimulationError
from .likelihood import Dataset, SubjectHistory
from .model import SojournModelI

__all__ = [
    "CovariateGenerator",
    "SimConfig",
    "simulate_i",
    "simulate_ii",
    "simulate_equivalence_check",
    "EquivalenceReport",
]

_GEN_RE = re.compile(r"^\s*(normal|bernoulli|fixed)\s*\(([^)]*)\)\s*$")

# largest probability the quantile inverter accepts; clips Exp(1) draws deep
# in the tail that would round the CDF to 1.0
_P_MAX = float(np.nextafter(1.0, 0.0))
_ROOT_TOL = 1e-10


@dataclass(frozen=True)
class CovariateGenerator:
    """Per-covariate sampling rule: fixed(v), bernoulli(p) or normal(m, s)."""

    kind: str
    args: Tuple[float, ...]

    @classmethod
    def parse(cls, text: str) -> "CovariateGenerator":
        m = _GEN_RE.match(text)
        if not m:
            raise DomainError(
                f"cannot parse covariate generator {text!r}; expected "
                f"fixed(v), bernoulli(p) or normal(m,s)"
            )
        kind = m.group(1)
        try:
            args = tuple(float(a) for a in m.group(2).split(",") if a.strip())
        except ValueError:
            raise DomainError(f"bad numeric arguments in {text!r}") from None
        n_expected = {"fixed": 1, "bernoulli": 1, "normal": 2}[kind]
        if len(args) != n_expected:
            raise DomainError(f"{kind} takes {n_expected} argument(s), got {len(args)}")
        if kind == "bernoulli" and not 0.0 <= args[0] <= 1.0:
            raise DomainError("bernoulli probability must be in [0, 1]")
        if kind == "normal" and args[1] < 0:
            raise DomainError("normal standard deviation must be nonnegative")
        return cls(kind, args)

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "fixed":
            return self.args[0]
        if self.kind == "bernoulli":
            return float(rng.random() < self.args[0])
        return self.args[0] + self.args[1] * rng.standard_normal()

    def __str__(self):
        return f"{self.kind}({','.join(format(a, 'g') for a in self.args)})"


@dataclass(frozen=True)
class SimConfig:
    """Study design: horizon, cohort size, seed, initial state, covariates."""

    horizon: float
    n_subjects: int
    seed: int = 0
    initial_state: Union[int, Sequence[float]] = 0
    covariates: Tuple[Tuple[str, CovariateGenerator], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.horizon >= 0:
            raise DomainError("horizon must be nonnegative")
        if self.n_subjects < 1:
            raise DomainError("n_subjects must be at least 1")

    @property
    def covariate_names(self):
        return tuple(name for name, _ in self.covariates)


def _subject_rng(seed: int, index: int) -> np.random.Generator:
    # one Philox stream per subject: 128-bit key = (seed, index)
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) + int(index)))


def _pick(u: float, probs) -> int:
    """Index drawn from ``probs`` via a single uniform."""
    acc = 0.0
    last = 0
    for idx, p in enumerate(probs):
        if p <= 0.0:
            continue
        acc += p
        last = idx
        if u < acc:
            return idx
    return last


def _draw_initial(cfg: SimConfig, rng, n_states: int) -> int:
    init = cfg.initial_state
    if np.ndim(init) == 0:
        i = int(init)
        if not 0 <= i < n_states:
            raise ModelError(f"initial state index {i} out of range")
        return i
    probs = np.asarray(init, dtype=float)
    if probs.size != n_states or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-10:
        raise ModelError("initial state distribution must sum to 1 over the states")
    return _pick(rng.random(), probs)


def _censor_tail(horizon: float, elapsed: float) -> float:
    u = horizon - elapsed
    if u <= 0.0:
        return 0.0
    # keep (left-fold sum of sojourns) + u == horizon bit-exact
    if elapsed + u != horizon:
        for direction in (np.inf, -np.inf):
            cand = u
            for _ in range(2):
                cand = float(np.nextafter(cand, direction))
                if elapsed + cand == horizon:
                    return cand
    return u


def simulate_i(model: SojournModelI, cfg: SimConfig) -> Dataset:
    """Sample subjects from a sojourn-parameterized model."""
    subjects = []
    for idx in range(cfg.n_subjects):
        rng = _subject_rng(cfg.seed, idx)
        z = np.array([gen.draw(rng) for _, gen in cfg.covariates])
        initial = _draw_initial(cfg, rng, model.space.n_states)
        state = initial
        states, sojourns = [], []
        elapsed = 0.0
        while not model.space.is_absorbing(state):
            if elapsed >= cfg.horizon:
                break
            row = model.chain.row(state)
            nxt = _pick(rng.random(), row)
            law = model.laws[(state, nxt)]
            # sojourn by inversion: cumulative-hazard target Exp(1)*exp(-b.z)
            target = rng.standard_exponential() * math.exp(-law.linear_predictor(z))
            prob = min(-math.expm1(-target), _P_MAX)
            tau = max(float(law.family.quantile(law.params, prob)), 5e-324)
            if elapsed + tau > cfg.horizon:
                break
            states.append(nxt)
            sojourns.append(tau)
            elapsed += tau
            state = nxt
        censored = None
        if not model.space.is_absorbing(state):
            censored = _censor_tail(cfg.horizon, elapsed)
        subjects.append(
            SubjectHistory(
                subject_id=f"s{idx + 1:06d}",
                initial_state=initial,
                states=tuple(states),
                sojourns=np.asarray(sojourns, float),
                censored=censored,
                covariates=z,
            )
        )
    return Dataset(subjects, covariate_names=cfg.covariate_names)


class _ExitProfile:
    """Per-state sampling kernel: cumulative exit intensity, its inverse, and
    destination weights, with closed-form fast paths and no per-call
    parameter revalidation in the root-find loop."""

    def __init__(self, surface, i):
        from .convert import ConvertedIntensity, ParametricIntensity

        self.state = i
        self.targets = list(surface.targets(i))
        self.space = surface.space
        if isinstance(surface, ParametricIntensity):
            laws = [surface.model.laws[(i, j)] for j in self.targets]
            self.logp = None
        elif isinstance(surface, ConvertedIntensity):
            laws = [surface.model.laws[(i, j)] for j in self.targets]
            self.logp = np.log(
                [surface.model.chain.p(i, j) for j in self.targets]
            )
        else:
            laws = None
            self.logp = None
        self.laws = laws
        self.surface = surface
        self.kind = "surface"
        if laws is not None and self.logp is None:
            names = {law.family.name for law in laws}
            if names == {"exponential"}:
                self.kind = "exp"
                self.rates = np.array([law.params[0] for law in laws])
            elif names == {"weibull"} and len({float(l.params[0]) for l in laws}) == 1:
                self.kind = "weibull"
                self.shape = float(laws[0].params[0])
                self.scale_pow = np.array(
                    [law.params[1] ** -self.shape for law in laws]
                )
            else:
                self.kind = "parametric"
        elif self.logp is not None:
            self.kind = "converted"

    def relative_risks(self, z):
        if self.laws is None:
            return None
        return np.array([math.exp(law.linear_predictor(z)) for law in self.laws])

    def _cumulative(self, t, z, rr):
        if self.kind == "exp":
            return float(np.dot(self.rates, rr)) * t
        if self.kind == "weibull":
            return float(np.dot(self.scale_pow, rr)) * t**self.shape
        if self.kind == "parametric":
            return float(
                sum(
                    float(law.family._cumulative_hazard(law.params, np.float64(t))) * r
                    for law, r in zip(self.laws, rr)
                )
            )
        if self.kind == "converted":
            logs = [
                lp - float(law.family._cumulative_hazard(law.params, np.float64(t))) * r
                for lp, law, r in zip(self.logp, self.laws, rr)
            ]
            m = max(logs)
            return -(m + math.log(sum(math.exp(v - m) for v in logs)))
        return float(self.surface.total_cumulative(self.state, z, t))

    def draw_holding_time(self, target, remaining, z, rr):
        """Time with cumulative exit intensity ``target``, or None when it
        falls beyond ``remaining``."""
        if self._cumulative(remaining, z, rr) <= target:
            return None
        if self.kind == "exp":
            return target / float(np.dot(self.rates, rr))
        if self.kind == "weibull":
            return (target / float(np.dot(self.scale_pow, rr))) ** (1.0 / self.shape)
        try:
            tau = brentq(
                lambda t: self._cumulative(t, z, rr) - target,
                0.0,
                remaining,
                xtol=_ROOT_TOL,
                maxiter=200,
            )
        except (ValueError, RuntimeError) as e:
            raise SimulationError(
                f"holding-time inversion failed in state "
                f"{self.space.label(self.state)!r} (target {target:.6g}, "
                f"bracket (0, {remaining:.6g}]): {e}"
            ) from None
        return float(tau)

    def destination_probs(self, tau, z, rr):
        if self.kind == "exp":
            w = self.rates * rr
            return w / w.sum()
        if self.kind == "weibull":
            w = self.scale_pow * rr
            return w / w.sum()
        if self.kind == "parametric":
            # cause-specific intensity ratios; the shared survival cancels
            logw = np.array(
                [
                    float(law.family._log_hazard(law.params, np.float64(tau)))
                    + math.log(r)
                    for law, r in zip(self.laws, rr)
                ]
            )
        elif self.kind == "converted":
            # converted intensity is p_j * f_j / S_i; S_i cancels in the ratio
            logw = np.array(
                [
                    lp
                    + float(law.family._log_hazard(law.params, np.float64(tau)))
                    + math.log(r)
                    - float(law.family._cumulative_hazard(law.params, np.float64(tau)))
                    * r
                    for lp, law, r in zip(self.logp, self.laws, rr)
                ]
            )
        else:
            logw = np.array(
                [
                    float(self.surface.log_intensity(self.state, j, z, tau))
                    for j in self.targets
                ]
            )
        m = logw.max()
        if math.isinf(m):
            w = np.isposinf(logw).astype(float)
        else:
            w = np.exp(logw - m)
        return w / w.sum()


def simulate_ii(model, cfg: SimConfig) -> Dataset:
    """Sample subjects from an intensity model (parametric or converted).

    Each epoch draws the holding time by inverting the total cumulative
    intensity, then the destination with probabilities proportional to the
    cause-specific intensities at the realized holding time.
    """
    surface = as_intensity_surface(model)
    space = surface.space
    profiles = {
        i: _ExitProfile(surface, i)
        for i in range(space.n_states)
        if not space.is_absorbing(i)
    }
    subjects = []
    for idx in range(cfg.n_subjects):
        rng = _subject_rng(cfg.seed, idx)
        z = np.array([gen.draw(rng) for _, gen in cfg.covariates])
        initial = _draw_initial(cfg, rng, space.n_states)
        state = initial
        rr_cache = {}
        states, sojourns = [], []
        elapsed = 0.0
        while not space.is_absorbing(state):
            remaining = cfg.horizon - elapsed
            if remaining <= 0.0:
                break
            prof = profiles[state]
            if state not in rr_cache:
                rr_cache[state] = prof.relative_risks(z)
            rr = rr_cache[state]
            target = rng.standard_exponential()
            u_dest = rng.random()
            tau = prof.draw_holding_time(target, remaining, z, rr)
            if tau is None:
                break  # would jump after the horizon
            tau = max(tau, 5e-324)
            if elapsed + tau > cfg.horizon:
                break
            nxt = prof.targets[_pick(u_dest, prof.destination_probs(tau, z, rr))]
            states.append(nxt)
            sojourns.append(tau)
            elapsed += tau
            state = nxt
        censored = None
        if not space.is_absorbing(state):
            censored = _censor_tail(cfg.horizon, elapsed)
        subjects.append(
            SubjectHistory(
                subject_id=f"s{idx + 1:06d}",
                initial_state=initial,
                states=tuple(states),
                sojourns=np.asarray(sojourns, float),
                censored=censored,
                covariates=z,
            )
        )
    return Dataset(subjects, covariate_names=cfg.covariate_names)


@dataclass
class EquivalenceReport:
    """Two-sample comparison of trajectories from a model and its conversion."""

    holding_time_pvalues: Dict[int, float]
    destination_pvalues: Dict[int, float]
    alpha: float
    consistent: bool

    def __str__(self):
        lines = ["state  holding-time p  destination p"]
        for i in sorted(self.holding_time_pvalues):
            hp = self.holding_time_pvalues[i]
            dp = self.destination_pvalues.get(i, float("nan"))
            lines.append(f"{i:>5}  {hp:>14.4g}  {dp:>13.4g}")
        verdict = "consistent" if self.consistent else "INCONSISTENT"
        lines.append(f"verdict at alpha={self.alpha:g}: {verdict}")
        return "\n".join(lines)


def _epoch_samples(ds: Dataset, n_states: int):
    holding = {i: [] for i in range(n_states)}
    dest = {i: [] for i in range(n_states)}
    for h in ds.subjects:
        path = h.path
        for k in range(h.n_transitions):
            holding[path[k]].append(float(h.sojourns[k]))
            dest[path[k]].append(path[k + 1])
    return holding, dest


def simulate_equivalence_check(
    model_i: SojournModelI,
    cfg: SimConfig,
    alternative=None,
    alpha: float = 1e-3,
) -> EquivalenceReport:
    """Check that a sojourn model and its intensity conversion generate the
    same law, by simulating both and comparing completed epochs per state.

    ``alternative`` defaults to the exact conversion of ``model_i``; pass a
    different intensity model to use the check as a negative control.
    """
    if alternative is None:
        alternative = as_intensity_surface(model_i)
    ds_a = simulate_i(model_i, cfg)
    cfg_b = SimConfig(
        horizon=cfg.horizon,
        n_subjects=cfg.n_subjects,
        seed=cfg.seed + 1,
        initial_state=cfg.initial_state,
        covariates=cfg.covariates,
    )
    ds_b = simulate_ii(alternative, cfg_b)
    n = model_i.space.n_states
    hold_a, dest_a = _epoch_samples(ds_a, n)
    hold_b, dest_b = _epoch_samples(ds_b, n)
    hold_p: Dict[int, float] = {}
    dest_p: Dict[int, float] = {}
    for i in range(n):
        if model_i.space.is_absorbing(i):
            continue
        if len(hold_a[i]) >= 10 and len(hold_b[i]) >= 10:
            hold_p[i] = float(ks_2samp(hold_a[i], hold_b[i]).pvalue)
        targets = model_i.targets(i)
        counts = np.array(
            [
                [sum(1 for d in dest_a[i] if d == j) for j in targets],
                [sum(1 for d in dest_b[i] if d == j) for j in targets],
            ]
        )
        keep = counts.sum(axis=0) > 0
        if counts.sum() > 0 and keep.sum() >= 2 and counts.sum(axis=1).min() > 0:
            dest_p[i] = float(chi2_contingency(counts[:, keep]).pvalue)
    pvals = list(hold_p.values()) + list(dest_p.values())
    consistent = all(p >= alpha for p in pvals)
    return EquivalenceReport(hold_p, dest_p, alpha, consistent)
