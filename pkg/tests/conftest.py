import numpy as np
import pytest

from semimarkov.model import (
    EmbeddedChain,
    IntensityModelII,
    SojournModelI,
    StateSpace,
    TransitionLaw,
)


def exp_law(rate, beta=(), mask=()):
    return TransitionLaw("exponential", [rate], np.asarray(beta, float), tuple(mask))


def weib_law(shape, scale, beta=(), mask=()):
    return TransitionLaw("weibull", [shape, scale], np.asarray(beta, float), tuple(mask))


@pytest.fixture
def illness_death_space():
    return StateSpace(["1", "2", "3"], absorbing={2})


@pytest.fixture
def illness_death_exp(illness_death_space):
    """All-exponential illness-death model, rates 1, p12=0.6, p13=0.4, p23=1."""
    chain = EmbeddedChain([[0, 0.6, 0.4], [0, 0, 1.0], [0, 0, 0]])
    laws = {(0, 1): exp_law(1.0), (0, 2): exp_law(1.0), (1, 2): exp_law(1.0)}
    return SojournModelI(illness_death_space, chain, laws)


@pytest.fixture
def constant_intensity_model(illness_death_space):
    """Constant intensities: 1->2 at 0.2, 1->3 at 0.1, 2->3 at 0.3."""
    laws = {(0, 1): exp_law(0.2), (0, 2): exp_law(0.1), (1, 2): exp_law(0.3)}
    return IntensityModelII(illness_death_space, laws)


def random_sojourn_model(rng, n_states=3, reversible=False):
    """Random exponential/Weibull sojourn model used by round-trip suites."""
    labels = [str(k + 1) for k in range(n_states)]
    if reversible:
        absorbing = set()
        keys = [(i, j) for i in range(n_states) for j in range(n_states) if i != j]
    else:
        absorbing = {n_states - 1}
        keys = [
            (i, j)
            for i in range(n_states - 1)
            for j in range(n_states)
            if j != i
        ]
    space = StateSpace(labels, absorbing)
    probs = np.zeros((n_states, n_states))
    for i in range(n_states):
        if i in absorbing:
            continue
        row_keys = [k for k in keys if k[0] == i]
        w = rng.uniform(0.2, 1.0, size=len(row_keys))
        w /= w.sum()
        for (a, b), p in zip(row_keys, w):
            probs[a, b] = p
    chain = EmbeddedChain(probs, absorbing=absorbing)
    laws = {}
    for key in keys:
        if rng.random() < 0.5:
            laws[key] = exp_law(rng.uniform(0.3, 2.0))
        else:
            laws[key] = weib_law(rng.uniform(0.7, 2.2), rng.uniform(0.5, 2.5))
    return SojournModelI(space, chain, laws)
