"""Two-trajectory conditional passes and mixing constants.

Pinning a second trajectory (with its own slot sequence) alongside the
reference turns the expected normalizing-constant estimate into a finite
sum over increasing index chains: each chain records the times at which a
surviving lineage passes through one of the two pinned paths, every other
segment contributing a free factor of N-2.  Two equivalent evaluation
strategies are implemented: direct enumeration of the index chains (cost
2^T) and a backward accumulation over chain start points (cost T^2); both
are checked against a brute-force enumeration of the pass.

The module also computes the two mixing constants used by the escape-rate
bounds: the predictive-overshoot ratio ``alpha`` and the pair ``beta`` /
``delta`` (transition-overlap and potential-spread), which dominate it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .csmc import Trajectory, conditional_system
from .errors import (
    HorizonTooLarge,
    LineageClash,
    ZeroPotential,
    ZeroTransitionOverlap,
)
from .exact_oracle import enumerate_conditional_outcomes
from .fk_model import DiscreteFK, predictive_law, q_operator
from .smc_core import ParticleSystem


@dataclass(frozen=True)
class IndexChain:
    """A strictly increasing time chain ending at the virtual time T+1."""

    s: int
    indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if self.s != len(self.indices):
            raise ValueError("chain length field must match the index count")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("chain indices must be strictly increasing")


def index_chains(T: int, lower: int = 0):
    """All increasing chains in (lower, T+1] that end at T+1, as IndexChains."""
    interior = [t for t in range(lower + 1, T + 1)]
    for r in range(len(interior) + 1):
        for combo in itertools.combinations(interior, r):
            idx = combo + (T + 1,)
            yield IndexChain(s=len(idx), indices=idx)


def run_c2smc(model, N: int, x: Trajectory, k, y: Trajectory, rng, base: int = 0) -> ParticleSystem:
    """One pass with the reference pinned to slot 0 and a second trajectory
    pinned along the slot sequence ``k``."""
    T = model.T
    if len(x) != T or len(y) != T:
        raise ValueError("both trajectories must have length T")
    k = tuple(int(v) for v in k)
    for t in range(T):
        if k[t] == 0 and x.points[t] != y.points[t]:
            raise LineageClash(f"slot 0 demanded for both trajectories at time {t + 1}")
    pins = [((0,) * T, tuple(x.points)), (k, tuple(y.points))]
    return conditional_system(model, N, pins, rng, base=base)


# ---------------------------------------------------------------------------
# Closed form for the expected normalizing-constant estimate
# ---------------------------------------------------------------------------


def _pair_factor(model: DiscreteFK, p: int, q: int, x, y) -> float:
    gpq = q_operator(model, p, q)
    return float(gpq[x[p - 1]] + gpq[y[p - 1]])


def c2smc_expectation_closed_form(
    model: DiscreteFK, N: int, x, y, method: str = "recursion", max_horizon: int = 20
) -> float:
    """Expected normalizing-constant estimate under the two-pin pass.

    ``method`` selects the evaluation strategy: "chains" enumerates the
    2^T increasing index chains directly, "recursion" runs the backward
    accumulation.  The two agree to machine precision and are cross-checked
    in the tests.
    """
    x = tuple(x.points if isinstance(x, Trajectory) else x)
    y = tuple(y.points if isinstance(y, Trajectory) else y)
    T = model.T
    if N < 2:
        raise ValueError("the two-pin pass needs at least two particles")
    if method == "chains":
        if T > max_horizon:
            raise HorizonTooLarge(f"chain enumeration limited to T <= {max_horizon}")
        total = 0.0
        for chain in index_chains(T):
            idx = chain.indices
            term = float(N - 2) ** (T + 1 - chain.s) * q_operator(model, 0, idx[0])
            for a, b in zip(idx, idx[1:]):
                term *= _pair_factor(model, a, b, x, y)
            total += term
        return total / float(N) ** T
    if method == "recursion":
        # r[p] accumulates all chains starting at p, each segment (a, b)
        # contributing its pair factor and (N-2) per skipped interior slot.
        r = {T + 1: 1.0}
        for p in range(T, 0, -1):
            acc = 0.0
            for q in range(p + 1, T + 2):
                acc += _pair_factor(model, p, q, x, y) * float(N - 2) ** (q - p - 1) * r[q]
            r[p] = acc
        total = sum(
            q_operator(model, 0, p) * float(N - 2) ** (p - 1) * r[p] for p in range(1, T + 2)
        )
        return total / float(N) ** T
    raise ValueError(f"unknown method {method!r}")


def c2smc_expectation_bruteforce(model: DiscreteFK, N: int, x, y, guard: int = 10**7) -> float:
    """The same expectation by full enumeration of the pass (the oracle)."""
    x = tuple(x.points if isinstance(x, Trajectory) else x)
    y = tuple(y.points if isinstance(y, Trajectory) else y)
    T = model.T
    if N < 2:
        raise ValueError("the two-pin pass needs at least two particles")
    pins = [((0,) * T, x), ((1,) * T, y)]
    total = 0.0
    for prob, states, _ in enumerate_conditional_outcomes(model, N, pins, guard=guard):
        est = 1.0
        for t in range(1, T + 1):
            est *= sum(model.potential(t, z) for z in states[t - 1]) / N
        total += prob * est
    return total


# ---------------------------------------------------------------------------
# Mixing constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixingConstants:
    alpha: float
    beta: float
    delta: float
    m: int

    def __post_init__(self):
        if self.alpha > self.beta * self.delta * (1.0 + 1e-12):
            raise ValueError(
                "internal inconsistency: alpha exceeds beta * delta "
                f"({self.alpha} > {self.beta * self.delta})"
            )


def alpha_constant(model: DiscreteFK) -> float:
    """Worst ratio of a two-time mass function to its predictive average.

    Maximised over all time pairs 1 <= p < q <= T+1 and all states; equals 1
    for constant weights or state-independent transitions.
    """
    best = 1.0
    for p in range(1, model.T + 1):
        eta = predictive_law(model, p)
        for q in range(p + 1, model.T + 2):
            gpq = q_operator(model, p, q)
            denom = float(eta @ gpq)
            if denom <= 0:
                raise ZeroPotential(f"predictive mass of the ({p},{q}) factor is zero")
            best = max(best, float(np.max(gpq)) / denom)
    return best


def beta_delta_constants(model: DiscreteFK, m: int) -> MixingConstants:
    """Transition-overlap and potential-spread constants at lag ``m``.

    ``beta`` bounds m-step transition masses between any two sources; the
    maximum over target sets of a ratio of sums is attained at a singleton,
    so only entrywise ratios are scanned.  ``delta`` is the worst potential
    ratio raised to the m-th power and requires strictly positive weights.
    """
    if not 1 <= m <= model.T:
        raise ValueError(f"lag must lie in [1, {model.T}]")
    beta = 1.0
    for p in range(1, model.T - m + 1):
        mbar = np.eye(model.n_states)
        for t in range(p + 1, p + m + 1):
            mbar = mbar @ model.transition(t)
        for u in range(model.n_states):
            col = mbar[:, u]
            pos = col[col > 0]
            if len(pos) == 0:
                continue
            if len(pos) < len(col):
                raise ZeroTransitionOverlap(
                    f"m-step transitions from time {p} have disjoint support at state {u}"
                )
            beta = max(beta, float(pos.max() / pos.min()))
    spread = 1.0
    for t in range(1, model.T + 1):
        g = model.potential_vector(t)
        if np.any(g <= 0):
            raise ZeroPotential(f"potential at time {t} vanishes somewhere")
        spread = max(spread, float(g.max() / g.min()))
    delta = spread**m
    return MixingConstants(alpha=alpha_constant(model), beta=beta, delta=delta, m=m)
