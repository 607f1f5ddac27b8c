"""Closed-form convergence and variance bounds for minorized reversible chains.

Every bound is packaged as a :class:`BoundReport` holding the minorization
constant and the quantities it implies: the total-variation rate ``1 - eps``,
and the asymptotic-variance sandwich factors ``eps/(2-eps)`` (lower) and
``2/eps - 1`` (upper).  Sources:

* ``epsilon_bounded``  -- bounded-weight route; needs only per-time weight
  suprema and the normalizing constant.
* ``epsilon_mixing``   -- mixing route via the overshoot constant alpha,
  giving the horizon-proportional particle schedule.
* ``epsilon_isir``     -- single-time special case (importance resampling).
* ``pimh_epsilon``     -- independence-sampler route for the estimator-driven
  accept/reject chain; its constant does not improve with the particle count.

``tuning_c_star`` minimises cost x variance over the schedule slope and
yields the universal optimum (about 1.302 per unit of 2*alpha - 1, with a
minorization level near 0.464 independent of alpha).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import EpsilonOutOfRange, OutcomeSpaceTooLarge, ZeroPotential
from .fk_model import DiscreteFK, exact_target, sup_potentials


class BoundSource(enum.Enum):
    BOUNDED_POTENTIALS = "BoundedPotentials"
    MIXING = "Mixing"
    ISIR = "ISIR"
    PIMH = "PIMH"
    SUPPLIED = "Supplied"


@dataclass(frozen=True)
class BoundReport:
    epsilon: float
    tv_rate: float
    variance_upper_factor: float
    variance_lower_factor: float
    source: BoundSource
    n_particles: int | None = None
    horizon: int | None = None

    def __post_init__(self):
        eps = self.epsilon
        if not 0.0 < eps <= 1.0 + 1e-12:
            raise EpsilonOutOfRange(f"epsilon = {eps!r} outside (0, 1]")
        checks = (
            (self.tv_rate, 1.0 - eps),
            (self.variance_upper_factor, 2.0 / eps - 1.0),
            (self.variance_lower_factor, eps / (2.0 - eps)),
        )
        for got, want in checks:
            if abs(got - want) > 1e-14 * max(1.0, abs(want)):
                raise EpsilonOutOfRange("bound factors inconsistent with epsilon")


def _report(eps: float, source: BoundSource, n=None, horizon=None) -> BoundReport:
    if not 0.0 < eps <= 1.0 + 1e-12:
        raise EpsilonOutOfRange(f"computed epsilon = {eps!r} outside (0, 1]")
    eps = min(eps, 1.0)
    return BoundReport(
        epsilon=eps,
        tv_rate=1.0 - eps,
        variance_upper_factor=2.0 / eps - 1.0,
        variance_lower_factor=eps / (2.0 - eps),
        source=source,
        n_particles=n,
        horizon=horizon,
    )


def epsilon_bounded(model: DiscreteFK, N: int) -> BoundReport:
    """Minorization constant from per-time weight suprema.

    eps = (1 - 1/N)^T / (1 + [1 - (1 - 2/N)^T] [prod(Gbar)/gamma - 1]).
    """
    if N < 2:
        raise ValueError("need at least two particles")
    T = model.T
    ratio = float(np.prod(sup_potentials(model))) / exact_target(model).gamma_t
    eps = (1.0 - 1.0 / N) ** T / (1.0 + (1.0 - (1.0 - 2.0 / N) ** T) * (ratio - 1.0))
    return _report(eps, BoundSource.BOUNDED_POTENTIALS, n=N, horizon=T)


def epsilon_mixing(alpha: float, N: int, T: int) -> BoundReport:
    """Minorization constant under the overshoot condition.

    eps = ((1 - 1/N) / (1 + 2(alpha - 1)/N))^T, which simplifies to
    ((N-1)/(N - 2 + 2 alpha))^T.
    """
    if alpha < 1.0:
        raise ValueError("alpha is at least 1 by construction")
    if N < 2:
        raise ValueError("need at least two particles")
    eps = ((1.0 - 1.0 / N) / (1.0 + 2.0 * (alpha - 1.0) / N)) ** T
    return _report(eps, BoundSource.MIXING, n=N, horizon=T)


def mixing_floor(alpha: float, C: float) -> float:
    """Horizon-free floor exp(-(2 alpha - 1)/C), valid whenever N - 1 >= C T."""
    return math.exp(-(2.0 * alpha - 1.0) / C)


def epsilon_isir(g_bar: float, N: int) -> BoundReport:
    """Single-time case: eps = (N - 1)/(2 Gbar + N - 2) for the normalised
    weight supremum Gbar >= 1."""
    if g_bar < 1.0:
        raise ValueError("the normalised weight supremum is at least 1")
    if N < 2:
        raise ValueError("need at least two particles")
    eps = (N - 1.0) / (2.0 * g_bar + N - 2.0)
    return _report(eps, BoundSource.ISIR, n=N, horizon=1)


def lambert_w(x: float, w0: float = -0.23, tol: float = 1e-14, max_iter: int = 200) -> float:
    """Principal-branch Lambert W by Newton iteration; |w e^w - x| < tol."""
    w = w0
    for _ in range(max_iter):
        ew = math.exp(w)
        resid = w * ew - x
        if abs(resid) < tol:
            return w
        w -= resid / (ew * (1.0 + w))
    raise ArithmeticError("Lambert W iteration did not converge")


def tuning_c_star(alpha: float) -> tuple[float, float]:
    """Cost-optimal schedule slope and the minorization level it attains.

    Minimising (N+1) * variance-upper-bound over N = C*T for large N gives
    C* = (2 alpha - 1)/(W(-1/(2e)) + 1) ~ 1.302 (2 alpha - 1) and a level
    eps* = exp(-(W(-1/(2e)) + 1)) ~ 0.464 independent of alpha.
    """
    if alpha < 1.0:
        raise ValueError("alpha is at least 1 by construction")
    w = lambert_w(-1.0 / (2.0 * math.e))
    c_star = (2.0 * alpha - 1.0) / (w + 1.0)
    eps_star = math.exp(-(2.0 * alpha - 1.0) / c_star)
    return c_star, eps_star


def minorized_chain_bounds(epsilon: float) -> BoundReport:
    """Package the generic consequences of a supplied minorization constant."""
    if not 0.0 < epsilon <= 1.0:
        raise EpsilonOutOfRange(f"epsilon = {epsilon!r} outside (0, 1]")
    return _report(epsilon, BoundSource.SUPPLIED)


def dirichlet_sandwich(epsilon: float) -> tuple[float, float]:
    """Dirichlet-form bounds [eps, 2 - eps] implied by the minorization."""
    if not 0.0 < epsilon <= 1.0:
        raise EpsilonOutOfRange(f"epsilon = {epsilon!r} outside (0, 1]")
    return epsilon, 2.0 - epsilon


def gamma_hat_sup(model: DiscreteFK, N: int, max_states: int = 12) -> float:
    """Largest attainable normalizing-constant estimate over reachable
    particle configurations.

    Dynamic program over occupied state sets: the per-time average weight is
    maximised by stacking all spare particles on the best occupied state, so
    only the support of the configuration matters for the future.
    """
    S, T = model.n_states, model.T
    if S > max_states:
        raise OutcomeSpaceTooLarge(f"{S} states exceed the subset-scan limit {max_states}")
    if N < 1:
        raise ValueError("need at least one particle")

    def best_mean(t, occupied):
        g = model.potential_vector(t)
        vals = sorted((float(g[s]) for s in occupied), reverse=True)
        return (sum(vals) + (N - len(vals)) * vals[0]) / N

    def successors(t, occupied):
        out = set()
        mat = model.transition(t)
        for z in occupied:
            out.update(int(s) for s in np.flatnonzero(mat[z]))
        return frozenset(out)

    from functools import lru_cache

    @lru_cache(maxsize=None)
    def value(t, occupied):
        mean_now = best_mean(t, occupied)
        if t == T:
            return mean_now
        allowed = successors(t + 1, occupied)
        best = 0.0
        for r in range(1, min(N, len(allowed)) + 1):
            for sub in itertools.combinations(sorted(allowed), r):
                best = max(best, value(t + 1, frozenset(sub)))
        return mean_now * best

    supp1 = [int(s) for s in np.flatnonzero(model.m1)]
    best = 0.0
    for r in range(1, min(N, len(supp1)) + 1):
        for sub in itertools.combinations(supp1, r):
            best = max(best, value(1, frozenset(sub)))
    if best <= 0:
        raise ZeroPotential("no reachable configuration carries positive weight")
    return best


def pimh_epsilon(gamma_t: float, gamma_hat_sup_value: float) -> BoundReport:
    """Independence-sampler constant: the true normalizing constant divided by
    the largest attainable estimate."""
    if not gamma_hat_sup_value >= gamma_t > 0:
        raise ValueError("need sup of the estimate >= gamma_T > 0")
    return _report(gamma_t / gamma_hat_sup_value, BoundSource.PIMH)


def report_rows(reports) -> list[list]:
    """CSV-ready rows: source, N, T, epsilon, tv_rate, var factors."""
    rows = [["source", "N", "T", "epsilon", "tv_rate", "var_upper_factor", "var_lower_factor"]]
    for r in reports:
        rows.append(
            [
                r.source.value,
                "" if r.n_particles is None else r.n_particles,
                "" if r.horizon is None else r.horizon,
                repr(r.epsilon),
                repr(r.tv_rate),
                repr(r.variance_upper_factor),
                repr(r.variance_lower_factor),
            ]
        )
    return rows
