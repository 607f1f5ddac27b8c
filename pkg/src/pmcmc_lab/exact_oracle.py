"""Exact enumeration of pinned-particle kernels and finite-chain analysis.

Two enumeration engines are provided.

* :func:`enumerate_conditional_outcomes` walks the full outcome tree of a
  pass (states and ancestor rows with exact probabilities).  It supports any
  functional of the particle system and any pin configuration, at the price
  of exponential cost; it is the maximally-dumb reference.
* :func:`kernel_row` computes one row of the iterated-pass Markov kernel by
  a forward sweep over tuples of ancestral paths.  Future dynamics and the
  selected output depend on the current path tuple only, so outcomes with
  equal tuples are merged; this turns the tree into a small dynamic program
  while remaining an exact enumeration.  The two engines are cross-checked
  against each other in the test suite.

Also here: stationary laws, total-variation curves, spectral summaries,
asymptotic variances and the exact minorization constant of enumerated
kernels.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllWeightsZero,
    NotReversible,
    OutcomeSpaceTooLarge,
    SingularSolve,
    ZeroPinnedPotential,
)
from .fk_model import DiscreteFK, exact_target
from .numerics import KahanSum


# ---------------------------------------------------------------------------
# Finite chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteChain:
    """An enumerated Markov kernel with its stationary distribution."""

    states: tuple
    kernel: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        K = self.kernel
        if np.max(np.abs(K.sum(axis=1) - 1.0)) > 1e-10:
            raise ValueError("kernel rows must sum to 1 within 1e-10")
        resid = np.max(np.abs(self.stationary @ K - self.stationary))
        if resid > 1e-9:
            raise ValueError(f"stationary vector fails invariance by {resid:.2e}")

    @property
    def n_states(self) -> int:
        return len(self.states)

    def index(self, state) -> int:
        return self.states.index(state)


def stationary_distribution(kernel: np.ndarray) -> np.ndarray:
    """Solve pi K = pi, sum(pi) = 1 by least squares."""
    n = kernel.shape[0]
    a = np.vstack([kernel.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi


def chain_from_kernel(states, kernel, stationary=None) -> FiniteChain:
    kernel = np.asarray(kernel, dtype=float)
    if stationary is None:
        stationary = stationary_distribution(kernel)
    return FiniteChain(states=tuple(states), kernel=kernel, stationary=np.asarray(stationary, dtype=float))


# ---------------------------------------------------------------------------
# Outcome-tree enumeration (reference engine)
# ---------------------------------------------------------------------------


def _tree_size(model: DiscreteFK, N: int, pin_state) -> float:
    """Upper bound on the number of leaves of the outcome tree."""
    count = 1.0
    supp1 = int(np.sum(model.m1 > 0))
    count *= supp1 ** (N - len(pin_state[0]))
    for t in range(2, model.T + 1):
        n_free = N - len(pin_state[t - 1])
        max_row = max(int(np.sum(row > 0)) for row in model.transition(t))
        count *= float(N * max_row) ** n_free
    return count


def enumerate_conditional_outcomes(model: DiscreteFK, N: int, pins, guard: int = 10**7):
    """Yield (probability, states, ancestors) over all outcomes of a pass.

    ``pins`` is a list of (lineage, path) pairs as in
    :func:`pmcmc_lab.csmc.conditional_system`; an empty list enumerates the
    unconditional pass.  The terminal selection is not included: consumers
    weight over it with the final potential row when they need it.
    """
    from .csmc import _pin_schedule  # shared pin validation

    T = model.T
    for _, path in pins:
        for t, state in enumerate(path, start=1):
            if model.potential(t, state) <= 0:
                raise ZeroPinnedPotential(f"pinned state at time {t} carries zero weight")
    pin_state, pin_anc = _pin_schedule(pins, T, N)
    if _tree_size(model, N, pin_state) > guard:
        raise OutcomeSpaceTooLarge("outcome tree exceeds the enumeration guard")

    m1_support = [(int(s), float(model.m1[s])) for s in np.flatnonzero(model.m1)]

    def rec(t, states, ancestors, prob):
        if t > T:
            yield prob, tuple(states), tuple(ancestors)
            return
        pinned = pin_state[t - 1]
        free = [i for i in range(N) if i not in pinned]
        if t == 1:
            options = [m1_support] * len(free)

            def build(combo):
                row = [None] * N
                for i, st in pinned.items():
                    row[i] = st
                p = 1.0
                for slot, (s, w) in zip(free, combo):
                    row[slot] = s
                    p *= w
                return tuple(row), None, p

        else:
            prev = states[-1]
            g = np.array([model.potential(t - 1, z) for z in prev])
            tot = float(g.sum())
            if tot <= 0:
                raise AllWeightsZero(time=t - 1)
            w = g / tot
            mat = model.transition(t)
            per_free = [
                (k, int(s), float(w[k] * mat[prev[k], s]))
                for k in range(N)
                if w[k] > 0
                for s in np.flatnonzero(mat[prev[k]])
            ]
            options = [per_free] * len(free)

            def build(combo):
                row = [None] * N
                anc = [None] * N
                for i, st in pinned.items():
                    row[i] = st
                    anc[i] = pin_anc[t - 2][i]
                p = 1.0
                for slot, (k, s, pw) in zip(free, combo):
                    row[slot] = s
                    anc[slot] = k
                    p *= pw
                return tuple(row), tuple(anc), p

        for combo in itertools.product(*options):
            row, anc, p = build(combo)
            if p == 0.0:
                continue
            new_states = states + [row]
            new_anc = ancestors + [anc] if anc is not None else ancestors
            yield from rec(t + 1, new_states, new_anc, prob * p)

    yield from rec(1, [], [], 1.0)


def final_selection_weights(model: DiscreteFK, states) -> np.ndarray:
    g = np.array([model.potential(model.T, z) for z in states[-1]])
    tot = float(g.sum())
    if tot <= 0:
        raise AllWeightsZero(time=model.T)
    return g / tot


def trace_lineage(states, ancestors, terminal: int) -> tuple:
    T = len(states)
    idx = terminal
    out = [None] * T
    for t in range(T, 0, -1):
        out[t - 1] = states[t - 1][idx]
        if t > 1:
            idx = ancestors[t - 2][idx]
    return tuple(out)


def kernel_row_tree(model: DiscreteFK, N: int, x, lineage=None, guard: int = 10**6) -> dict:
    """One kernel row through the outcome tree (reference; small cases only)."""
    T = model.T
    lineage = tuple(lineage) if lineage is not None else (0,) * T
    row: dict = {}
    for prob, states, ancestors in enumerate_conditional_outcomes(
        model, N, [(lineage, tuple(x))], guard=guard
    ):
        w = final_selection_weights(model, states)
        for k in np.flatnonzero(w):
            path = trace_lineage(states, ancestors, int(k))
            row[path] = row.get(path, 0.0) + prob * float(w[k])
    return row


# ---------------------------------------------------------------------------
# Path-tuple dynamic program (fast exact kernel rows)
# ---------------------------------------------------------------------------


def kernel_row(model: DiscreteFK, N: int, x, lineage=None, guard: int = 10**7) -> dict:
    """Exact law of the selected path for one starting trajectory.

    ``lineage`` pins the reference to an arbitrary slot sequence (slot 0
    everywhere by default).  Returns a dict path -> probability.
    """
    T = model.T
    x = tuple(x)
    if len(x) != T:
        raise ValueError("trajectory length must equal the horizon")
    for t in range(1, T + 1):
        if model.potential(t, x[t - 1]) <= 0:
            raise ZeroPinnedPotential(f"pinned state at time {t} carries zero weight")
    if N == 1:
        return {x: 1.0}
    lineage = tuple(int(v) for v in lineage) if lineage is not None else (0,) * T

    n_free = N - 1
    # Support-aware work estimate: reachable path counts per time versus the
    # per-particle expansion factor.
    reachable = float(np.sum(model.m1 > 0))
    work = 0.0
    for t in range(2, T + 1):
        max_row = max(int(np.sum(row > 0)) for row in model.transition(t))
        work += reachable**n_free * float(N * max_row) ** n_free
        reachable = min(reachable * max_row, float(model.n_states) ** t)
    if work > guard:
        raise OutcomeSpaceTooLarge("path-tuple sweep exceeds the enumeration guard")

    pin = lineage[0]
    cur: dict = {}
    m1_support = [(int(s), float(model.m1[s])) for s in np.flatnonzero(model.m1)]
    free = [i for i in range(N) if i != pin]
    for combo in itertools.product(m1_support, repeat=n_free):
        paths = [None] * N
        paths[pin] = (x[0],)
        p = 1.0
        for slot, (s, w) in zip(free, combo):
            paths[slot] = (s,)
            p *= w
        key = tuple(paths)
        cur[key] = cur.get(key, 0.0) + p

    for t in range(2, T + 1):
        pin = lineage[t - 1]
        free = [i for i in range(N) if i != pin]
        mat = model.transition(t)
        nxt: dict = {}
        for paths, prob in cur.items():
            last = [p[-1] for p in paths]
            g = np.array([model.potential(t - 1, z) for z in last])
            tot = float(g.sum())
            if tot <= 0:
                raise AllWeightsZero(time=t - 1)
            w = g / tot
            per_free = [
                (paths[k] + (int(s),), float(w[k] * mat[last[k], s]))
                for k in range(N)
                if w[k] > 0
                for s in np.flatnonzero(mat[last[k]])
            ]
            pinned_path = x[: t]
            for combo in itertools.product(per_free, repeat=n_free):
                new_paths = [None] * N
                new_paths[pin] = pinned_path
                p = prob
                for slot, (np_path, pw) in zip(free, combo):
                    new_paths[slot] = np_path
                    p *= pw
                key = tuple(new_paths)
                nxt[key] = nxt.get(key, 0.0) + p
        cur = nxt

    row: dict = {}
    acc: dict = {}
    for paths, prob in cur.items():
        g = np.array([model.potential(T, p[-1]) for p in paths])
        tot = float(g.sum())
        if tot <= 0:
            raise AllWeightsZero(time=T)
        for k in np.flatnonzero(g):
            path = paths[k]
            if path not in acc:
                acc[path] = KahanSum()
            acc[path].add(prob * float(g[k]) / tot)
    for path, s in acc.items():
        row[path] = float(s)
    return row


def _compositions(n: int, probs):
    """Yield (counts, probability) over all multinomial outcomes of n draws."""
    k = len(probs)

    def rec(i, remaining, coeff):
        if i == k - 1:
            if probs[i] == 0.0 and remaining > 0:
                return
            yield (remaining,), coeff * probs[i] ** remaining
            return
        top = remaining if probs[i] > 0 else 0
        for c in range(top + 1):
            factor = math.comb(remaining, c) * probs[i] ** c
            if factor == 0.0:
                continue
            for tail, p in rec(i + 1, remaining - c, coeff * factor):
                yield (c,) + tail, p

    yield from rec(0, n, 1.0)


def kernel_row_multiset(model: DiscreteFK, N: int, x, guard: int = 10**7) -> dict:
    """Exact kernel row using exchangeability of the free particles.

    The pass is collapsed to (pinned path, multiset of free ancestral paths):
    free children are conditionally i.i.d. given the current states, so the
    multiset evolves by multinomial draws.  Polynomial in N; blind to the
    pinned slot sequence (the slot-faithful engine in :func:`kernel_row`
    exists precisely so that this blindness can be tested, not assumed).
    """
    T = model.T
    x = tuple(x)
    for t in range(1, T + 1):
        if model.potential(t, x[t - 1]) <= 0:
            raise ZeroPinnedPotential(f"pinned state at time {t} carries zero weight")
    if N == 1:
        return {x: 1.0}
    n_free = N - 1

    init_types = [(int(s),) for s in np.flatnonzero(model.m1)]
    init_probs = [float(model.m1[s[0]]) for s in init_types]
    cur: dict = {}
    for counts, prob in _compositions(n_free, init_probs):
        cur[counts] = cur.get(counts, 0.0) + prob
    type_list = init_types

    for t in range(2, T + 1):
        mat = model.transition(t)
        g_prev = model.potential_vector(t - 1)
        # Parent types: the pinned path plus the current free types.
        pinned_last = x[t - 2]
        new_type_index: dict = {}
        new_entries: dict = {}
        if len(cur) * _max_compositions(n_free, model) > guard:
            raise OutcomeSpaceTooLarge("multiset sweep exceeds the enumeration guard")
        for counts, prob in cur.items():
            weights = [float(g_prev[pinned_last])] + [
                c * float(g_prev[tp[-1]]) for tp, c in zip(type_list, counts)
            ]
            total = float(sum(weights))
            if total <= 0:
                raise AllWeightsZero(time=t - 1)
            parents = [x[: t - 1]] + list(type_list)
            child_probs: dict = {}
            for w, parent in zip(weights, parents):
                if w == 0:
                    continue
                for s in np.flatnonzero(mat[parent[-1]]):
                    child = parent + (int(s),)
                    child_probs[child] = child_probs.get(child, 0.0) + (
                        w / total
                    ) * float(mat[parent[-1], s])
            child_types = sorted(child_probs)
            probs = [child_probs[c] for c in child_types]
            for child_counts, p in _compositions(n_free, probs):
                full = {}
                for tp, c in zip(child_types, child_counts):
                    if c:
                        full[tp] = c
                key = tuple(sorted(full.items()))
                new_entries[key] = new_entries.get(key, 0.0) + prob * p
        # Normalise the representation: a shared global type list per time.
        all_types = sorted({tp for key in new_entries for tp, _ in key})
        type_list = all_types
        cur = {}
        for key, prob in new_entries.items():
            lookup = dict(key)
            counts = tuple(lookup.get(tp, 0) for tp in all_types)
            cur[counts] = cur.get(counts, 0.0) + prob

    g_final = model.potential_vector(T)
    acc: dict = {}
    for counts, prob in cur.items():
        weights = [float(g_final[x[-1]])] + [
            c * float(g_final[tp[-1]]) for tp, c in zip(type_list, counts)
        ]
        total = float(sum(weights))
        if total <= 0:
            raise AllWeightsZero(time=T)
        paths = [x] + list(type_list)
        for w, path in zip(weights, paths):
            if w == 0:
                continue
            if path not in acc:
                acc[path] = KahanSum()
            acc[path].add(prob * w / total)
    return {path: float(s) for path, s in acc.items()}


def _max_compositions(n_free: int, model: DiscreteFK) -> float:
    types = min(model.n_states ** model.T, 64)
    return float(math.comb(n_free + types - 1, max(types - 1, 1)))


def exact_pn_matrix(
    model: DiscreteFK, N: int, lineage=None, target=None, guard: int = 10**7
) -> FiniteChain:
    """The iterated-pass kernel over all positive-mass paths, enumerated exactly.

    Uses the slot-faithful sweep for small particle counts (and always when a
    pin lineage is supplied); falls back to the exchangeability-collapsed
    sweep for larger N.
    """
    if target is None:
        target = exact_target(model)
    paths = target.paths
    if len(paths) > 3000:
        raise OutcomeSpaceTooLarge(f"{len(paths)} paths exceed the supported matrix size")
    K = np.zeros((len(paths), len(paths)))
    index = {p: i for i, p in enumerate(paths)}
    for i, x in enumerate(paths):
        if lineage is not None:
            row = kernel_row(model, N, x, lineage=lineage, guard=guard)
        else:
            try:
                row = kernel_row(model, N, x, guard=guard)
            except OutcomeSpaceTooLarge:
                row = kernel_row_multiset(model, N, x, guard=guard)
        for path, p in row.items():
            K[i, index[path]] += p
    return FiniteChain(states=paths, kernel=K, stationary=target.probabilities.copy())


# ---------------------------------------------------------------------------
# Expectation of the normalizing-constant estimate under the plain pass
# ---------------------------------------------------------------------------


def exact_gamma_hat_expectation(model: DiscreteFK, N: int, guard: int = 10**6) -> float:
    """E[product of average weights] under the unconditional pass.

    Forward sweep over full particle configurations (S^N of them): the
    configuration chain is Markov and the estimator multiplies one factor
    per time, so the expectation is a finite sum computed exactly.
    """
    S, T = model.n_states, model.T
    if S**N > guard:
        raise OutcomeSpaceTooLarge(f"{S}^{N} particle configurations exceed the guard")
    configs = np.array(list(itertools.product(range(S), repeat=N)), dtype=int)
    m1 = model.m1
    init_prob = np.prod(m1[configs], axis=1)

    def mean_weight(t):
        g = model.potential_vector(t)
        return g[configs].mean(axis=1)

    v = init_prob * mean_weight(1)
    for t in range(2, T + 1):
        g_prev = model.potential_vector(t - 1)[configs]
        tot = g_prev.sum(axis=1)
        live = (v > 0)
        if np.any(live & (tot <= 0)):
            raise AllWeightsZero(time=t - 1)
        w = np.divide(g_prev, tot[:, None], out=np.zeros_like(g_prev), where=tot[:, None] > 0)
        # q[c, s] = chance one child of configuration c lands in state s
        q = np.einsum("ck,cks->cs", w, model.transition(t)[configs])
        trans = np.prod(q[:, configs], axis=2)  # (from, to)
        v = (v @ trans) * mean_weight(t)
    return float(v.sum())


# ---------------------------------------------------------------------------
# Chain analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralSummary:
    """Eigenvalue summary of a reversible kernel.

    ``gap_right`` is one minus the second-largest eigenvalue; ``gap_left``
    measures the distance of the spectrum from -1 on the mean-zero subspace,
    reported as 2 minus the largest normalised Dirichlet ratio (equivalently
    1 plus the smallest eigenvalue).
    """

    gap_right: float
    gap_left: float
    min_eigenvalue: float
    is_positive: bool


def _symmetrized(chain: FiniteChain, tol: float = 1e-9) -> np.ndarray:
    pi = chain.stationary
    if np.any(pi <= 0):
        raise ValueError("spectral analysis requires strictly positive stationary mass")
    flow = pi[:, None] * chain.kernel
    if np.max(np.abs(flow - flow.T)) > tol:
        raise NotReversible(f"detailed balance fails by {np.max(np.abs(flow - flow.T)):.2e}")
    d = np.sqrt(pi)
    sym = (d[:, None] * chain.kernel) / d[None, :]
    return (sym + sym.T) / 2.0


def spectral_summary(chain: FiniteChain) -> SpectralSummary:
    lam = np.linalg.eigvalsh(_symmetrized(chain))
    lam_min = float(lam[0])
    lam_second = float(lam[-2]) if len(lam) >= 2 else 1.0
    return SpectralSummary(
        gap_right=1.0 - lam_second,
        gap_left=1.0 + lam_min,
        min_eigenvalue=lam_min,
        is_positive=bool(lam_min >= -1e-10),
    )


def tv_curve(chain: FiniteChain, x0: int, n_max: int) -> np.ndarray:
    """Exact total-variation distance of the n-step law from stationarity."""
    dist = np.zeros(chain.n_states)
    dist[x0] = 1.0
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        out[n] = 0.5 * float(np.abs(dist - chain.stationary).sum())
        dist = dist @ chain.kernel
    return out


def exact_asymptotic_variance(chain: FiniteChain, f) -> float:
    """Limiting variance of normalised ergodic averages of f, reversible case.

    Spectral form: decompose the symmetrised kernel and sum
    (1+lambda)/(1-lambda) over the mean-zero spectrum.
    """
    sym = _symmetrized(chain)
    lam, vecs = np.linalg.eigh(sym)
    pi = chain.stationary
    f = np.asarray(f, dtype=float)
    f0 = f - float(pi @ f)
    g = np.sqrt(pi) * f0
    coeffs = vecs.T @ g
    var = 0.0
    for lam_k, c in zip(lam, coeffs):
        if c * c <= 1e-24:
            continue
        if lam_k >= 1.0 - 1e-12:
            raise SingularSolve("unit eigenvalue carries mass: chain is not ergodic for f")
        var += c * c * (1.0 + lam_k) / (1.0 - lam_k)
    return float(var)


def asymptotic_variance_general(kernel: np.ndarray, stationary: np.ndarray, f) -> float:
    """Asymptotic variance without assuming reversibility.

    Uses the fundamental-matrix identity: with Z = (I - K + 1 pi)^(-1),
    var = 2 <f0, Z f0>_pi - <f0, f0>_pi for centred f0.
    """
    pi = np.asarray(stationary, dtype=float)
    f = np.asarray(f, dtype=float)
    f0 = f - float(pi @ f)
    n = len(pi)
    m = np.eye(n) - kernel + np.outer(np.ones(n), pi)
    try:
        z = np.linalg.solve(m, f0)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SingularSolve(str(exc)) from exc
    return float(2.0 * (pi * f0) @ z - (pi * f0) @ f0)


def dirichlet_form(chain: FiniteChain, f) -> float:
    """<f, (I-K) f> under the stationary law."""
    pi = chain.stationary
    f = np.asarray(f, dtype=float)
    return float((pi * f) @ (f - chain.kernel @ f))


def l2_distance(chain: FiniteChain, nu) -> float:
    """Chi-square style L2(pi) distance of a probability vector from pi."""
    pi = chain.stationary
    dens = np.asarray(nu, dtype=float) / pi - 1.0
    return float(math.sqrt(np.sum(dens * dens * pi)))


def exact_minorization(chain: FiniteChain) -> float:
    """min over (x, y) of K(x, y) / pi(y): the sharpest uniform minorization."""
    pi = chain.stationary
    if np.any(pi <= 0):
        raise ValueError("minorization requires strictly positive stationary mass")
    return float(np.min(chain.kernel / pi[None, :]))
