"""Pinned-particle SMC passes and the Markov kernel obtained by iterating them.

One pass keeps a full reference trajectory alive: the pinned particle's
states are forced and its parent index always points at its own previous
slot.  Tracing the terminal selection backward through the ancestor rows
yields the next state of the chain.  The pinned slot is 0 everywhere by
default; passes with an arbitrary pinned slot sequence (and passes with two
pinned trajectories, see :mod:`pmcmc_lab.c2smc`) run through the same engine.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import AllWeightsZero, LineageClash, ZeroPinnedPotential
from .rng import SITE_ANCESTOR, SITE_FINAL, SITE_INIT, SITE_MOVE, as_substream
from .smc_core import ParticleSystem, _pick_index, gamma_hat


@dataclass(frozen=True)
class Trajectory:
    """A length-T path, optionally with the particle slots it was read from."""

    points: tuple
    lineage: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if self.lineage is not None:
            object.__setattr__(self, "lineage", tuple(self.lineage))
            if len(self.lineage) != len(self.points):
                raise ValueError("lineage length must match path length")

    def __len__(self) -> int:
        return len(self.points)


def _pin_schedule(pins, T: int, N: int):
    """Merge pinned trajectories into per-time slot/state and slot/parent maps.

    ``pins`` is a list of (lineage, path) pairs; lineages are 0-based slot
    sequences.  Raises LineageClash when two trajectories claim one slot with
    different states, and checks slot validity.
    """
    pin_state = [dict() for _ in range(T)]
    pin_anc = [dict() for _ in range(T - 1)] if T > 1 else []
    for lineage, path in pins:
        if len(lineage) != T or len(path) != T:
            raise ValueError("pinned lineage and path must have length T")
        for t in range(T):
            slot = int(lineage[t])
            if not 0 <= slot < N:
                raise ValueError(f"pinned slot {slot} outside [0, {N})")
            state = path[t]
            if slot in pin_state[t] and pin_state[t][slot] != state:
                raise LineageClash(
                    f"slot {slot} at time {t + 1} pinned to two different states"
                )
            pin_state[t][slot] = state
            if t >= 1:
                prev = int(lineage[t - 1])
                if slot in pin_anc[t - 1] and pin_anc[t - 1][slot] != prev:
                    raise LineageClash(
                        f"slot {slot} at time {t + 1} pinned to two different parents"
                    )
                pin_anc[t - 1][slot] = prev
    return pin_state, pin_anc


def _check_pinned_potentials(model, pins) -> None:
    for _, path in pins:
        for t, state in enumerate(path, start=1):
            if model.potential(t, state) <= 0:
                raise ZeroPinnedPotential(
                    f"pinned state at time {t} carries zero weight"
                )


def conditional_system(model, N: int, pins, rng, base: int = 0) -> ParticleSystem:
    """One pass with the given pinned trajectories; free slots evolve normally."""
    rng = as_substream(rng)
    T = model.T
    _check_pinned_potentials(model, pins)
    pin_state, pin_anc = _pin_schedule(pins, T, N)

    states = []
    ancestors = []
    row = [None] * N
    for i in range(N):
        if i in pin_state[0]:
            row[i] = pin_state[0][i]
        else:
            row[i] = model.sample_initial(rng.stream(base, 1, i, SITE_INIT))
    states.append(tuple(row))

    for t in range(2, T + 1):
        g = np.array([model.potential(t - 1, z) for z in states[-1]])
        if g.sum() <= 0:
            raise AllWeightsZero(time=t - 1)
        anc = [None] * N
        row = [None] * N
        for i in range(N):
            if i in pin_state[t - 1]:
                anc[i] = pin_anc[t - 2][i]
                row[i] = pin_state[t - 1][i]
            else:
                a = _pick_index(g, rng.stream(base, t, i, SITE_ANCESTOR))
                anc[i] = a
                row[i] = model.sample_transition(
                    t, states[-1][a], rng.stream(base, t, i, SITE_MOVE)
                )
        ancestors.append(tuple(anc))
        states.append(tuple(row))

    g_final = np.array([model.potential(T, z) for z in states[-1]])
    if g_final.sum() <= 0:
        raise AllWeightsZero(time=T)
    final = _pick_index(g_final, rng.stream(base, T + 1, 0, SITE_FINAL))

    logg = np.array(
        [[model.log_potential(t, z) for z in states[t - 1]] for t in range(1, T + 1)]
    )
    return ParticleSystem(
        states=tuple(states), ancestors=tuple(ancestors), final_index=final, log_potentials=logg
    )


def run_csmc(model, N: int, x: Trajectory, rng, base: int = 0) -> ParticleSystem:
    """Pass with the reference trajectory pinned to slot 0 throughout.

    With N=1 there are no free particles and the pass replays ``x``.
    """
    if len(x) != model.T:
        raise ValueError(f"trajectory has length {len(x)}, model horizon is {model.T}")
    lineage = (0,) * model.T
    return conditional_system(model, N, [(lineage, tuple(x.points))], rng, base=base)


def select_path(system: ParticleSystem, rng=None) -> Trajectory:
    """Trace the terminal selection backward through the ancestor rows.

    The rng argument is accepted for signature symmetry but unused: systems
    carry their terminal index already.
    """
    T = system.T
    idx = system.final_index
    slots = [0] * T
    points = [None] * T
    for t in range(T, 0, -1):
        slots[t - 1] = idx
        points[t - 1] = system.states[t - 1][idx]
        if t > 1:
            idx = system.ancestors[t - 2][idx]
    return Trajectory(points=tuple(points), lineage=tuple(slots))


def lineage_compatible(system: ParticleSystem, traj: Trajectory) -> bool:
    """Check that a trajectory's slot sequence is an actual ancestral line."""
    if traj.lineage is None:
        return False
    i = traj.lineage
    if i[-1] != system.final_index:
        return False
    for t in range(system.T - 1, 0, -1):
        if system.ancestors[t - 1][i[t]] != i[t - 1]:
            return False
        if system.states[t][i[t]] != traj.points[t]:
            return False
    return system.states[0][i[0]] == traj.points[0]


def artificial_joint_step(model, N: int, x: Trajectory, k, rng, base: int = 0) -> Trajectory:
    """One step of the pass pinned along an arbitrary slot sequence ``k``.

    For multinomial resampling this kernel coincides in law with the slot-0
    kernel; it exists so the coincidence can be tested.
    """
    if len(x) != model.T:
        raise ValueError("trajectory length must equal the horizon")
    k = tuple(int(v) for v in k)
    system = conditional_system(model, N, [(k, tuple(x.points))], rng, base=base)
    return select_path(system)


@dataclass
class ChainTrace:
    """States and per-iteration statistics of one chain run.

    ``states[0]`` is the initial trajectory; row j >= 1 the state after
    iteration j.  ``retained[j]`` counts coordinates kept from the previous
    state, the statistic the escape-probability diagnostics monitor.
    """

    states: np.ndarray          # (n_iter+1, T)
    log_gamma_hats: np.ndarray  # (n_iter,)
    retained: np.ndarray        # (n_iter,)

    @property
    def n_iterations(self) -> int:
        return len(self.log_gamma_hats)

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(points=tuple(int(s) for s in self.states[i]))

    def apply(self, f) -> np.ndarray:
        return np.array([f(self.trajectory(i)) for i in range(len(self.states))])

    def to_csv(self, path) -> None:
        T = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["iteration", "log_gamma_hat", "retained_count"]
                + [f"state_{t}" for t in range(1, T + 1)]
            )
            writer.writerow([0, "", ""] + [int(s) for s in self.states[0]])
            for j in range(self.n_iterations):
                writer.writerow(
                    [j + 1, repr(float(self.log_gamma_hats[j])), int(self.retained[j])]
                    + [int(s) for s in self.states[j + 1]]
                )


def icsmc_chain(model, N: int, x0: Trajectory, n_iter: int, rng) -> ChainTrace:
    """Iterate pass + selection for ``n_iter`` steps starting from ``x0``."""
    rng = as_substream(rng)
    _check_pinned_potentials(model, [((0,) * model.T, tuple(x0.points))])
    T = model.T
    states = np.empty((n_iter + 1, T), dtype=int)
    states[0] = x0.points
    lgh = np.empty(n_iter)
    retained = np.empty(n_iter, dtype=int)
    current = x0
    for step in range(1, n_iter + 1):
        system = run_csmc(model, N, current, rng, base=step)
        nxt = select_path(system)
        lgh[step - 1] = gamma_hat(system).log_value
        retained[step - 1] = sum(
            1 for a, b in zip(current.points, nxt.points) if a == b
        )
        states[step] = nxt.points
        current = nxt
    return ChainTrace(states=states, log_gamma_hats=lgh, retained=retained)
