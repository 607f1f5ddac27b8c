import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures import model, model_a, model_t1, target
from pmcmc_lab import (
    Trajectory,
    alpha_constant,
    beta_delta_constants,
    c2smc_expectation_bruteforce,
    c2smc_expectation_closed_form,
    run_c2smc,
)
from pmcmc_lab.c2smc import IndexChain, index_chains
from pmcmc_lab.errors import HorizonTooLarge, LineageClash, ZeroPotential
from pmcmc_lab.fk_model import build_discrete_model


def test_index_chain_validation():
    IndexChain(s=2, indices=(1, 3))
    with pytest.raises(ValueError):
        IndexChain(s=2, indices=(3, 1))
    with pytest.raises(ValueError):
        IndexChain(s=3, indices=(1, 3))


def test_index_chains_count_is_power_of_two():
    for T in (1, 2, 3, 4):
        assert sum(1 for _ in index_chains(T)) == 2**T


def test_two_particles_no_randomness():
    # With two particles both slots are pinned: the estimate is deterministic.
    m = model_a()
    x, y = Trajectory((0, 0)), Trajectory((1, 1))
    s = run_c2smc(m, 2, x, (1, 1), y, 3)
    assert s.states == ((0, 1), (0, 1))
    expected = ((1 + 2) / 2) * ((1 + 3) / 2)
    assert c2smc_expectation_bruteforce(m, 2, x, y) == pytest.approx(expected, rel=1e-14)
    assert c2smc_expectation_closed_form(m, 2, x, y) == pytest.approx(expected, rel=1e-14)


def test_lineage_clash_detected():
    m = model_a()
    with pytest.raises(LineageClash):
        run_c2smc(m, 3, Trajectory((0, 0)), (0, 1), Trajectory((1, 1)), 0)


def test_shared_slot_allowed_when_paths_agree():
    m = model_a()
    s = run_c2smc(m, 3, Trajectory((0, 1)), (0, 0), Trajectory((0, 1)), 1)
    assert s.states[0][0] == 0 and s.states[1][0] == 1


def test_free_particle_matches_initial_law():
    m = model_t1()
    counts = np.zeros(2)
    R = 20_000
    for seed in range(R):
        s = run_c2smc(m, 3, Trajectory((0,)), (1,), Trajectory((1,)), seed)
        counts[s.states[0][2]] += 1
    freq = counts / R
    sd = np.sqrt(0.25 / R)
    assert abs(freq[0] - 0.5) < 5 * sd


def test_single_time_hand_expansion():
    m = model_t1()
    x, y = (0,), (1,)
    assert c2smc_expectation_closed_form(m, 3, x, y) == pytest.approx(2.0, rel=1e-14)
    assert c2smc_expectation_bruteforce(m, 3, x, y) == pytest.approx(2.0, rel=1e-14)


def test_unit_weights_give_unit_expectation():
    m = build_discrete_model(
        [0, 1], [0.5, 0.5], [[[0.5, 0.5], [0.5, 0.5]]], [[1, 1], [1, 1]]
    )
    for N in (2, 3, 5):
        assert c2smc_expectation_closed_form(m, N, (0, 0), (1, 1)) == pytest.approx(1.0)
        if N <= 3:
            assert c2smc_expectation_bruteforce(m, N, (0, 0), (1, 1)) == pytest.approx(1.0)


def test_evaluation_strategies_agree():
    for name in ("A", "B", "D", "E"):
        m = model(name)
        paths = target(name).paths
        for x, y in itertools.islice(itertools.product(paths, paths), 12):
            for N in (2, 3, 7):
                a = c2smc_expectation_closed_form(m, N, x, y, method="chains")
                b = c2smc_expectation_closed_form(m, N, x, y, method="recursion")
                assert a == pytest.approx(b, rel=1e-12)


def test_horizon_guard_on_chain_enumeration():
    m = model("B")
    with pytest.raises(HorizonTooLarge):
        c2smc_expectation_closed_form(m, 3, (0, 0, 0), (1, 1, 1), method="chains", max_horizon=2)


def test_bounded_weight_envelope():
    # closed form <= gamma * (1 + [1-(1-2/N)^T][prod(sup G)/gamma - 1])
    from pmcmc_lab.fk_model import sup_potentials

    for name in ("A", "B", "C", "D", "E"):
        m = model(name)
        gamma = target(name).gamma_t
        ratio = float(np.prod(sup_potentials(m))) / gamma
        for N in (2, 3, 5, 9):
            envelope = gamma * (1 + (1 - (1 - 2 / N) ** m.T) * (ratio - 1))
            for x in target(name).paths:
                for y in target(name).paths[:2]:
                    v = c2smc_expectation_closed_form(m, N, x, y)
                    assert v <= envelope * (1 + 1e-12)


def test_overshoot_envelope():
    # closed form <= gamma * (1 + 2(alpha-1)/N)^T
    for name in ("A", "B", "D"):
        m = model(name)
        gamma = target(name).gamma_t
        alpha = alpha_constant(m)
        for N in (2, 3, 6):
            envelope = gamma * (1 + 2 * (alpha - 1) / N) ** m.T
            for x in target(name).paths:
                for y in target(name).paths:
                    v = c2smc_expectation_closed_form(m, N, x, y)
                    assert v <= envelope * (1 + 1e-12)


def test_alpha_is_one_for_flat_models():
    m = build_discrete_model(
        [0, 1], [0.4, 0.6], [[[0.4, 0.6], [0.4, 0.6]]], [[2, 2], [1, 1]]
    )
    # state-independent transitions and constant weights
    assert alpha_constant(m) == pytest.approx(1.0, abs=1e-14)


def test_alpha_canonical_value():
    assert alpha_constant(model_a()) == pytest.approx(40 / 26, rel=1e-12)


def test_beta_delta_canonical_values():
    mc = beta_delta_constants(model_a(), 1)
    assert mc.beta == pytest.approx(3.0)
    assert mc.delta == pytest.approx(3.0)
    assert mc.alpha <= mc.beta * mc.delta


def test_beta_one_for_state_independent_rows():
    m = build_discrete_model(
        [0, 1], [0.5, 0.5], [[[0.3, 0.7], [0.3, 0.7]]], [[1, 2], [2, 1]]
    )
    mc = beta_delta_constants(m, 1)
    assert mc.beta == pytest.approx(1.0)


def test_delta_one_for_constant_weights():
    m = build_discrete_model(
        [0, 1], [0.5, 0.5], [[[0.75, 0.25], [0.25, 0.75]]], [[2, 2], [5, 5]]
    )
    mc = beta_delta_constants(m, 1)
    assert mc.delta == pytest.approx(1.0)


def test_delta_requires_positive_weights():
    m = build_discrete_model([0, 1], [0.5, 0.5], [], [[1.0, 0.0]])
    with pytest.raises(ZeroPotential):
        beta_delta_constants(m, 1)


def test_beta_infinite_on_disjoint_rows():
    from pmcmc_lab.errors import ZeroTransitionOverlap

    m = build_discrete_model(
        [0, 1], [0.5, 0.5], [[[1.0, 0.0], [0.0, 1.0]]], [[1, 1], [1, 2]]
    )
    with pytest.raises(ZeroTransitionOverlap):
        beta_delta_constants(m, 1)


def test_overshoot_below_spread_product_all_lags():
    for name in ("A", "B", "D", "E"):
        m = model(name)
        alpha = alpha_constant(m)
        for lag in range(1, m.T + 1):
            mc = beta_delta_constants(m, lag)
            assert alpha <= mc.beta * mc.delta


@st.composite
def tiny_models(draw):
    S = draw(st.integers(2, 3))
    T = draw(st.integers(1, 3))
    def vec(n, lo=0.1, hi=3.0):
        return [draw(st.floats(lo, hi)) for _ in range(n)]
    m1 = np.array(vec(S)); m1 /= m1.sum()
    mats = []
    for _ in range(T - 1):
        rows = []
        for _ in range(S):
            row = np.array(vec(S)); rows.append((row / row.sum()).tolist())
        mats.append(rows)
    gs = [vec(S) for _ in range(T)]
    m = build_discrete_model(list(range(S)), m1.tolist(), mats, gs)
    paths = [draw(st.sampled_from(range(S))) for _ in range(2 * T)]
    return m, tuple(paths[:T]), tuple(paths[T:]), draw(st.sampled_from([2, 3]))


@settings(max_examples=30, deadline=None)
@given(tiny_models())
def test_property_closed_form_equals_enumeration(case):
    m, x, y, N = case
    closed = c2smc_expectation_closed_form(m, N, x, y)
    brute = c2smc_expectation_bruteforce(m, N, x, y)
    assert closed == pytest.approx(brute, rel=1e-10)
