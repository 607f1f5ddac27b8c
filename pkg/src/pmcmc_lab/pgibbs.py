"""Two-stage Gibbs samplers, their pinned-particle approximations, and the
exact comparison machinery between the two.

A :class:`JointModel` couples a finite parameter set with one path model per
parameter value.  The ideal sampler alternates exact draws of the parameter
given the path and of the path given the parameter; the particle version
replaces the path draw by one pinned-particle pass.  Because the parameter
set and every path space are finite here, both kernels are enumerated
exactly, and the Dirichlet-form / spectral-gap / asymptotic-variance
orderings between them are checked as matrix inequalities.

``rho_constants`` computes the weighted-gap constant governing those
orderings: the infimum over functions of the gap-weighted conditional
variance ratio, solved as a generalized eigenvalue problem on the range of
the average conditional covariance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .csmc import Trajectory, run_csmc, select_path
from .fk_model import exact_target, model_from_dict, sup_potentials
from .errors import (
    AssertionFailure,
    DegenerateB,
    DimensionMismatch,
    StateSpaceTooLarge,
)
from .exact_oracle import (
    FiniteChain,
    asymptotic_variance_general,
    dirichlet_form,
    exact_asymptotic_variance,
    exact_minorization,
    exact_pn_matrix,
    spectral_summary,
)
from .rng import SITE_ACCEPT, SITE_THETA, as_substream
from .smc_core import gamma_hat, run_smc


@dataclass(frozen=True)
class JointModel:
    """Finite parameter set, prior, and one path model per parameter value."""

    thetas: tuple
    prior: np.ndarray
    models: tuple

    def __post_init__(self):
        if len(self.thetas) != len(self.models) or len(self.thetas) != len(self.prior):
            raise DimensionMismatch("one model and one prior weight per parameter value")
        base = self.models[0]
        for m in self.models[1:]:
            if m.T != base.T or m.alphabet != base.alphabet:
                raise DimensionMismatch("all path models must share horizon and alphabet")
        if abs(float(self.prior.sum()) - 1.0) > 1e-12 or np.any(self.prior < 0):
            raise DimensionMismatch("prior must be a probability vector")

    @property
    def J(self) -> int:
        return len(self.thetas)

    @property
    def T(self) -> int:
        return self.models[0].T


def build_joint_model(thetas, prior, models) -> JointModel:
    return JointModel(
        thetas=tuple(thetas), prior=np.asarray(prior, dtype=float), models=tuple(models)
    )


def joint_model_from_dict(d: dict) -> JointModel:
    models = [
        model_from_dict({"T": d.get("T"), "alphabet": d["alphabet"], **md}) for md in d["models"]
    ]
    return build_joint_model(d["thetas"], d["prior"], models)


def load_joint_model(path) -> JointModel:
    with open(path) as fh:
        return joint_model_from_dict(json.load(fh))


@dataclass(frozen=True)
class JointEnumeration:
    """Exact joint, conditional and marginal laws of a joint model."""

    jm: JointModel
    paths: tuple                 # union of per-parameter support paths
    joint: np.ndarray            # (J, n_paths) joint probabilities
    theta_marginal: np.ndarray   # (J,)
    x_marginal: np.ndarray       # (n_paths,)
    cond_paths: np.ndarray       # (J, n_paths): path law given the parameter
    cond_theta: np.ndarray       # (n_paths, J): parameter law given the path
    gammas: np.ndarray           # (J,) per-parameter normalizing constants

    def path_index(self, path) -> int:
        return self.paths.index(tuple(path))


def enumerate_joint(jm: JointModel, guard: int = 10**4) -> JointEnumeration:
    targets = [exact_target(m) for m in jm.models]
    paths = sorted({p for t in targets for p in t.paths})
    if len(paths) * jm.J > guard:
        raise StateSpaceTooLarge("joint state space exceeds the enumeration guard")
    index = {p: i for i, p in enumerate(paths)}
    n = len(paths)
    cond = np.zeros((jm.J, n))
    gammas = np.array([t.gamma_t for t in targets])
    for j, t in enumerate(targets):
        for p, pr in zip(t.paths, t.probabilities):
            cond[j, index[p]] = pr
    joint = (jm.prior * gammas)[:, None] * cond
    joint /= joint.sum()
    theta_marginal = joint.sum(axis=1)
    x_marginal = joint.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond_theta = np.where(x_marginal[None, :] > 0, joint / x_marginal[None, :], 0.0).T
    return JointEnumeration(
        jm=jm,
        paths=tuple(paths),
        joint=joint,
        theta_marginal=theta_marginal,
        x_marginal=x_marginal,
        cond_paths=cond,
        cond_theta=cond_theta,
        gammas=gammas,
    )


# ---------------------------------------------------------------------------
# Exact kernels
# ---------------------------------------------------------------------------


def _joint_states(enum: JointEnumeration):
    """(parameter, path) pairs with positive joint mass, with their probs."""
    states = []
    probs = []
    for j in range(enum.jm.J):
        for i, p in enumerate(enum.paths):
            if enum.joint[j, i] > 0:
                states.append((j, i))
                probs.append(enum.joint[j, i])
    return states, np.array(probs)


def exact_gibbs_matrices(jm: JointModel, guard: int = 10**4):
    """The ideal two-stage sampler on the joint space and its path marginal."""
    enum = enumerate_joint(jm, guard=guard)
    return _compose_kernels(enum, conditional_kernels=None), enum


def exact_phi_matrices(jm: JointModel, N: int | None, guard: int = 10**4):
    """The particle version: the path draw is one pinned pass per parameter.

    With ``N=None`` the exact conditional is used instead, which reproduces
    the ideal sampler (the infinite-particle limit).
    """
    enum = enumerate_joint(jm, guard=guard)
    if N is None:
        return _compose_kernels(enum, conditional_kernels=None), enum
    kernels = []
    for j, m in enumerate(jm.models):
        target = exact_target(m)
        chain = exact_pn_matrix(m, N, target=target)
        kernels.append((chain, {p: i for i, p in enumerate(chain.states)}))
    return _compose_kernels(enum, conditional_kernels=kernels), enum


def _compose_kernels(enum: JointEnumeration, conditional_kernels):
    """Build the joint kernel and its path-marginal kernel.

    The path update given parameter j is either the exact conditional law
    (ideal sampler) or the enumerated pinned-pass kernel.
    """
    n = len(enum.paths)
    J = enum.jm.J

    def path_update(j, i):
        """Law of the next path when the parameter is j and the path is i."""
        if conditional_kernels is None:
            return enum.cond_paths[j]
        chain, idx = conditional_kernels[j]
        out = np.zeros(n)
        local = idx[enum.paths[i]]
        row = chain.kernel[local]
        for p_local, pr in enumerate(row):
            out[enum.path_index(chain.states[p_local])] = pr
        return out

    # Path-marginal kernel.
    kx = np.zeros((n, n))
    for i in range(n):
        if enum.x_marginal[i] <= 0:
            kx[i, i] = 1.0
            continue
        for j in range(J):
            w = enum.cond_theta[i, j]
            if w > 0:
                kx[i] += w * path_update(j, i)

    # Joint kernel over (parameter, path) states with positive mass.
    states, probs = _joint_states(enum)
    k_joint = np.zeros((len(states), len(states)))
    pos = {s: a for a, s in enumerate(states)}
    for a, (j0, i) in enumerate(states):
        for j in range(J):
            w = enum.cond_theta[i, j]
            if w <= 0:
                continue
            upd = path_update(j, i)
            for i2 in np.flatnonzero(upd):
                k_joint[a, pos[(j, int(i2))]] += w * float(upd[i2])

    mask = enum.x_marginal > 0
    chain_x = FiniteChain(
        states=tuple(p for p, keep in zip(enum.paths, mask) if keep),
        kernel=kx[np.ix_(mask, mask)],
        stationary=enum.x_marginal[mask],
    )
    chain_joint = FiniteChain(
        states=tuple((enum.jm.thetas[j], enum.paths[i]) for j, i in states),
        kernel=k_joint,
        stationary=probs,
    )
    return chain_joint, chain_x


# ---------------------------------------------------------------------------
# The weighted-gap constant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RhoEstimate:
    rho_exact: float
    rho_lower: float

    def __post_init__(self):
        if not -1e-10 <= self.rho_lower <= self.rho_exact + 1e-10:
            raise ValueError("weighted-gap constant below its lower bound")
        if self.rho_exact > 1.0 + 1e-10:
            raise ValueError("weighted-gap constant above 1")


def _conditional_covariance(enum: JointEnumeration, j: int) -> np.ndarray:
    p = enum.cond_paths[j]
    return np.diag(p) - np.outer(p, p)


def rho_constants(jm: JointModel, N: int, guard: int = 10**4, rank_tol: float = 1e-12) -> RhoEstimate:
    """Exact weighted-gap constant and its min-gap lower bound.

    rho = inf_f sum_j pi(j) var_j(f) gap_j / sum_j pi(j) var_j(f), computed
    as the smallest generalized eigenvalue of (A, B) on the range of B with
    A, B the gap-weighted and plain averages of conditional covariances.
    """
    enum = enumerate_joint(jm, guard=guard)
    gaps = np.empty(jm.J)
    for j, m in enumerate(jm.models):
        chain = exact_pn_matrix(m, N, target=exact_target(m))
        # Embed into the global path list so covariances share coordinates.
        gaps[j] = spectral_summary(chain).gap_right
    a = np.zeros((len(enum.paths),) * 2)
    b = np.zeros_like(a)
    for j in range(jm.J):
        c = _conditional_covariance(enum, j)
        a += enum.theta_marginal[j] * gaps[j] * c
        b += enum.theta_marginal[j] * c
    lam, vecs = np.linalg.eigh(b)
    keep = lam > rank_tol * max(lam.max(), 1.0)
    if not np.any(keep):
        raise DegenerateB("every conditional law is a point mass")
    w = vecs[:, keep] / np.sqrt(lam[keep])
    reduced = w.T @ a @ w
    rho_exact = float(np.min(np.linalg.eigvalsh((reduced + reduced.T) / 2.0)))
    return RhoEstimate(rho_exact=min(rho_exact, 1.0 + 1e-12), rho_lower=float(gaps.min()))


# ---------------------------------------------------------------------------
# Ordering checks
# ---------------------------------------------------------------------------


@dataclass
class CheckReport:
    """Outcome of one inequality suite: worst slack per named inequality."""

    entries: list

    def worst(self) -> tuple:
        return max(self.entries, key=lambda e: e[1])

    def __iter__(self):
        return iter(self.entries)


def _basis(n: int):
    for i in range(n):
        f = np.zeros(n)
        f[i] = 1.0
        yield i, f


def check_x_chain_orderings(jm: JointModel, N: int, slack: float = 1e-9) -> CheckReport:
    """Dirichlet, gap and variance orderings between the ideal and particle
    path chains, for every indicator basis function.

    Raises AssertionFailure naming the first violated inequality.
    """
    (_, gamma_x), _ = exact_gibbs_matrices(jm)
    (_, phi_x), _ = exact_phi_matrices(jm, N)
    rho = rho_constants(jm, N)
    eps_uniform = min(
        exact_minorization(exact_pn_matrix(m, N, target=exact_target(m))) for m in jm.models
    )
    pi = gamma_x.stationary
    entries = []

    def record(name, violation, witness):
        entries.append((name, float(violation), witness))
        if violation > slack:
            raise AssertionFailure(name, witness=witness, violation=float(violation))

    gap_g = spectral_summary(gamma_x).gap_right
    gap_p = spectral_summary(phi_x).gap_right
    record("gap_upper: Gap(particle) <= 2 Gap(ideal)", gap_p - 2.0 * gap_g, None)
    record("gap_lower: Gap(particle) >= rho Gap(ideal)", rho.rho_exact * gap_g - gap_p, None)
    record("rho_order: rho_exact >= rho_lower", rho.rho_lower - rho.rho_exact, None)

    for i, f in _basis(gamma_x.n_states):
        var_pi = float((pi * f) @ f - (pi @ f) ** 2)
        e_g = dirichlet_form(gamma_x, f)
        e_p = dirichlet_form(phi_x, f)
        record("dirichlet_upper: E_particle <= 2 E_ideal", e_p - 2.0 * e_g, i)
        record("dirichlet_lower: E_particle >= rho E_ideal", rho.rho_exact * e_g - e_p, i)
        v_g = exact_asymptotic_variance(gamma_x, f)
        v_p = exact_asymptotic_variance(phi_x, f)
        record("var_nonneg: var(particle) >= 0", -v_p, i)
        record(
            "var_lower_half: (var(ideal) - var_pi)/2 <= var(particle)",
            (v_g - var_pi) / 2.0 - v_p,
            i,
        )
        record(
            "var_upper: var(particle) <= (1/rho - 1) var_pi + var(ideal)/rho",
            v_p - ((1.0 / rho.rho_exact - 1.0) * var_pi + v_g / rho.rho_exact),
            i,
        )
        record(
            "var_lower_minorized: (var(ideal) - (1-eps) var_pi)/(2-eps) <= var(particle)",
            (v_g - (1.0 - eps_uniform) * var_pi) / (2.0 - eps_uniform) - v_p,
            i,
        )
        record("var_lower_positive: var(ideal) <= var(particle)", v_g - v_p, i)
    return CheckReport(entries=entries)


def check_theta_chain_identities(
    jm: JointModel,
    N: int,
    f_theta,
    k_max: int = 10,
    tol_identity: float = 1e-10,
    tol_variance: float = 1e-9,
) -> CheckReport:
    """Shift identities and variance decomposition for parameter functions.

    For f depending on the parameter only: the k-step joint autocovariance
    equals the (k-1)-step path autocovariance of the conditional mean, the
    asymptotic variance splits into the static parts plus the path-chain
    variance of the conditional mean, and the weighted-gap constant bounds
    hold.  The last entry checks rho against the bounded-weight constant of
    the worst parameter value.
    """
    f = np.asarray(f_theta, dtype=float)
    (gamma_joint, gamma_x), enum = exact_gibbs_matrices(jm)
    (phi_joint, phi_x), _ = exact_phi_matrices(jm, N)
    rho = rho_constants(jm, N)
    entries = []

    def record(name, violation, tol, witness=None):
        entries.append((name, float(violation), witness))
        if violation > tol:
            raise AssertionFailure(name, witness=witness, violation=float(violation))

    # Lift f to the joint state lists and average it over the conditional.
    theta_pos = {th: j for j, th in enumerate(jm.thetas)}
    f_phi = np.array([f[theta_pos[th]] for th, _ in phi_joint.states])
    f_gamma = np.array([f[theta_pos[th]] for th, _ in gamma_joint.states])
    pi_joint = phi_joint.stationary
    fbar = np.array(
        [float(enum.cond_theta[enum.path_index(p)] @ f) for p in gamma_x.states]
    )
    pi_x = gamma_x.stationary

    # k-step autocovariance shift: joint chain vs path chain of the
    # conditional mean.
    acc_joint = f_phi.copy()
    acc_x = fbar.copy()
    for k in range(1, k_max + 1):
        acc_joint = phi_joint.kernel @ acc_joint
        lhs = float((pi_joint * f_phi) @ acc_joint)
        rhs = float((pi_x * fbar) @ acc_x)
        record(f"shift_identity_k{k}", abs(lhs - rhs), tol_identity, witness=k)
        acc_x = phi_x.kernel @ acc_x

    # var(f, joint) = var_pi(f) + var_pi(fbar) + var(fbar, path chain).
    var_pi_f = float((enum.theta_marginal * f) @ f - (enum.theta_marginal @ f) ** 2)
    var_pi_fbar = float((pi_x * fbar) @ fbar - (pi_x @ fbar) ** 2)
    v_joint = asymptotic_variance_general(phi_joint.kernel, pi_joint, f_phi)
    v_fbar = exact_asymptotic_variance(phi_x, fbar)
    record(
        "variance_decomposition",
        abs(v_joint - (var_pi_f + var_pi_fbar + v_fbar)),
        tol_variance,
    )

    # Upper bounds via the weighted-gap constant; lower via operator positivity.
    v_fbar_ideal = exact_asymptotic_variance(gamma_x, fbar)
    upper1 = var_pi_f + var_pi_fbar / rho.rho_exact + v_fbar_ideal / rho.rho_exact
    record("var_theta_upper_rho", v_joint - upper1, tol_variance)
    v_joint_ideal = asymptotic_variance_general(
        gamma_joint.kernel, gamma_joint.stationary, f_gamma
    )
    upper2 = (1.0 - 1.0 / rho.rho_exact) * var_pi_f + v_joint_ideal / rho.rho_exact
    record("var_theta_upper_gamma", v_joint - upper2, tol_variance)
    record("var_theta_lower_positive", v_joint_ideal - v_joint, tol_variance)

    # The weighted-gap constant dominates the bounded-weight constant of the
    # worst parameter value.
    worst_ratio = max(
        float(np.prod(sup_potentials(m))) / exact_target(m).gamma_t for m in jm.models
    )
    t_horizon = jm.T
    eps = (1.0 - 1.0 / N) ** t_horizon / (
        1.0 + (1.0 - (1.0 - 2.0 / N) ** t_horizon) * (worst_ratio - 1.0)
    )
    record("rho_vs_uniform_bound", eps - rho.rho_exact, tol_variance)
    return CheckReport(entries=entries)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def pgibbs_step(jm: JointModel, N: int, theta_idx: int, x: Trajectory, rng, base: int = 0):
    """Exact parameter draw given the path, then one pinned pass at the new
    parameter value."""
    rng = as_substream(rng)
    enum = enumerate_joint(jm)
    i = enum.path_index(tuple(x.points))
    weights = enum.cond_theta[i]
    gen = rng.stream(base, 0, 0, SITE_THETA)
    cdf = np.cumsum(weights)
    new_theta = int(min(np.searchsorted(cdf, gen.random() * cdf[-1], side="right"), jm.J - 1))
    system = run_csmc(jm.models[new_theta], N, x, rng, base=base)
    return new_theta, select_path(system)


@dataclass(frozen=True)
class PimhState:
    path: Trajectory
    log_gamma_hat: float


def pimh_step(model, N: int, current: PimhState, rng, base: int = 0):
    """Propose a fresh pass; accept with the ratio of estimates."""
    rng = as_substream(rng)
    system = run_smc(model, N, rng, base=base)
    proposal = PimhState(path=select_path(system), log_gamma_hat=gamma_hat(system).log_value)
    gen = rng.stream(base, model.T + 2, 0, SITE_ACCEPT)
    log_u = float(np.log(gen.random()))
    if log_u < proposal.log_gamma_hat - current.log_gamma_hat:
        return proposal, True
    return current, False


@dataclass(frozen=True)
class PmmhState:
    theta_idx: int
    log_gamma_hat: float


def pmmh_step(jm: JointModel, N: int, proposal_q, current: PmmhState, rng, base: int = 0):
    """Marginal accept/reject on the parameter with estimated constants.

    ``proposal_q`` is a row-stochastic matrix over the parameter values.
    """
    rng = as_substream(rng)
    q = np.asarray(proposal_q, dtype=float)
    gen = rng.stream(base, 0, 0, SITE_THETA)
    row = q[current.theta_idx]
    cdf = np.cumsum(row)
    cand = int(min(np.searchsorted(cdf, gen.random() * cdf[-1], side="right"), jm.J - 1))
    system = run_smc(jm.models[cand], N, rng, base=base)
    log_g = gamma_hat(system).log_value
    prior = jm.prior
    num = np.log(prior[cand]) + np.log(q[cand, current.theta_idx]) + log_g
    den = np.log(prior[current.theta_idx]) + np.log(row[cand]) + current.log_gamma_hat
    gen_acc = rng.stream(base, jm.T + 2, 0, SITE_ACCEPT)
    if float(np.log(gen_acc.random())) < num - den:
        return PmmhState(theta_idx=cand, log_gamma_hat=log_g), True
    return current, False
