"""Reward families, synthetic bandit instances, and reward-matrix ingestion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graphs import Graph, knn_graph

POISSON_CLIP = 20.0  # linear predictor clamp; never binds while |<x,theta>| <= 1


class IngestionError(ValueError):
    """Reward-matrix file could not be parsed into a dense numeric table."""


@dataclass(frozen=True)
class LinkFamily:
    """Canonical GLM reward family.

    ``b`` is the log-partition, ``mu = b'`` the inverse link and ``mu_prime``
    its derivative; ``c_mu <= mu'(z) <= k_mu`` on [-1, 1].  ``omega`` is the
    noise scale used in confidence widths (exact for linear, a working
    sub-Gaussian constant for the discrete families).
    """

    name: str
    b: Callable[[np.ndarray], np.ndarray]
    mu: Callable[[np.ndarray], np.ndarray]
    mu_prime: Callable[[np.ndarray], np.ndarray]
    c_mu: float
    k_mu: float
    a_mu: float
    r_max: float
    omega: float
    phi: float = 1.0


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float)))


def _clip(z):
    return np.clip(np.asarray(z, dtype=float), -POISSON_CLIP, POISSON_CLIP)


def family_linear(omega: float = 0.01, a_mu: float | None = None) -> LinkFamily:
    if omega <= 0:
        raise ValueError(f"noise scale must be > 0, got {omega}")
    return LinkFamily(
        name="linear",
        b=lambda z: np.asarray(z, dtype=float) ** 2 / 2.0,
        mu=lambda z: np.asarray(z, dtype=float),
        mu_prime=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        c_mu=1.0,
        k_mu=1.0,
        a_mu=1.0 if a_mu is None else a_mu,
        r_max=1.0,
        omega=omega,
    )


def family_logistic(omega: float = 0.5, a_mu: float | None = None) -> LinkFamily:
    s1 = float(_sigmoid(1.0))
    c_mu = s1 * (1.0 - s1)  # mu' minimized at the interval ends
    return LinkFamily(
        name="logistic",
        b=lambda z: np.logaddexp(0.0, np.asarray(z, dtype=float)),
        mu=_sigmoid,
        mu_prime=lambda z: _sigmoid(z) * (1.0 - _sigmoid(z)),
        c_mu=c_mu,
        k_mu=0.25,
        a_mu=0.25**2 if a_mu is None else a_mu,
        r_max=0.5 + 0.25,
        omega=omega,
    )


def family_poisson(omega: float | None = None, a_mu: float | None = None) -> LinkFamily:
    e = math.e
    return LinkFamily(
        name="poisson",
        b=lambda z: np.exp(_clip(z)),
        mu=lambda z: np.exp(_clip(z)),
        mu_prime=lambda z: np.exp(_clip(z)),
        c_mu=1.0 / e,
        k_mu=e,
        a_mu=e**2 if a_mu is None else a_mu,
        r_max=1.0 + e,
        omega=math.sqrt(e) if omega is None else omega,
    )


FAMILY_BUILDERS = {
    "linear": family_linear,
    "logistic": family_logistic,
    "poisson": family_poisson,
}


@dataclass(frozen=True)
class TrueParameter:
    """Rank-r ground truth with its thin SVD factors."""

    theta: np.ndarray  # d1 x d2, Frobenius norm <= 1
    rank: int
    u: np.ndarray  # d1 x r
    s: np.ndarray  # r singular values
    v: np.ndarray  # d2 x r
    c_r: float  # r-th singular value


@dataclass(frozen=True)
class BanditInstance:
    """A fixed action set, ground truth, action graph, and reward family."""

    actions: tuple[np.ndarray, ...]
    stack: np.ndarray  # n x (d1*d2); row i = vec(actions[i])
    true_param: TrueParameter
    graph: Graph
    family: LinkFamily
    sampling_gamma: float
    expected_z: np.ndarray = field(repr=False, default=None)
    expected_rewards: np.ndarray = field(repr=False, default=None)
    optimal_index: int = 0

    @property
    def n(self) -> int:
        return len(self.actions)

    @property
    def d1(self) -> int:
        return self.actions[0].shape[0]

    @property
    def d2(self) -> int:
        return self.actions[0].shape[1]

    def top_set(self, percent: float) -> np.ndarray:
        """Indices of the top-percent actions by expected reward.

        Set size is ceil(percent/100 * n); expected-reward ties break toward
        the lower index.
        """
        if not 0.0 < percent < 100.0:
            raise ValueError(f"percentile must lie in (0, 100), got {percent}")
        m = math.ceil(percent / 100.0 * self.n)
        order = np.lexsort((np.arange(self.n), -self.expected_rewards))
        return np.sort(order[:m])


def assemble_instance(actions, true_param, graph, family, gamma=1.0) -> BanditInstance:
    """Wire pre-built parts into an instance, precomputing expected rewards."""
    stack = np.stack([a.ravel() for a in actions])
    z = stack @ true_param.theta.ravel()
    rewards = np.asarray(family.mu(z), dtype=float)
    return BanditInstance(
        actions=tuple(actions),
        stack=stack,
        true_param=true_param,
        graph=graph,
        family=family,
        sampling_gamma=gamma,
        expected_z=z,
        expected_rewards=rewards,
        optimal_index=int(np.argmax(rewards)),
    )


def make_actions_gaussian(n: int, d1: int, d2: int, rng: np.random.Generator):
    """n i.i.d. standard normal d1 x d2 matrices, each scaled to unit Frobenius norm."""
    if min(n, d1, d2) < 1:
        raise ValueError("n, d1, d2 must all be >= 1")
    out = []
    for _ in range(n):
        x = rng.normal(size=(d1, d2))
        out.append(x / np.linalg.norm(x))
    return out


def make_actions_outer(n1: int, n2: int, d1: int, d2: int, rng: np.random.Generator):
    """n1*n2 rank-1 actions outer(p_i, q_j), unit-normalized, index l = i*n2 + j."""
    if min(n1, n2, d1, d2) < 1:
        raise ValueError("n1, n2, d1, d2 must all be >= 1")
    ps = rng.normal(size=(n1, d1))
    qs = rng.normal(size=(n2, d2))
    out = []
    for i in range(n1):
        for j in range(n2):
            x = np.outer(ps[i], qs[j])
            out.append(x / np.linalg.norm(x))
    return out


def make_theta(
    d1: int,
    d2: int,
    r: int,
    row_graph: Graph,
    col_graph: Graph,
    rng: np.random.Generator,
    eps: float = 1e-6,
) -> TrueParameter:
    """Graph-whitened rank-r ground truth, unit Frobenius norm.

    M = U V^T with standard normal factors is pre- and post-multiplied by
    inverse square roots of the (floored) row/column graph Laplacians, so the
    signal concentrates on the smooth eigendirections of those graphs.
    """
    from .graphs import laplacian  # local import keeps module load cheap

    if r > min(d1, d2):
        raise ValueError(f"rank {r} exceeds min(d1, d2) = {min(d1, d2)}")
    if eps <= 0:
        raise ValueError(f"eigenvalue floor must be > 0, got {eps}")
    if row_graph.n != d1 or col_graph.n != d2:
        raise ValueError("row/column graph sizes must match d1/d2")
    m = rng.normal(size=(d1, r)) @ rng.normal(size=(d2, r)).T
    sw, uw = np.linalg.eigh(laplacian(row_graph))
    sh, uh = np.linalg.eigh(laplacian(col_graph))
    a = uw @ np.diag(1.0 / np.sqrt(sw + eps))
    b = uh @ np.diag(1.0 / np.sqrt(sh + eps))
    theta = a @ m @ b.T
    theta = theta / np.linalg.norm(theta)
    u, s, vt = np.linalg.svd(theta)
    return TrueParameter(
        theta=theta, rank=r, u=u[:, :r], s=s[:r], v=vt[:r].T, c_r=float(s[r - 1])
    )


def score_standard_normal(x: np.ndarray) -> np.ndarray:
    """Score -grad log p(x) of the standard normal density: the identity map."""
    return np.asarray(x, dtype=float)


def expected_reward(x: np.ndarray, inst: BanditInstance) -> float:
    return float(inst.family.mu(float(np.sum(x * inst.true_param.theta))))


def instant_regret(chosen_index: int, inst: BanditInstance) -> float:
    gap = inst.expected_rewards[inst.optimal_index] - inst.expected_rewards[chosen_index]
    return float(gap)


def poisson_from_uniform(lam: float, u: float, max_k: int = 400) -> int:
    """Poisson inverse CDF at u; exact for the small means used here."""
    p = math.exp(-lam)
    cdf = p
    k = 0
    while u > cdf and k < max_k:
        k += 1
        p *= lam / k
        cdf += p
    return k


def reward_from_variates(family: LinkFamily, z: float, normal: float, uniform: float) -> float:
    """Reward draw from pre-drawn round variates (common random numbers)."""
    if family.name == "linear":
        return z + family.omega * normal
    if family.name == "logistic":
        return float(uniform < float(family.mu(z)))
    if family.name == "poisson":
        return float(poisson_from_uniform(float(family.mu(z)), uniform))
    raise ValueError(f"unknown family {family.name!r}")


def sample_reward(x: np.ndarray, inst: BanditInstance, rng: np.random.Generator) -> float:
    """One reward draw for action matrix x under the instance's family."""
    z = float(np.sum(x * inst.true_param.theta))
    fam = inst.family
    if fam.name == "linear":
        return float(rng.normal(z, fam.omega))
    if fam.name == "logistic":
        return float(rng.random() < float(fam.mu(z)))
    if fam.name == "poisson":
        return float(rng.poisson(float(fam.mu(z))))
    raise ValueError(f"unknown family {fam.name!r}")


def ingest_reward_matrix(
    path,
    family: LinkFamily,
    knn_k: int = 5,
    skip_header: bool = False,
    impute_missing: bool = False,
) -> BanditInstance:
    """Turn a dense reward-matrix file into a bandit instance.

    The matrix R = F1 S F2^T is decomposed by full SVD; S becomes the ground
    truth, action (i, j) is outer(F1[i, :], F2[j, :]) at index l = i*n2 + j,
    and a 5-NN graph is built over the vectorized actions.  Actions and the
    ground truth are jointly rescaled (one positive factor each) so norms
    satisfy the unit bounds without moving the argmax.
    """
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if skip_header and lines:
        lines = lines[1:]
    for row_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        vals = []
        for col_no, tok in enumerate(line.split(","), start=1):
            tok = tok.strip()
            if tok == "" and impute_missing:
                vals.append(0.0)
                continue
            try:
                vals.append(float(tok))
            except ValueError:
                raise IngestionError(
                    f"non-numeric entry {tok!r} at row {row_no}, column {col_no}"
                ) from None
        rows.append(vals)
    if not rows:
        raise IngestionError("empty reward matrix file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise IngestionError(
            f"ragged matrix: row lengths {sorted(widths)} (first bad row "
            f"{next(i + 1 for i, r in enumerate(rows) if len(r) != len(rows[0]))})"
        )
    r_mat = np.array(rows, dtype=float)
    n1, n2 = r_mat.shape
    f1, sigma, f2t = np.linalg.svd(r_mat, full_matrices=True)
    f2 = f2t.T
    theta = np.zeros((n1, n2))
    np.fill_diagonal(theta, sigma)

    actions = [np.outer(f1[i], f2[j]) for i in range(n1) for j in range(n2)]
    act_scale = max(np.linalg.norm(a) for a in actions)
    theta_scale = np.linalg.norm(theta)
    if act_scale > 0:
        actions = [a / act_scale for a in actions]
    if theta_scale > 0:
        theta = theta / theta_scale

    u, s, vt = np.linalg.svd(theta)
    rank = int(np.sum(s > 1e-10)) or 1
    true_param = TrueParameter(
        theta=theta, rank=rank, u=u[:, :rank], s=s[:rank], v=vt[:rank].T,
        c_r=float(s[rank - 1]),
    )
    stack = np.stack([a.ravel() for a in actions])
    graph = knn_graph(stack, min(knn_k, len(actions) - 1))
    return assemble_instance(actions, true_param, graph, family)
