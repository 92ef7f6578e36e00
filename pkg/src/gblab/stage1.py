"""Subspace estimation: damped moments, penalized low-rank solve, transform.

The estimator averages log-damped reward-weighted samples into a moment
matrix, solves a nuclear-norm + graph-penalized least-squares problem by
proximal gradient, and turns the resulting singular subspaces into an
isometric rotation + rearrangement that concentrates the signal in the
first k = (d1 + d2 - r) * r coordinates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .graphs import LaplacianKernel


def log_damp(x):
    """Odd, saturating truncation: log(1 + x + x^2/2) for x >= 0, mirrored below."""
    x = np.asarray(x, dtype=float)
    mag = np.log1p(np.abs(x) + x * x / 2.0)
    out = np.sign(x) * mag
    return out if out.ndim else float(out)


def log_damp_spectral(a: np.ndarray, scale: float) -> np.ndarray:
    """Apply log_damp through the symmetric dilation of a rectangular matrix.

    Builds [[0, scale*A], [scale*A^T, 0]], eigendecomposes it, maps the
    eigenvalues through log_damp, and reads the damped matrix back out of
    the off-diagonal block, divided by scale.
    """
    if scale <= 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    a = np.asarray(a, dtype=float)
    d1, d2 = a.shape
    dil = np.zeros((d1 + d2, d1 + d2))
    dil[:d1, d1:] = scale * a
    dil[d1:, :d1] = scale * a.T
    evals, evecs = np.linalg.eigh(dil)
    damped = (evecs * log_damp(evals)) @ evecs.T
    return damped[:d1, d1:] / scale


@dataclass(frozen=True)
class DampedMoment:
    """Average of log-damped reward-weighted score matrices."""

    moment: np.ndarray  # d1 x d2
    scale: float
    samples: int


def damped_moment(xs, ys, scale: float) -> DampedMoment:
    """Moment matrix (1/T1) sum_i log_damp_spectral(y_i * S(x_i)) at the given scale.

    The score of the standard normal exploration density is the identity,
    so each summand is the damped version of y_i * x_i.
    """
    xs = list(xs)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != ys.size or not xs:
        raise ValueError("need one reward per sample matrix, at least one sample")
    acc = np.zeros_like(np.asarray(xs[0], dtype=float))
    for x, y in zip(xs, ys):
        acc += log_damp_spectral(y * np.asarray(x, dtype=float), scale)
    m = acc / len(xs)
    if not np.all(np.isfinite(m)):
        raise ValueError("damped moment has non-finite entries")
    return DampedMoment(moment=m, scale=float(scale), samples=len(xs))


def moment_scale_defaults(
    d1: int,
    d2: int,
    t1: int,
    gamma: float,
    omega: float,
    r_max: float,
    delta: float,
    zeta: float = 1.0,
) -> tuple[float, float]:
    """Theory-default damping scale and nuclear weight for the moment estimator.

    Returns (scale, weight); the weight is reported for diagnostics only and
    never consumed by the solver.
    """
    if min(d1, d2, t1) < 1 or min(gamma, omega, r_max) <= 0 or not 0 < delta < 1:
        raise ValueError("all inputs must be positive with delta in (0, 1)")
    log_term = math.log(2.0 * (d1 + d2) / delta)
    var_term = 4.0 * omega**2 + r_max**2
    scale = math.sqrt(2.0 * log_term / (var_term * gamma * t1 * max(d1, d2)))
    weight = 4.0 * zeta * math.sqrt(2.0 * var_term * gamma * d1 * d2 * log_term / t1)
    return scale, weight


def prox_nuclear(m: np.ndarray, threshold: float) -> np.ndarray:
    """Soft-threshold the singular values of m by the given amount."""
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    if threshold == 0.0:
        return np.array(m, dtype=float, copy=True)
    u, s, vt = np.linalg.svd(np.asarray(m, dtype=float), full_matrices=False)
    return (u * np.maximum(s - threshold, 0.0)) @ vt


@dataclass(frozen=True)
class LowRankConfig:
    """Penalized solve settings: nuclear weight, graph weight, rank, samples."""

    lam: float
    alpha: float
    rank: int
    t1: int
    max_iters: int = 500
    tol_rel_obj: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"nuclear weight must lie in [0, 1], got {self.lam}")
        if self.alpha < 0:
            raise ValueError(f"graph weight must be >= 0, got {self.alpha}")
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.t1 < 1:
            raise ValueError(f"exploration length must be >= 1, got {self.t1}")


@dataclass(frozen=True)
class LowRankFit:
    theta: np.ndarray
    objectives: tuple[float, ...]
    converged: bool


def estimate_low_rank(
    moment: DampedMoment, kernel: LaplacianKernel | None, cfg: LowRankConfig
) -> LowRankFit:
    """Minimize ||T - M||_F^2 + lam*||T||_* + vec(T)' K vec(T) by proximal gradient.

    Gradient step on the smooth part, then a nuclear-norm prox; the step
    1 / (2 (1 + sigma_max(K))) is the inverse Lipschitz constant, so the
    objective never increases.  ``kernel=None`` drops the quadratic term.
    """
    m = moment.moment
    d1, d2 = m.shape
    if kernel is None:
        k_scaled = np.zeros((d1 * d2, d1 * d2))
        sigma_k = 0.0
    else:
        k_scaled = kernel.K
        if k_scaled.shape != (d1 * d2, d1 * d2):
            raise ValueError(
                f"kernel dimension {k_scaled.shape} does not match moment {m.shape}"
            )
        sigma_k = kernel.a_mu * kernel.alpha * kernel.sigma_max_k
    step = 1.0 / (2.0 * (1.0 + sigma_k))

    def objective(t):
        diff = t - m
        quad = float(t.ravel() @ k_scaled @ t.ravel())
        nuc = np.linalg.svd(t, compute_uv=False).sum()
        return float(np.sum(diff * diff)) + cfg.lam * nuc + quad

    theta = m.copy()
    objs = [objective(theta)]
    converged = False
    for _ in range(cfg.max_iters):
        grad = 2.0 * (theta - m) + 2.0 * (k_scaled @ theta.ravel()).reshape(d1, d2)
        theta_next = prox_nuclear(theta - step * grad, cfg.lam * step)
        obj_next = objective(theta_next)
        drop = objs[-1] - obj_next
        theta = theta_next
        objs.append(obj_next)
        if drop < cfg.tol_rel_obj * max(1.0, abs(objs[-2])):
            converged = True
            break
    if not converged:
        warnings.warn(
            f"low-rank solve stopped at max_iters={cfg.max_iters} without "
            f"meeting the objective tolerance",
            RuntimeWarning,
        )
    return LowRankFit(theta=theta, objectives=tuple(objs), converged=converged)


@dataclass(frozen=True)
class SubspaceTransform:
    """Rotation + rearrangement built from the stage-1 singular subspaces.

    ``perm`` maps rearranged positions to row-major vec positions of the
    rotated matrix; the first k positions carry the informative blocks.
    """

    u_top: np.ndarray
    u_perp: np.ndarray
    v_top: np.ndarray
    v_perp: np.ndarray
    perm: np.ndarray
    k: int
    tau: float | None = None
    subspace_gap: float | None = None  # ||Uperp'U*||_F * ||Vperp'V*||_F if truth known

    @property
    def d1(self) -> int:
        return self.u_top.shape[0]

    @property
    def d2(self) -> int:
        return self.v_top.shape[0]

    def u_full(self) -> np.ndarray:
        return np.hstack([self.u_top, self.u_perp])

    def v_full(self) -> np.ndarray:
        return np.hstack([self.v_top, self.v_perp])

    def with_tau(self, tau: float) -> "SubspaceTransform":
        return replace(self, tau=float(tau))


def block_permutation(d1: int, d2: int, r: int) -> np.ndarray:
    """Row-major vec positions listed block by block: top-left, lower-left,
    upper-right, then the redundant lower-right tail."""
    idx = np.arange(d1 * d2).reshape(d1, d2)
    return np.concatenate(
        [
            idx[:r, :r].ravel(),
            idx[r:, :r].ravel(),
            idx[:r, r:].ravel(),
            idx[r:, r:].ravel(),
        ]
    )


def subspace_split(theta_hat: np.ndarray, r: int, true_param=None) -> SubspaceTransform:
    """Full SVD split of the stage-1 estimate into top-r and complement blocks."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    d1, d2 = theta_hat.shape
    if r > min(d1, d2):
        raise ValueError(f"rank {r} exceeds min(d1, d2) = {min(d1, d2)}")
    u, s, vt = np.linalg.svd(theta_hat)
    if r < s.size and s[r - 1] - s[r] < 1e-12:
        warnings.warn(
            f"singular values {r} and {r + 1} are numerically tied; "
            f"keeping the decomposition's deterministic order",
            RuntimeWarning,
        )
    v = vt.T
    gap = None
    if true_param is not None:
        gap = float(
            np.linalg.norm(u[:, r:].T @ true_param.u)
            * np.linalg.norm(v[:, r:].T @ true_param.v)
        )
    return SubspaceTransform(
        u_top=u[:, :r],
        u_perp=u[:, r:],
        v_top=v[:, :r],
        v_perp=v[:, r:],
        perm=block_permutation(d1, d2, r),
        k=(d1 + d2 - r) * r,
        subspace_gap=gap,
    )


def transform_action(x: np.ndarray, tr: SubspaceTransform) -> np.ndarray:
    """Rotate one action into the estimated subspace coordinates and rearrange."""
    rotated = tr.u_full().T @ np.asarray(x, dtype=float) @ tr.v_full()
    return rotated.ravel()[tr.perm]


def transform_stack(stack: np.ndarray, tr: SubspaceTransform) -> np.ndarray:
    """Vectorized transform_action over a stack of vectorized actions."""
    n = stack.shape[0]
    mats = stack.reshape(n, tr.d1, tr.d2)
    rotated = np.einsum("ab,nbc,cd->nad", tr.u_full().T, mats, tr.v_full())
    return rotated.reshape(n, -1)[:, tr.perm]


def transform_matrix(theta: np.ndarray, tr: SubspaceTransform) -> np.ndarray:
    """Transform a parameter matrix into the same rearranged coordinates."""
    return transform_action(theta, tr)


def tail_bound(
    d1: int,
    d2: int,
    r: int,
    t1: int,
    gamma: float,
    omega: float,
    r_max: float,
    delta: float,
    c_r_hat: float,
    zeta: float = 1.0,
) -> float:
    """Plug-in bound on the transformed parameter's redundant tail norm.

    tau = c1 zeta^2 d1 d2 gamma r log(2(d1+d2)/delta) / (T1 c_r^2) with
    c1 = 36 (4 omega^2 + r_max^2), clamped to [1e-8, 1].
    """
    if c_r_hat < 1e-10:
        raise ValueError(
            "estimated r-th singular value is numerically zero; "
            "supply an explicit tail bound override"
        )
    c1 = 36.0 * (4.0 * omega**2 + r_max**2)
    tau = (
        c1 * zeta**2 * d1 * d2 * gamma * r * math.log(2.0 * (d1 + d2) / delta)
        / (t1 * c_r_hat**2)
    )
    return float(min(max(tau, 1e-8), 1.0))
