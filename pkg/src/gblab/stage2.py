"""Penalized GLM fitting, running design state, and UCB action selection.

The second phase of the two-stage policy (and both internal baselines) runs
on this machinery: a design matrix V accumulated one rank-1 term at a time,
a damped-Newton penalized likelihood fit warm-started across rounds, a
confidence width driven by the log-determinant growth of V, and an argmax
rule over optimistic scores.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .envs import LinkFamily
from .graphs import LaplacianKernel

NEWTON_MAX_ITERS = 50
NEWTON_GRAD_TOL = 1e-8
NEWTON_MAX_HALVINGS = 30
REFACTOR_EVERY = 256

# When enabled, every AUDIT_EVERY history appends the incremental inverse and
# log-determinant are checked against a dense recomputation to 1e-8.
DEBUG_AUDIT = False
AUDIT_EVERY = 50


def lambda_perp_default(c_mu: float, t_horizon: float, k: int,
                        lambda2: float) -> float:
    """Default ridge weight for the trailing coordinate block.

    Grows nearly linearly with the horizon so that the trailing block is
    pinned down hard when the leading block carries the signal.
    """
    if c_mu <= 0 or t_horizon <= 0 or k <= 0 or lambda2 <= 0:
        raise ValueError("lambda_perp_default requires positive arguments")
    ratio = c_mu * t_horizon
    return ratio / (k * math.log1p(ratio / lambda2))


@dataclass(frozen=True)
class PenaltySpec:
    """Quadratic penalty: block-diagonal ridge plus an optional graph kernel.

    The ridge weight is ``lambda2`` on the first ``k`` coordinates and
    ``lambda_perp`` on the rest.  ``kernel`` must be built on the same
    coordinates as the coefficient vector (for the two-stage policy that
    means the transformed action stack).
    """

    lambda2: float
    lambda_perp: float
    k: int
    kernel: LaplacianKernel | None = None

    def __post_init__(self) -> None:
        if self.lambda2 <= 0 or self.lambda_perp <= 0:
            raise ValueError("ridge weights must be positive")
        if self.k < 0:
            raise ValueError("split index must be non-negative")

    def penalty_matrix(self, dim: int) -> np.ndarray:
        """Dense ridge-plus-kernel matrix for a dim-dimensional coefficient."""
        if self.k > dim:
            raise ValueError(
                f"split index {self.k} exceeds coefficient dimension {dim}"
            )
        diag = np.full(dim, float(self.lambda_perp))
        diag[: self.k] = self.lambda2
        out = np.diag(diag)
        if self.kernel is not None:
            kmat = self.kernel.K
            if kmat.shape != (dim, dim):
                raise ValueError(
                    f"kernel is {kmat.shape[0]}-dimensional, "
                    f"coefficients are {dim}-dimensional"
                )
            out = out + kmat
        return out


@dataclass
class DesignState:
    """Running state for one policy run; mutated by a single owner.

    ``v`` is the scaled design matrix, ``vinv`` its incrementally maintained
    inverse, and the two log-determinants feed the confidence width.  The
    interaction history (features and rewards, exploration pairs first) is
    kept in capacity-doubling buffers.
    """

    v: np.ndarray
    vinv: np.ndarray
    logdet_v: float
    logdet_v0: float
    t1_count: int
    score_sum: np.ndarray
    theta_hat: np.ndarray | None = None
    updates_since_refactor: int = 0
    _xs: np.ndarray = field(repr=False, default=None)
    _ys: np.ndarray = field(repr=False, default=None)
    _count: int = field(repr=False, default=0)

    @property
    def dim(self) -> int:
        return self.v.shape[0]

    @property
    def history_length(self) -> int:
        return self._count

    def features(self) -> np.ndarray:
        return self._xs[: self._count]

    def rewards(self) -> np.ndarray:
        return self._ys[: self._count]

    def append_pair(self, x: np.ndarray, y: float) -> None:
        if self._xs is None:
            cap = 16
            self._xs = np.empty((cap, self.dim))
            self._ys = np.empty(cap)
        elif self._count == self._xs.shape[0]:
            self._xs = np.concatenate([self._xs, np.empty_like(self._xs)])
            self._ys = np.concatenate([self._ys, np.empty_like(self._ys)])
        self._xs[self._count] = x
        self._ys[self._count] = y
        self._count += 1
        if DEBUG_AUDIT and self._count % AUDIT_EVERY == 0:
            self._audit()

    def _audit(self) -> None:
        dense_inv = np.linalg.inv(self.v)
        sign, dense_logdet = np.linalg.slogdet(self.v)
        if sign <= 0:
            raise AssertionError("design matrix lost positive definiteness")
        if not np.allclose(self.vinv, dense_inv, atol=1e-8):
            raise AssertionError("incremental inverse drifted past 1e-8")
        if abs(self.logdet_v - dense_logdet) > 1e-8:
            raise AssertionError("incremental log-determinant drifted past 1e-8")


def _refactor(state: DesignState) -> None:
    sign, logdet = np.linalg.slogdet(state.v)
    if sign <= 0:
        raise ValueError("design matrix lost positive definiteness")
    state.vinv = np.linalg.inv(state.v)
    state.logdet_v = float(logdet)
    state.updates_since_refactor = 0


def init_design(penalty: PenaltySpec, c_mu: float, exploration_history,
                dim: int | None = None) -> DesignState:
    """Build the initial design state from the penalty and exploration pairs.

    The base matrix is (ridge + kernel)/c_mu; every exploration feature adds
    its outer product on top.  The coefficient dimension is taken from the
    kernel when present, otherwise from the first exploration feature,
    otherwise from ``dim``.
    """
    if c_mu <= 0:
        raise ValueError("c_mu must be positive")
    pairs = [(np.asarray(x, dtype=float).ravel(), float(y))
             for x, y in exploration_history]
    if penalty.kernel is not None:
        inferred = penalty.kernel.K.shape[0]
    elif pairs:
        inferred = pairs[0][0].size
    elif dim is not None:
        inferred = dim
    else:
        raise ValueError(
            "coefficient dimension unknown: pass dim, a kernel, "
            "or a non-empty exploration history"
        )
    if dim is not None and dim != inferred:
        raise ValueError(f"dim={dim} conflicts with inferred dimension {inferred}")

    base = penalty.penalty_matrix(inferred)
    try:
        np.linalg.cholesky(base)
    except np.linalg.LinAlgError:
        raise ValueError(
            "penalty matrix (ridge + kernel) is not positive definite; "
            "check lambda2, lambda_perp, and the kernel weight"
        ) from None
    v0 = base / c_mu
    sign, logdet_v0 = np.linalg.slogdet(v0)

    v = v0.copy()
    score_sum = np.zeros(inferred)
    for x, y in pairs:
        if x.size != inferred:
            raise ValueError("exploration feature dimension mismatch")
        v += np.outer(x, x)
        score_sum += y * x
    sign, logdet_v = np.linalg.slogdet(v)
    if sign <= 0:
        raise ValueError("initial design matrix is not positive definite")

    state = DesignState(
        v=v, vinv=np.linalg.inv(v), logdet_v=float(logdet_v),
        logdet_v0=float(logdet_v0), t1_count=len(pairs), score_sum=score_sum,
    )
    for x, y in pairs:
        state.append_pair(x, y)
    return state


def _objective(theta, xs, ys, pen_mat, family):
    z = xs @ theta
    return float(np.sum(family.b(z) - ys * z) + 0.5 * theta @ (pen_mat @ theta))


def fit_glm_penalized(state: DesignState, penalty: PenaltySpec,
                      family: LinkFamily) -> np.ndarray:
    """Fit the penalized likelihood over the full history by damped Newton.

    Warm-started from the previous round's coefficients.  The objective is
    strictly convex (the Hessian dominates the positive definite penalty
    matrix), so the minimizer is unique; a warning is raised if the gradient
    tolerance is not met within the iteration budget.
    """
    if state.history_length == 0:
        raise ValueError("cannot fit with an empty history")
    xs = state.features()
    ys = state.rewards()
    pen_mat = penalty.penalty_matrix(state.dim)

    theta = (state.theta_hat.copy() if state.theta_hat is not None
             else np.zeros(state.dim))
    f_curr = _objective(theta, xs, ys, pen_mat, family)
    converged = False
    for _ in range(NEWTON_MAX_ITERS):
        z = xs @ theta
        grad = xs.T @ (family.mu(z) - ys) + pen_mat @ theta
        if np.linalg.norm(grad) < NEWTON_GRAD_TOL:
            converged = True
            break
        hess = xs.T @ (family.mu_prime(z)[:, None] * xs) + pen_mat
        direction = np.linalg.solve(hess, -grad)
        # predicted decrease below float resolution of the objective means
        # the gradient tolerance is unreachable; stop quietly at the optimum
        decrement = -float(grad @ direction)
        if decrement <= 16.0 * np.finfo(float).eps * max(1.0, abs(f_curr)):
            converged = True
            break
        step = 1.0
        accepted = False
        for _ in range(NEWTON_MAX_HALVINGS):
            cand = theta + step * direction
            f_cand = _objective(cand, xs, ys, pen_mat, family)
            if f_cand <= f_curr:
                theta, f_curr = cand, f_cand
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    if not converged:
        z = xs @ theta
        grad = xs.T @ (family.mu(z) - ys) + pen_mat @ theta
        if np.linalg.norm(grad) >= NEWTON_GRAD_TOL:
            warnings.warn(
                "penalized GLM fit stopped above the gradient tolerance; "
                "returning the best iterate",
                RuntimeWarning,
            )
    state.theta_hat = theta
    return theta


def confidence_radius(state: DesignState, penalty: PenaltySpec,
                      family: LinkFamily, tau: float, omega: float,
                      delta: float) -> float:
    """Optimism width: log-determinant growth term plus a fixed penalty term.

    ``tau`` weights the trailing-block contribution; it is zero when the
    trailing coordinates are known to carry no signal.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    gap = max(state.logdet_v - state.logdet_v0, 0.0)
    stochastic = omega * math.sqrt(gap + 2.0 * math.log(1.0 / delta))
    fixed = math.sqrt(family.c_mu) * (
        math.sqrt(penalty.lambda2) + math.sqrt(penalty.lambda_perp) * tau + 1.0
    )
    return stochastic + fixed


def select_ucb(actions: np.ndarray, state: DesignState, e_t: float,
               family: LinkFamily) -> int:
    """Index of the action maximizing mean response plus scaled width.

    Ties resolve to the lowest index.
    """
    actions = np.asarray(actions, dtype=float)
    if actions.ndim != 2 or actions.shape[0] == 0:
        raise ValueError("actions must be a non-empty 2-D stack")
    if state.theta_hat is None:
        raise ValueError("no fitted coefficients; run fit_glm_penalized first")
    z = actions @ state.theta_hat
    quad = np.einsum("ij,jk,ik->i", actions, state.vinv, actions)
    widths = np.sqrt(np.maximum(quad, 0.0))
    scores = family.mu(z) + (family.k_mu / family.c_mu) * e_t * widths
    return int(np.argmax(scores))


def update_design(state: DesignState, x: np.ndarray, y: float) -> DesignState:
    """Absorb one observed (feature, reward) pair into the design state.

    The inverse follows the rank-1 inverse-update identity and the
    log-determinant its matching increment; a dense refactorization runs
    every REFACTOR_EVERY updates to cap accumulated drift, and immediately
    if the increment denominator is ever non-positive.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != state.dim:
        raise ValueError(f"feature has size {x.size}, expected {state.dim}")
    if not np.any(x):
        state.append_pair(x, y)
        return state
    vx = state.vinv @ x
    denom = 1.0 + float(x @ vx)
    state.v += np.outer(x, x)
    if denom <= 0.0:
        _refactor(state)
    else:
        state.vinv -= np.outer(vx, vx) / denom
        state.logdet_v += math.log(denom)
        state.updates_since_refactor += 1
        if state.updates_since_refactor >= REFACTOR_EVERY:
            _refactor(state)
    state.score_sum += y * x
    state.append_pair(x, y)
    return state
