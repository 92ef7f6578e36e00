"""Bandit policies: the two-stage subspace policy and three baselines.

Four registered policies share one record format:

- ``two_stage_graph``: explore, estimate a low-rank parameter with the graph
  penalty, rotate actions into the estimated subspace, then run graph-penalized
  UCB in the rotated coordinates.
- ``two_stage_plain``: the same pipeline with the graph weight forced to zero
  in both stages; isolates the graph contribution.
- ``graph_ucb``: one-stage UCB on raw vectorized actions with a unit ridge
  plus the graph kernel.
- ``glm_ucb``: one-stage UCB with a plain ridge and no graph anywhere.

A run is strictly sequential. The caller may inject pre-drawn noise variates
so that different policies see identical reward randomness on the same
instance; the policy's own stream then only drives exploration draws.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .envs import BanditInstance, reward_from_variates
from .graphs import laplacian, quad_kernel
from .stage1 import (
    LowRankConfig,
    damped_moment,
    estimate_low_rank,
    moment_scale_defaults,
    subspace_split,
    tail_bound,
    transform_stack,
)
from .stage2 import (
    PenaltySpec,
    confidence_radius,
    fit_glm_penalized,
    init_design,
    lambda_perp_default,
    select_ucb,
    update_design,
)

RESIDUAL_RANK_TOL = 1e-10
DEFAULT_HIT_PERCENT = 5.0


@dataclass(frozen=True)
class PolicyConfig:
    """Knobs for one policy run.

    ``t1`` (exploration length), ``rank``, ``lam`` (nuclear weight), and
    ``alpha`` (graph weight) drive the two-stage policies; the one-stage
    baselines read only the ridge/width fields.  ``None`` for ``t1``,
    ``lambda_perp``, ``tau``, or ``moment_scale`` means the plug-in default
    is computed at run time.  ``ucb_scale`` multiplies the confidence width
    uniformly; it exists because theory-constant widths are far too wide for
    desk-scale reward gaps, and fairness requires every policy to share it.
    """

    name: str
    horizon: int
    rank: int
    lam: float = 0.01
    alpha: float = 0.0
    t1: int | None = None
    lambda2: float = 1.0
    lambda_perp: float | None = None
    tau: float | None = None
    delta: float = 0.01
    zeta: float = 1.0
    moment_scale: float | None = None
    ucb_scale: float = 1.0
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("nuclear weight must lie in [0, 1]")
        if self.alpha < 0:
            raise ValueError("graph weight must be non-negative")
        if self.t1 is not None and not 1 <= self.t1 <= self.horizon:
            raise ValueError("exploration length must lie in [1, horizon]")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.ucb_scale < 0:
            raise ValueError("ucb_scale must be non-negative")


@dataclass(frozen=True)
class StepRecord:
    """One bandit round: what was played, what came back, what it cost."""

    t: int
    action: int
    reward: float
    instant_regret: float
    hit: bool
    elapsed: float


class PolicyRunError(RuntimeError):
    """A policy run aborted mid-horizon; carries the partial records."""

    def __init__(self, message: str, records: list[StepRecord]):
        super().__init__(message)
        self.records = records
        self.partial = True


def t1_default(d1: int, d2: int, r: int, gamma: float, t_horizon: int,
               c_r_hat: float, zeta: float = 1.0) -> int:
    """Exploration length balancing estimation error against lost rounds.

    Clamped below by r·(d1+d2) (enough rounds to see the subspace at all)
    and above by half the horizon; the upper clamp wins when they conflict.
    """
    if min(d1, d2, r, t_horizon) < 1 or gamma <= 0 or c_r_hat <= 0 or zeta <= 0:
        raise ValueError("t1_default requires positive inputs")
    raw = math.ceil(zeta * math.sqrt(d1 * d2 * gamma * r * t_horizon) / c_r_hat)
    floor = r * (d1 + d2)
    cap = max(1, t_horizon // 2)
    return min(max(raw, floor), cap)


def draw_noise(rng: np.random.Generator, t_horizon: int):
    """Pre-draw the per-round reward variates shared across policies."""
    return rng.standard_normal(t_horizon), rng.random(t_horizon)


def _resolve_run_inputs(instance, config, rng, noise, hit_set):
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if noise is None:
        noise = draw_noise(rng, config.horizon)
    normals, uniforms = noise
    if len(normals) < config.horizon or len(uniforms) < config.horizon:
        raise ValueError("noise arrays shorter than the horizon")
    if hit_set is None:
        hit_set = frozenset(int(i) for i in instance.top_set(DEFAULT_HIT_PERCENT))
    return rng, normals, uniforms, hit_set


def _play(instance, idx, t, normals, uniforms, hit_set, records, started):
    z = float(instance.expected_z[idx])
    reward = reward_from_variates(
        instance.family, z, float(normals[t - 1]), float(uniforms[t - 1])
    )
    records.append(StepRecord(
        t=t,
        action=int(idx),
        reward=float(reward),
        instant_regret=float(
            instance.expected_rewards[instance.optimal_index]
            - instance.expected_rewards[idx]
        ),
        hit=int(idx) in hit_set,
        elapsed=time.perf_counter() - started,
    ))
    return reward


def _linear_closed_form(family) -> bool:
    return family.name == "linear" and family.c_mu == 1.0


def _ucb_loop(instance, stack, state, penalty, family, radius_fn, config,
              t_start, normals, uniforms, hit_set, records):
    """Rounds t_start..horizon: fit, score optimistically, play, absorb."""
    fast = _linear_closed_form(family)
    for t in range(t_start, config.horizon + 1):
        started = time.perf_counter()
        if fast:
            state.theta_hat = state.vinv @ state.score_sum
        elif state.history_length > 0:
            fit_glm_penalized(state, penalty, family)
        elif state.theta_hat is None:
            state.theta_hat = np.zeros(state.dim)
        e_t = config.ucb_scale * radius_fn(state)
        idx = select_ucb(stack, state, e_t, family)
        reward = _play(instance, idx, t, normals, uniforms, hit_set, records,
                       started)
        update_design(state, stack[idx], reward)


def _run_two_stage(instance: BanditInstance, config: PolicyConfig, rng, noise,
                   hit_set) -> list[StepRecord]:
    rng, normals, uniforms, hit_set = _resolve_run_inputs(
        instance, config, rng, noise, hit_set
    )
    family = instance.family
    d1, d2, n = instance.d1, instance.d2, instance.n
    t1 = config.t1 if config.t1 is not None else t1_default(
        d1, d2, config.rank, instance.sampling_gamma, config.horizon, 1.0,
        config.zeta,
    )
    if not 1 <= t1 <= config.horizon:
        raise ValueError("exploration length must lie in [1, horizon]")

    records: list[StepRecord] = []
    try:
        explored_x = []
        explored_y = []
        for t in range(1, t1 + 1):
            started = time.perf_counter()
            idx = int(rng.integers(n))
            reward = _play(instance, idx, t, normals, uniforms, hit_set,
                           records, started)
            explored_x.append(instance.actions[idx])
            explored_y.append(reward)
        if t1 == config.horizon:
            return records

        scale = config.moment_scale
        if scale is None:
            scale, _ = moment_scale_defaults(
                d1, d2, t1, instance.sampling_gamma, family.omega,
                family.r_max, config.delta, config.zeta,
            )
        moment = damped_moment(explored_x, explored_y, scale)

        graph_on = config.alpha > 0
        lap = laplacian(instance.graph) if graph_on else None
        kernel1 = (quad_kernel(instance.stack, lap, family.a_mu, config.alpha)
                   if graph_on else None)
        fit = estimate_low_rank(
            moment,
            kernel1,
            LowRankConfig(lam=config.lam, alpha=config.alpha if graph_on else 0.0,
                          rank=config.rank, t1=t1),
        )
        transform = subspace_split(fit.theta, config.rank)

        singulars = np.linalg.svd(fit.theta, compute_uv=False)
        residual = singulars[config.rank] if config.rank < singulars.size else 0.0
        if config.tau is not None:
            tau = config.tau
        elif residual < RESIDUAL_RANK_TOL:
            tau = 0.0
        else:
            tau = tail_bound(
                d1, d2, config.rank, t1, instance.sampling_gamma, family.omega,
                family.r_max, config.delta, float(singulars[config.rank - 1]),
                config.zeta,
            )

        rotated = transform_stack(instance.stack, transform)
        kernel2 = (quad_kernel(rotated, lap, family.a_mu, config.alpha)
                   if graph_on else None)
        lambda_perp = config.lambda_perp
        if lambda_perp is None:
            lambda_perp = lambda_perp_default(
                family.c_mu, config.horizon, transform.k, config.lambda2
            )
        penalty = PenaltySpec(
            lambda2=config.lambda2, lambda_perp=lambda_perp, k=transform.k,
            kernel=kernel2,
        )
        exploration_pairs = [
            (rotated[records[i].action], explored_y[i]) for i in range(t1)
        ]
        state = init_design(penalty, family.c_mu, exploration_pairs)

        def radius(st):
            return confidence_radius(
                st, penalty, family, tau, family.omega, config.delta
            )

        _ucb_loop(instance, rotated, state, penalty, family, radius, config,
                  t1 + 1, normals, uniforms, hit_set, records)
    except Exception as exc:
        raise PolicyRunError(f"{config.name}: {exc}", records) from exc
    return records


def run_two_stage_graph(instance, config, rng=None, noise=None, hit_set=None):
    """Two-stage policy with the graph penalty active in both stages."""
    return _run_two_stage(instance, config, rng, noise, hit_set)


def run_two_stage_plain(instance, config, rng=None, noise=None, hit_set=None):
    """Two-stage policy with the graph weight forced to zero in both stages."""
    return _run_two_stage(instance, replace(config, alpha=0.0), rng, noise,
                          hit_set)


def _run_one_stage(instance, config, rng, noise, hit_set, penalty,
                   width_const) -> list[StepRecord]:
    rng, normals, uniforms, hit_set = _resolve_run_inputs(
        instance, config, rng, noise, hit_set
    )
    family = instance.family
    records: list[StepRecord] = []
    try:
        state = init_design(penalty, family.c_mu, [],
                            dim=instance.stack.shape[1])
        state.theta_hat = np.zeros(state.dim)

        def radius(st):
            gap = max(st.logdet_v - st.logdet_v0, 0.0)
            return (family.omega
                    * math.sqrt(gap + 2.0 * math.log(1.0 / config.delta))
                    + width_const)

        _ucb_loop(instance, instance.stack, state, penalty, family, radius,
                  config, 1, normals, uniforms, hit_set, records)
    except Exception as exc:
        raise PolicyRunError(f"{config.name}: {exc}", records) from exc
    return records


def run_graph_ucb(instance, config, rng=None, noise=None, hit_set=None):
    """One-stage UCB on raw vectorized actions: unit ridge plus graph kernel."""
    family = instance.family
    if config.alpha > 0:
        kern = quad_kernel(instance.stack, laplacian(instance.graph),
                           family.a_mu, config.alpha)
        spread = config.alpha * kern.sigma_max_k
    else:
        kern = None
        spread = 0.0
    penalty = PenaltySpec(lambda2=1.0, lambda_perp=1.0, k=0, kernel=kern)
    width_const = math.sqrt(family.c_mu) * (1.0 + math.sqrt(spread))
    return _run_one_stage(instance, config, rng, noise, hit_set, penalty,
                          width_const)


def run_glm_ucb(instance, config, rng=None, noise=None, hit_set=None):
    """One-stage UCB with a plain ridge and no graph anywhere."""
    family = instance.family
    penalty = PenaltySpec(lambda2=config.lambda2, lambda_perp=config.lambda2,
                          k=0, kernel=None)
    width_const = math.sqrt(family.c_mu * config.lambda2)
    return _run_one_stage(instance, config, rng, noise, hit_set, penalty,
                          width_const)


POLICY_REGISTRY = {
    "two_stage_graph": run_two_stage_graph,
    "two_stage_plain": run_two_stage_plain,
    "graph_ucb": run_graph_ucb,
    "glm_ucb": run_glm_ucb,
}


def run_policy(name: str, instance, config, rng=None, noise=None,
               hit_set=None) -> list[StepRecord]:
    """Dispatch a named policy; unknown names list the available ones."""
    try:
        fn = POLICY_REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(POLICY_REGISTRY))
        raise ValueError(f"unknown policy {name!r}; known policies: {known}")
    return fn(instance, config, rng=rng, noise=noise, hit_set=hit_set)
