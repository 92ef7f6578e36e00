"""Experiment orchestration: seeded repetitions, aggregation, and CSV files.

One repetition draws a fresh instance, then runs every configured policy on
that same instance with the same pre-drawn reward variates, so per-rep
regret differences between policies are paired.  All randomness flows from
one seed per repetition, split into named streams (instance, noise, one per
policy label); adding a policy never perturbs the draws of the others.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ExperimentConfig
from .envs import (
    FAMILY_BUILDERS,
    assemble_instance,
    ingest_reward_matrix,
    make_actions_gaussian,
    make_actions_outer,
    make_theta,
)
from .graphs import ba_graph, er_graph, knn_graph
from .policies import draw_noise, run_policy

RAW_HEADER = "policy,rep,seed,t,action,reward,instant_regret,cum_regret,hit"
AGGREGATE_HEADER = "policy,t,mean_cum_regret,std_cum_regret,mean_hit_rate"
RAW_FILENAME = "raw.csv"
AGGREGATE_FILENAME = "aggregate.csv"


@dataclass(frozen=True)
class RepResult:
    """Records of one completed repetition, keyed by policy label."""

    rep: int
    seed: int
    records: dict


@dataclass(frozen=True)
class MetricSeries:
    """Per-rep and aggregate series; arrays are (completed reps, horizon)."""

    horizon: int
    policies: tuple[str, ...]
    reps: tuple[int, ...]
    seeds: tuple[int, ...]
    per_rep_cum_regret: dict
    per_rep_hit_rate: dict
    mean_cum_regret: dict
    std_cum_regret: dict
    mean_hit_rate: dict


def build_family(config: ExperimentConfig):
    builder = FAMILY_BUILDERS[config.family_name]
    if config.omega is not None:
        return builder(omega=config.omega)
    return builder()


def build_instance(config: ExperimentConfig, rng: np.random.Generator):
    """Draw one instance; the action graph is drawn last so that sweeping
    its parameter never perturbs the actions or the true parameter."""
    family = build_family(config)
    if config.action_kind == "ingest":
        return ingest_reward_matrix(
            config.matrix_path, family, knn_k=config.knn_k,
            skip_header=config.skip_header,
            impute_missing=config.impute_missing,
        )
    if config.action_kind == "gaussian":
        actions = make_actions_gaussian(config.n_actions, config.d1,
                                        config.d2, rng)
    else:
        actions = make_actions_outer(config.n1, config.n2, config.d1,
                                     config.d2, rng)
    row_graph = er_graph(config.d1, config.side_p, rng)
    col_graph = er_graph(config.d2, config.side_p, rng)
    true_param = make_theta(config.d1, config.d2, config.rank, row_graph,
                            col_graph, rng)
    n = len(actions)
    if config.graph_model == "er":
        graph = er_graph(n, config.graph_p, rng)
    elif config.graph_model == "ba":
        graph = ba_graph(n, config.graph_m, rng)
    else:
        stack = np.stack([a.ravel() for a in actions])
        graph = knn_graph(stack, config.knn_k)
    return assemble_instance(actions, true_param, graph, family)


def _policy_stream_id(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _run_rep(config: ExperimentConfig, rep: int):
    """Worker body: one repetition, all policies, paired noise."""
    seed = config.base_seed + rep
    try:
        instance_rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
        instance = build_instance(config, instance_rng)
        noise_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        noise = draw_noise(noise_rng, config.horizon)
        hit_set = frozenset(
            int(i) for i in instance.top_set(config.hit_percent)
        )
        by_policy = {}
        for setting in config.policies:
            policy_rng = np.random.default_rng(np.random.SeedSequence(
                [seed, 2, _policy_stream_id(setting.config.name)]
            ))
            records = run_policy(setting.kind, instance, setting.config,
                                 rng=policy_rng, noise=noise, hit_set=hit_set)
            if len(records) != config.horizon:
                raise RuntimeError(
                    f"policy '{setting.config.name}' returned "
                    f"{len(records)} of {config.horizon} records"
                )
            by_policy[setting.config.name] = records
        return rep, seed, by_policy, None
    except Exception as exc:
        return rep, seed, None, f"{type(exc).__name__}: {exc}"


def _worker_count(config: ExperimentConfig) -> int:
    env = os.environ.get("GBL_WORKERS")
    if env is None:
        return config.workers
    try:
        workers = int(env)
    except ValueError:
        raise ConfigError(
            f"environment variable GBL_WORKERS must be an integer, got '{env}'"
        ) from None
    if workers < 1:
        raise ConfigError("environment variable GBL_WORKERS must be >= 1")
    return workers


def run_experiment(config: ExperimentConfig):
    """Run all repetitions and aggregate; returns (MetricSeries, raw results).

    A repetition in which any policy fails is excluded from both outputs
    with a warning naming the failure.
    """
    workers = min(_worker_count(config), config.reps)
    outcomes = {}
    if workers <= 1:
        for rep in range(config.reps):
            outcomes[rep] = _run_rep(config, rep)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {rep: pool.submit(_run_rep, config, rep)
                       for rep in range(config.reps)}
            for rep, fut in futures.items():
                outcomes[rep] = fut.result()

    raw = []
    for rep in range(config.reps):
        _, seed, by_policy, failure = outcomes[rep]
        if failure is not None:
            warnings.warn(
                f"repetition {rep} (seed {seed}) incomplete, excluded from "
                f"aggregation: {failure}",
                RuntimeWarning,
            )
            continue
        raw.append(RepResult(rep=rep, seed=seed, records=by_policy))
    if not raw:
        raise RuntimeError("every repetition failed; nothing to aggregate")

    labels = tuple(s.config.name for s in config.policies)
    t_axis = np.arange(1, config.horizon + 1)
    per_cum = {}
    per_hit = {}
    for label in labels:
        cum = np.stack([
            np.cumsum([r.instant_regret for r in rep.records[label]])
            for rep in raw
        ])
        hits = np.stack([
            np.cumsum([1.0 if r.hit else 0.0 for r in rep.records[label]])
            for rep in raw
        ]) / t_axis
        per_cum[label] = cum
        per_hit[label] = hits
    series = MetricSeries(
        horizon=config.horizon,
        policies=labels,
        reps=tuple(r.rep for r in raw),
        seeds=tuple(r.seed for r in raw),
        per_rep_cum_regret=per_cum,
        per_rep_hit_rate=per_hit,
        mean_cum_regret={l: per_cum[l].mean(axis=0) for l in labels},
        std_cum_regret={l: per_cum[l].std(axis=0) for l in labels},
        mean_hit_rate={l: per_hit[l].mean(axis=0) for l in labels},
    )
    return series, raw


def hit_rate(records, optimal_set) -> np.ndarray:
    """Running fraction of rounds whose chosen action lies in the given set."""
    chosen_in = set(int(i) for i in optimal_set)
    flags = np.fromiter(
        (1.0 if r.action in chosen_in else 0.0 for r in records),
        dtype=float, count=len(records),
    )
    return np.cumsum(flags) / np.arange(1, len(records) + 1)


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".gblab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_results(series: MetricSeries, raw, out_dir: str):
    """Write raw.csv and aggregate.csv atomically; returns the two paths."""
    os.makedirs(out_dir, exist_ok=True)
    raw_buf = io.StringIO()
    raw_buf.write(RAW_HEADER + "\n")
    for label in series.policies:
        for rep_result in raw:
            cum = 0.0
            for record in rep_result.records[label]:
                cum += record.instant_regret
                raw_buf.write(
                    f"{label},{rep_result.rep},{rep_result.seed},{record.t},"
                    f"{record.action},{_fmt(record.reward)},"
                    f"{_fmt(record.instant_regret)},{_fmt(cum)},"
                    f"{1 if record.hit else 0}\n"
                )
    agg_buf = io.StringIO()
    agg_buf.write(AGGREGATE_HEADER + "\n")
    for label in series.policies:
        mean_c = series.mean_cum_regret[label]
        std_c = series.std_cum_regret[label]
        mean_h = series.mean_hit_rate[label]
        for i in range(series.horizon):
            agg_buf.write(
                f"{label},{i + 1},{_fmt(mean_c[i])},{_fmt(std_c[i])},"
                f"{_fmt(mean_h[i])}\n"
            )
    raw_path = os.path.join(out_dir, RAW_FILENAME)
    agg_path = os.path.join(out_dir, AGGREGATE_FILENAME)
    _atomic_write(raw_path, raw_buf.getvalue())
    _atomic_write(agg_path, agg_buf.getvalue())
    return raw_path, agg_path


def read_results(directory: str):
    """Parse the two CSVs back into typed rows; validates both headers."""
    raw_path = os.path.join(directory, RAW_FILENAME)
    agg_path = os.path.join(directory, AGGREGATE_FILENAME)
    raw_rows = []
    with open(raw_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RAW_HEADER.split(","):
            raise ValueError(f"unexpected raw header in {raw_path}: {header}")
        for row in reader:
            raw_rows.append({
                "policy": row[0], "rep": int(row[1]), "seed": int(row[2]),
                "t": int(row[3]), "action": int(row[4]),
                "reward": float(row[5]), "instant_regret": float(row[6]),
                "cum_regret": float(row[7]), "hit": row[8] == "1",
            })
    agg_rows = []
    with open(agg_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != AGGREGATE_HEADER.split(","):
            raise ValueError(f"unexpected aggregate header in {agg_path}: "
                             f"{header}")
        for row in reader:
            agg_rows.append({
                "policy": row[0], "t": int(row[1]),
                "mean_cum_regret": float(row[2]),
                "std_cum_regret": float(row[3]),
                "mean_hit_rate": float(row[4]),
            })
    return raw_rows, agg_rows
