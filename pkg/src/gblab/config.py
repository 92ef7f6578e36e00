"""Experiment configuration: flat INI files with one section per policy.

The file has four fixed sections ([experiment], [instance], [graph],
[family]) plus one [policy:<label>] section per policy run.  Every key is
validated against a closed vocabulary so typos surface as named errors
rather than silently ignored settings.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace

from .envs import FAMILY_BUILDERS
from .policies import POLICY_REGISTRY, PolicyConfig

AUTO = "auto"


class ConfigError(ValueError):
    """A configuration problem; the message names the section and key."""


@dataclass(frozen=True)
class PolicySetting:
    """A registered policy kind paired with its fully resolved knobs."""

    kind: str
    config: PolicyConfig


@dataclass(frozen=True)
class ExperimentConfig:
    horizon: int
    reps: int
    base_seed: int
    out_dir: str
    hit_percent: float
    workers: int
    action_kind: str
    d1: int
    d2: int
    rank: int
    n_actions: int
    n1: int | None
    n2: int | None
    matrix_path: str | None
    skip_header: bool
    impute_missing: bool
    graph_model: str
    graph_p: float | None
    graph_m: int | None
    knn_k: int
    side_p: float
    family_name: str
    omega: float | None
    policies: tuple[PolicySetting, ...]


_EXPERIMENT_KEYS = {"horizon", "reps", "base_seed", "out_dir", "hit_percent",
                    "workers"}
_INSTANCE_KEYS = {"actions", "d1", "d2", "rank", "n_actions", "n1", "n2",
                  "matrix", "skip_header", "impute_missing"}
_GRAPH_KEYS = {"model", "p", "m", "knn_k", "side_p"}
_FAMILY_KEYS = {"name", "omega"}
_POLICY_KEYS = {"kind", "t1", "rank", "lam", "alpha", "lambda2", "lambda_perp",
                "tau", "delta", "zeta", "moment_scale", "ucb_scale"}


class _Section:
    """One section's raw keys plus typed getters that name their errors."""

    def __init__(self, name: str, raw: dict):
        self.name = name
        self.raw = dict(raw)

    def check_keys(self, allowed: set[str]) -> None:
        for key in self.raw:
            if key not in allowed:
                raise ConfigError(
                    f"invalid config key '{key}' in section [{self.name}]"
                )

    def _fetch(self, key, default, convert, kind_label):
        if key not in self.raw:
            if default is _REQUIRED:
                raise ConfigError(
                    f"missing required key '{key}' in section [{self.name}]"
                )
            return default
        text = self.raw[key].strip()
        try:
            return convert(text)
        except ConfigError:
            raise
        except Exception:
            raise ConfigError(
                f"key '{key}' in section [{self.name}] must be "
                f"{kind_label}, got '{text}'"
            ) from None

    def get_int(self, key, default=None):
        return self._fetch(key, default, int, "an integer")

    def get_float(self, key, default=None):
        return self._fetch(key, default, float, "a number")

    def get_str(self, key, default=None):
        return self._fetch(key, default, str, "a string")

    def get_bool(self, key, default=None):
        def conv(text):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(low)

        return self._fetch(key, default, conv, "a boolean")

    def get_auto_float(self, key):
        """A float, the literal 'auto', or absent; the latter two mean None."""
        if key not in self.raw:
            return None
        text = self.raw[key].strip()
        if text.lower() == AUTO:
            return None
        return self._fetch(key, _REQUIRED, float, "a number or 'auto'")

    def get_auto_int(self, key):
        if key not in self.raw:
            return None
        text = self.raw[key].strip()
        if text.lower() == AUTO:
            return None
        return self._fetch(key, _REQUIRED, int, "an integer or 'auto'")


_REQUIRED = object()


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def parse_config(text: str, origin: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {origin}: {exc}") from None

    known = {"experiment", "instance", "graph", "family"}
    policy_sections = []
    for section in parser.sections():
        if section in known:
            continue
        if section.startswith("policy:"):
            policy_sections.append(section)
            continue
        raise ConfigError(f"unknown config section [{section}]")
    for required in ("experiment", "instance", "family"):
        _require(parser.has_section(required),
                 f"missing required config section [{required}]")
    _require(bool(policy_sections),
             "config defines no [policy:<label>] sections")

    exp = _Section("experiment", parser["experiment"])
    exp.check_keys(_EXPERIMENT_KEYS)
    horizon = exp.get_int("horizon", _REQUIRED)
    reps = exp.get_int("reps", _REQUIRED)
    base_seed = exp.get_int("base_seed", _REQUIRED)
    out_dir = exp.get_str("out_dir", "results")
    hit_percent = exp.get_float("hit_percent", 5.0)
    workers = exp.get_int("workers", 1)
    _require(horizon >= 2, "key 'horizon' in section [experiment] must be >= 2")
    _require(reps >= 1, "key 'reps' in section [experiment] must be >= 1")
    _require(base_seed >= 0,
             "key 'base_seed' in section [experiment] must be >= 0")
    _require(0.0 < hit_percent < 100.0,
             "key 'hit_percent' in section [experiment] must lie in (0, 100)")
    _require(workers >= 1, "key 'workers' in section [experiment] must be >= 1")

    inst = _Section("instance", parser["instance"])
    inst.check_keys(_INSTANCE_KEYS)
    action_kind = inst.get_str("actions", _REQUIRED).lower()
    _require(action_kind in ("gaussian", "outer", "ingest"),
             "key 'actions' in section [instance] must be one of "
             "gaussian, outer, ingest")
    rank = inst.get_int("rank", _REQUIRED)
    _require(rank >= 1, "key 'rank' in section [instance] must be >= 1")
    d1 = d2 = 0
    n_actions = 0
    n1 = n2 = None
    matrix_path = None
    skip_header = inst.get_bool("skip_header", False)
    impute_missing = inst.get_bool("impute_missing", False)
    if action_kind == "ingest":
        matrix_path = inst.get_str("matrix", _REQUIRED)
    else:
        d1 = inst.get_int("d1", _REQUIRED)
        d2 = inst.get_int("d2", _REQUIRED)
        _require(d1 >= 1 and d2 >= 1,
                 "keys 'd1'/'d2' in section [instance] must be >= 1")
        _require(rank <= min(d1, d2),
                 "key 'rank' in section [instance] cannot exceed min(d1, d2)")
        if action_kind == "gaussian":
            n_actions = inst.get_int("n_actions", _REQUIRED)
            _require(n_actions >= 1,
                     "key 'n_actions' in section [instance] must be >= 1")
        else:
            n1 = inst.get_int("n1", _REQUIRED)
            n2 = inst.get_int("n2", _REQUIRED)
            _require(n1 >= 1 and n2 >= 1,
                     "keys 'n1'/'n2' in section [instance] must be >= 1")
            n_actions = n1 * n2

    graph_model = "knn"
    graph_p = None
    graph_m = None
    knn_k = 5
    side_p = 0.5
    if parser.has_section("graph"):
        gr = _Section("graph", parser["graph"])
        gr.check_keys(_GRAPH_KEYS)
        knn_k = gr.get_int("knn_k", 5)
        side_p = gr.get_float("side_p", 0.5)
        _require(knn_k >= 1, "key 'knn_k' in section [graph] must be >= 1")
        _require(0.0 < side_p <= 1.0,
                 "key 'side_p' in section [graph] must lie in (0, 1]")
        if action_kind == "ingest":
            model = gr.get_str("model", "knn").lower()
            _require(model == "knn",
                     "ingested instances always use a k-NN graph; "
                     "key 'model' in section [graph] must be knn")
        else:
            graph_model = gr.get_str("model", _REQUIRED).lower()
            _require(graph_model in ("er", "ba", "knn"),
                     "key 'model' in section [graph] must be one of er, ba, knn")
            if graph_model == "er":
                graph_p = gr.get_float("p", _REQUIRED)
                _require(0.0 < graph_p <= 1.0,
                         "key 'p' in section [graph] must lie in (0, 1]")
            elif graph_model == "ba":
                graph_m = gr.get_int("m", _REQUIRED)
                _require(graph_m >= 1,
                         "key 'm' in section [graph] must be >= 1")
    else:
        _require(action_kind == "ingest",
                 "missing required config section [graph]")

    fam = _Section("family", parser["family"])
    fam.check_keys(_FAMILY_KEYS)
    family_name = fam.get_str("name", _REQUIRED).lower()
    _require(family_name in FAMILY_BUILDERS,
             "key 'name' in section [family] must be one of "
             + ", ".join(sorted(FAMILY_BUILDERS)))
    omega = fam.get_float("omega", None)
    if omega is not None:
        _require(omega >= 0.0,
                 "key 'omega' in section [family] must be >= 0")

    policies = []
    seen = set()
    for section in policy_sections:
        label = section.split(":", 1)[1].strip()
        _require(bool(label), f"empty policy label in section [{section}]")
        _require(label not in seen, f"duplicate policy label '{label}'")
        seen.add(label)
        pol = _Section(section, parser[section])
        pol.check_keys(_POLICY_KEYS)
        kind = pol.get_str("kind", label).lower()
        _require(kind in POLICY_REGISTRY,
                 f"key 'kind' in section [{section}] must be one of "
                 + ", ".join(sorted(POLICY_REGISTRY)))
        try:
            pc = PolicyConfig(
                name=label,
                horizon=horizon,
                rank=pol.get_int("rank", rank),
                lam=pol.get_float("lam", 0.01),
                alpha=pol.get_float("alpha", 0.0),
                t1=pol.get_auto_int("t1"),
                lambda2=pol.get_float("lambda2", 1.0),
                lambda_perp=pol.get_auto_float("lambda_perp"),
                tau=pol.get_auto_float("tau"),
                delta=pol.get_float("delta", 0.01),
                zeta=pol.get_float("zeta", 1.0),
                moment_scale=pol.get_auto_float("moment_scale"),
                ucb_scale=pol.get_float("ucb_scale", 1.0),
            )
        except ValueError as exc:
            raise ConfigError(f"section [{section}]: {exc}") from None
        policies.append(PolicySetting(kind=kind, config=pc))

    return ExperimentConfig(
        horizon=horizon, reps=reps, base_seed=base_seed, out_dir=out_dir,
        hit_percent=hit_percent, workers=workers, action_kind=action_kind,
        d1=d1, d2=d2, rank=rank, n_actions=n_actions, n1=n1, n2=n2,
        matrix_path=matrix_path, skip_header=skip_header,
        impute_missing=impute_missing, graph_model=graph_model,
        graph_p=graph_p, graph_m=graph_m, knn_k=knn_k, side_p=side_p,
        family_name=family_name, omega=omega, policies=tuple(policies),
    )


def load_config(path: str) -> ExperimentConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), origin=path)


def override_config(config: ExperimentConfig, seed=None, reps=None,
                    out_dir=None) -> ExperimentConfig:
    """Apply CLI-level overrides; policy horizons are untouched."""
    if seed is not None:
        if seed < 0:
            raise ConfigError("--seed must be >= 0")
        config = replace(config, base_seed=seed)
    if reps is not None:
        if reps < 1:
            raise ConfigError("--reps must be >= 1")
        config = replace(config, reps=reps)
    if out_dir is not None:
        config = replace(config, out_dir=out_dir)
    return config
