"""Render static figures from the experiment harness's aggregate CSV files.

The only input format is the documented aggregate schema
(``policy,t,mean_cum_regret,std_cum_regret,mean_hit_rate``); anything else is
rejected with the offending column named. Output files are deterministic for
a given job: fixed style constants, pinned image metadata, and a fixed SVG
hash salt, so a rerun reproduces the same bytes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import csv

import matplotlib

# Selected before pyplot is imported so no display backend is ever probed.
matplotlib.use("Agg")

import matplotlib.pyplot as plt

AGGREGATE_COLUMNS = ("policy", "t", "mean_cum_regret", "std_cum_regret",
                     "mean_hit_rate")
KINDS = ("regret", "hitrate", "sweep")

_FIGSIZE = (6.4, 4.2)
_DPI = 150
_BAND_ALPHA = 0.2
# Fixed salt keeps the element ids of SVG output identical across runs.
_HASHSALT = "gblab-plots"


class PlotError(ValueError):
    """A bad job or input file; the CLI maps it to a nonzero exit."""


@dataclass(frozen=True)
class PlotJob:
    """One figure to render.

    ``inputs`` holds one aggregate CSV for the regret and hitrate kinds and
    one per overlaid curve for the sweep kind. ``labels``, when given, must
    match the number of legend entries the kind produces. ``policy`` selects
    which policy's curve a sweep draws from each file; it defaults to the
    first policy appearing in that file.
    """

    inputs: tuple[str, ...]
    out_path: str
    kind: str
    labels: tuple[str, ...] | None = None
    policy: str | None = None
    title: str | None = None


def _read_aggregate(path):
    """Parse one aggregate CSV into (policy order, per-policy columns)."""
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise PlotError(f"cannot read {path}: {exc.strerror}") from None
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise PlotError(f"{path}: empty file, no header row")
        for column in AGGREGATE_COLUMNS:
            if column not in header:
                raise PlotError(f"{path}: missing column '{column}'")
        extras = [column for column in header
                  if column not in AGGREGATE_COLUMNS]
        if extras:
            raise PlotError(f"{path}: unexpected column '{extras[0]}'")
        index = {column: header.index(column) for column in AGGREGATE_COLUMNS}
        order = []
        series = {}
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise PlotError(f"{path}: row {line_no} has {len(row)} "
                                f"fields, expected {len(header)}")
            label = row[index["policy"]]
            if label not in series:
                order.append(label)
                series[label] = {column: [] for column in AGGREGATE_COLUMNS[1:]}
            for column in AGGREGATE_COLUMNS[1:]:
                text = row[index[column]]
                try:
                    value = float(text)
                except ValueError:
                    raise PlotError(
                        f"{path}: column '{column}' holds non-numeric "
                        f"value '{text}' (row {line_no})"
                    ) from None
                series[label][column].append(value)
    if not order:
        raise PlotError(f"{path}: empty CSV body, nothing to plot")
    return order, series


def _legend_labels(job, defaults, noun):
    if job.labels is None:
        return list(defaults)
    if len(job.labels) != len(defaults):
        raise PlotError(f"{len(job.labels)} labels given for "
                        f"{len(defaults)} {noun}")
    return list(job.labels)


def _input_label(path):
    # The harness always writes "aggregate.csv", so the enclosing directory
    # (one per sweep value) is the distinguishing name.
    stem = os.path.splitext(os.path.basename(path))[0]
    if stem == "aggregate":
        parent = os.path.basename(os.path.dirname(os.path.abspath(path)))
        if parent:
            return parent
    return stem


def _sweep_curve(path, table, policy):
    order, series = table
    if policy is None:
        policy = order[0]
    elif policy not in series:
        raise PlotError(f"{path}: policy '{policy}' not in file "
                        f"(has: {', '.join(order)})")
    data = series[policy]
    return data["t"], data["mean_cum_regret"]


def _build_figure(job, tables):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    try:
        if job.kind == "regret":
            order, series = tables[0]
            names = _legend_labels(job, order, "policies")
            for label, name in zip(order, names):
                data = series[label]
                line, = ax.plot(data["t"], data["mean_cum_regret"],
                                label=name)
                low = [m - s for m, s in zip(data["mean_cum_regret"],
                                             data["std_cum_regret"])]
                high = [m + s for m, s in zip(data["mean_cum_regret"],
                                              data["std_cum_regret"])]
                ax.fill_between(data["t"], low, high,
                                color=line.get_color(), alpha=_BAND_ALPHA,
                                linewidth=0)
            ax.set_ylabel("mean cumulative regret")
        elif job.kind == "hitrate":
            order, series = tables[0]
            names = _legend_labels(job, order, "policies")
            for label, name in zip(order, names):
                data = series[label]
                ax.plot(data["t"], data["mean_hit_rate"], label=name)
            ax.set_ylabel("hit rate")
            ax.set_ylim(-0.02, 1.02)
        else:
            defaults = [_input_label(path) for path in job.inputs]
            names = _legend_labels(job, defaults, "input files")
            for path, table, name in zip(job.inputs, tables, names):
                ts, regret = _sweep_curve(path, table, job.policy)
                ax.plot(ts, regret, label=name)
            ax.set_ylabel("mean cumulative regret")
        ax.set_xlabel("t")
        ax.grid(True, alpha=0.3)
        ax.legend()
        if job.title:
            ax.set_title(job.title)
        fig.tight_layout()
    except Exception:
        plt.close(fig)
        raise
    return fig


def _image_metadata(out_path):
    # Each writer stamps a creation date unless told otherwise; pinning the
    # metadata keeps reruns byte-identical.
    ext = os.path.splitext(out_path)[1].lower()
    if ext == ".png":
        return {"Software": _HASHSALT}
    if ext == ".svg":
        return {"Date": None}
    if ext == ".pdf":
        return {"CreationDate": None}
    return None


def plot(job: PlotJob) -> str:
    """Render ``job`` and return the written image path.

    All inputs are validated before the output path is touched, so a failed
    job never leaves a file behind.
    """
    if job.kind not in KINDS:
        raise PlotError(f"unknown plot kind '{job.kind}' "
                        f"(choices: {', '.join(KINDS)})")
    if not job.inputs:
        raise PlotError("no input files given")
    if job.kind in ("regret", "hitrate") and len(job.inputs) != 1:
        raise PlotError(f"kind '{job.kind}' takes exactly one input file, "
                        f"got {len(job.inputs)}")
    tables = [_read_aggregate(path) for path in job.inputs]
    fig = _build_figure(job, tables)
    try:
        with matplotlib.rc_context({"svg.hashsalt": _HASHSALT}):
            fig.savefig(job.out_path, dpi=_DPI,
                        metadata=_image_metadata(job.out_path))
    except (ValueError, OSError) as exc:
        raise PlotError(f"cannot write {job.out_path}: {exc}") from None
    finally:
        plt.close(fig)
    return job.out_path
