import math

import pytest

AGG_HEADER = "policy,t,mean_cum_regret,std_cum_regret,mean_hit_rate"


def make_rows(policies, horizon, slope=2.0):
    """Deterministic sublinear-looking curves, one block per policy."""
    rows = []
    for i, label in enumerate(policies):
        for t in range(1, horizon + 1):
            mean = (i + 1) * slope * math.sqrt(t)
            std = 0.1 * (i + 1) * math.sqrt(t)
            hit = 1.0 - math.exp(-t / (10.0 * (i + 1)))
            rows.append(f"{label},{t},{mean:.10g},{std:.10g},{hit:.10g}")
    return rows


@pytest.fixture
def write_aggregate(tmp_path):
    """Write a schema-true aggregate CSV and return its path.

    ``header`` and ``rows`` exist so schema-violation tests can inject
    malformed content through the same helper.
    """

    def _write(name="aggregate.csv", policies=("two_stage_graph", "glm_ucb"),
               horizon=40, subdir=None, header=AGG_HEADER, rows=None):
        target = tmp_path if subdir is None else tmp_path / subdir
        target.mkdir(parents=True, exist_ok=True)
        path = target / name
        body = make_rows(policies, horizon) if rows is None else rows
        path.write_text("\n".join([header] + body) + "\n")
        return path

    return _write
