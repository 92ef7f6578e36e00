"""Acceptance smoke test (A9): figures from real graph-sweep output.

The sweep CSVs come from the simulation package driven end to end through
its command line, so this suite touches only documented interfaces: the INI
config format, the `sweep` subcommand, and the aggregate CSV schema. The
companion requirement, that the simulation suite runs with no plot package
built, holds by construction: nothing in the simulation package imports or
mentions gblab_plots.
"""

import shutil
import subprocess
import sys

from gblab_plots import PlotJob, plot

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

# The acceptance sweep's instance geometry, desk-scaled in horizon and rep
# count so the smoke test stays fast.
CONFIG = """\
[experiment]
horizon = 300
reps = 2
base_seed = 0
out_dir = {out}

[instance]
actions = gaussian
d1 = 8
d2 = 8
rank = 2
n_actions = 100

[graph]
model = er
p = 0.5

[family]
name = linear
omega = 0.01

[policy:two_stage_graph]
t1 = 64
rank = 2
lam = 0.02
alpha = 0.0002
tau = 0.3
ucb_scale = 0.1

[policy:two_stage_plain]
t1 = 64
rank = 2
lam = 0.02
alpha = 0.0
tau = 0.3
ucb_scale = 0.1

[policy:graph_ucb]
alpha = 0.0002
ucb_scale = 0.1

[policy:glm_ucb]
ucb_scale = 0.1
"""


def _run_sweep(tmp_path):
    config = tmp_path / "sweep.ini"
    out = tmp_path / "sweep"
    config.write_text(CONFIG.format(out=out))
    executable = shutil.which("gblab")
    if executable:
        command = [executable]
    else:
        command = [sys.executable, "-c",
                   "import sys; from gblab.cli import main; "
                   "sys.exit(main(sys.argv[1:]))"]
    command += ["sweep", "--config", str(config), "--param", "graph_p",
                "--values", "0.2,0.5,0.8", "--out", str(out)]
    proc = subprocess.run(command, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    aggregates = sorted(out.glob("graph_p_*/aggregate.csv"))
    assert len(aggregates) == 3, proc.stdout
    return aggregates


def test_a9_one_image_per_sweep_value_plus_overlay(tmp_path):
    aggregates = _run_sweep(tmp_path)
    images = []
    for path in aggregates:
        target = tmp_path / f"{path.parent.name}_regret.png"
        assert plot(PlotJob(inputs=(str(path),), out_path=str(target),
                            kind="regret")) == str(target)
        images.append(target)
    overlay = tmp_path / "sweep_overlay.png"
    assert plot(PlotJob(inputs=tuple(str(p) for p in aggregates),
                        out_path=str(overlay), kind="sweep",
                        title="final regret across graph density")) \
        == str(overlay)
    images.append(overlay)
    for image in images:
        data = image.read_bytes()
        assert data[:8] == PNG_MAGIC
        assert len(data) > 1000
    print("A9: PASS (3 per-value regret images + 1 sweep overlay rendered "
          "from real sweep CSVs)")
