"""Configs, presets, trace files and plot data, from Python.

The ``ehfl`` command wraps the same calls, e.g.
``ehfl run smoke -o runs/smoke`` then ``ehfl plot-data runs/smoke/*.csv --window 10``.
"""

# %%
import tempfile
from pathlib import Path

from ehfl.harness.config import load_config
from ehfl.harness.experiment import emit_plot_data, run_experiment
from ehfl.harness.trace import read_trace

out = Path(tempfile.mkdtemp())
cfg = load_config(preset="smoke", overrides=["training.T=80"], output_dir=out)
print("config hash", cfg.hash)

# %%
summary = run_experiment(cfg)
print("bound satisfied:", summary["bound"]["satisfied"])
print(sorted(p.name for p in out.iterdir()))

# %% traces carry a JSON header then one CSV row per round
tr = read_trace(out / summary["traces"][0])
print(tr.header["scheduler"], tr.header["seed"], tr.T, "rounds")
print((out / summary["traces"][0]).read_text().splitlines()[1])

# %%
text = emit_plot_data({"myopic": [read_trace(out / t) for t in summary["traces"]]}, "loss", window=10)
print(text.splitlines()[:3])
