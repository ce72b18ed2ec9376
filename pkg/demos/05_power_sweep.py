"""Launch-power sweep on a reduced link, written as results CSV and plotted.

The same sweep at desk scale is ``mcdbp sweep-power --preset desk``.
"""
# %%
import dataclasses
import sys
from pathlib import Path

from mcdbp import DbpSpec, desk_config, find_optimum, power_sweep
from mcdbp.experiments import write_sweep_csv
from mcdbp.cli import main as cli

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_results")
out.mkdir(exist_ok=True)

# %% 5 spans, 50 steps per span and 2^11 symbols keep this under a minute
cfg = desk_config("QPSK")
cfg = cfg.replace(
    wdm=dataclasses.replace(cfg.wdm, n_symbols=2 ** 11),
    link=dataclasses.replace(cfg.link, n_spans=5,
                             fiber=dataclasses.replace(cfg.link.fiber, steps_per_span=50)))
comps = [None, DbpSpec(96e9, 50)]
points = power_sweep(cfg, range(-8, 13, 2), comps)

# %%
for label in ("EDC", "DBP 96 GHz, 50 steps/span"):
    best = find_optimum([p for p in points if p.label == label])
    print(f"{label:<28} optimum {best.power_dbm:+.0f} dBm, SNR {best.snr_db:.2f} dB")

# %% CSV plus SVG plots through the report command
write_sweep_csv(points, out / "sweep.csv")
cli(["report", str(out / "sweep.csv"), "--out", str(out)])
