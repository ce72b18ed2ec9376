"""Minimum DBP steps per span on a reduced link.

Each ladder entry is back-propagated at every launch power, its peak SNR
is read at its own optimum power and compared with the forward step count.
"""
# %%
import dataclasses

from mcdbp import desk_config, mrnsps_study

cfg = desk_config()
cfg = cfg.replace(
    wdm=dataclasses.replace(cfg.wdm, n_symbols=2 ** 11),
    link=dataclasses.replace(cfg.link, n_spans=4,
                             fiber=dataclasses.replace(cfg.link.fiber, steps_per_span=50)))

# %% QPSK saturates its AIR on this short link; 256QAM does not
# two formats, two bandwidths, ladder up to the forward count of 50
results, _ = mrnsps_study(cfg, ["QPSK", "256QAM"], [32e9, 96e9], range(0, 17, 2),
                          ladder=(1, 2, 5, 10, 25, 50))

# %%
for r in results:
    peaks = ", ".join(f"{s}:{v:.3g}" for s, v in sorted(r.peak_values.items()))
    print(f"{r.criterion.upper():>3} {r.format:<6} {r.bandwidth / 1e9:3.0f} GHz -> "
          f"{r.chosen_steps:>3} steps/span   peaks {{{peaks}}}")
