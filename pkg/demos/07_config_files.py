"""Configuration files: presets, round trip, overrides and validation."""
# %%
from mcdbp import ConfigError, dump_config, load_config, paper_config
from mcdbp.config import apply_overrides

text = dump_config(paper_config())
print(text)

# %% the dump loads back to the same configuration
assert load_config(text, apply_env=False) == paper_config()

# %% dotted-key overrides, as taken by ``mcdbp --set``
cfg = apply_overrides(paper_config(), ["launch_power_dbm=-2", "wdm.format=QPSK"])
print(cfg.launch_power_dbm, cfg.wdm.format)

# %% errors name the key at fault
for bad in (text.replace("wdm.n_channels = 9", "wdm.n_channels = 0"),
            text + "wdm.colour = 1\n",
            text.replace("wdm.rolloff = 0.001\n", "")):
    try:
        load_config(bad)
    except ConfigError as exc:
        print("rejected:", exc)
