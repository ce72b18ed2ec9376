"""One launch power through the whole desk-scale chain: 3 channels, 10 x 80 km
with ASE, scored after EDC and after single- and full-field DBP."""
# %%
from mcdbp import DbpSpec, desk_config, simulate_point

cfg = desk_config("16QAM", launch_power_dbm=4.0)
comps = [None, DbpSpec(32e9, 200), DbpSpec(96e9, 200)]

# %% a single forward run is shared by the three receivers (about 40 s)
for p in simulate_point(cfg, cfg.launch_power_dbm, comps):
    r = p.report
    print(f"{p.label:<30} SNR {r.snr_db:6.2f} dB  MI {r.mi_bits_per_2d_symbol:.3f}  "
          f"AIR {r.air_total / 1e12:.3f} Tbit/s")
