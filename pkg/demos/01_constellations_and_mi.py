"""Constellations, Gray labels and the AWGN mutual information that turns
an SNR into an achievable rate."""
# %%
import numpy as np

from mcdbp import WdmSpec, air, build_constellation, mi_awgn

# %% unit-energy square QAM with Gray labels
for M in (4, 16, 64, 256):
    c = build_constellation(M)
    print(f"{c.name:>7}: {M} points, mean energy {np.mean(np.abs(c.points) ** 2):.6f}, "
          f"peak {np.abs(c.points).max():.4f}")

c16 = build_constellation(16)
print("16QAM labels of the bottom row:", c16.bit_labels[:4])

# %% MI per 2D symbol; saturates at log2(M) and stays below Shannon
print("\n SNR   QPSK  16QAM  64QAM 256QAM  log2(1+SNR)")
for snr in range(0, 31, 5):
    row = " ".join(f"{mi_awgn(snr, M):6.3f}" for M in (4, 16, 64, 256))
    print(f"{snr:4d} {row}  {np.log2(1 + 10 ** (snr / 10)):6.3f}")

# %% AIR of a 9-channel 32 GBd system: 2 polarisations x Rs x MI x channels
wdm = WdmSpec(9, 32e9, 32e9, 0.001, 1550e-9, "256QAM", 1024)
for snr in (15, 20, 25):
    per_ch, total = air(mi_awgn(snr, 256), wdm)
    print(f"256QAM at {snr} dB: {per_ch / 1e9:.1f} Gbit/s per channel, {total / 1e12:.3f} Tbit/s")
