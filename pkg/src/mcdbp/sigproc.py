"""Sampled dual-polarisation fields and linear frequency-domain DSP.

All filtering is circular: each frame is treated as one period of a cyclic
signal and filters are applied by multiplying the FFT of the whole frame.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft
from scipy import signal as ssig

from .modem import SymbolFrame

FIELD_MAGIC = b"MCDBPFLD"


@dataclass(frozen=True)
class SampledField:
    """Complex envelope of both polarisations, shape ``(2, n)``.

    ``samples`` are in sqrt(W); ``centre_frequency_offset`` is the frequency
    (Hz) of baseband DC relative to the comb centre.
    """
    samples: np.ndarray
    sample_rate: float
    centre_frequency_offset: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 2 or s.shape[0] != 2:
            raise ValueError("samples must have shape (2, n)")
        n = s.shape[1]
        if n < 1 or n & (n - 1):
            raise ValueError("field length must be a power of two")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @classmethod
    def from_pols(cls, x_pol, y_pol, sample_rate, centre_frequency_offset=0.0):
        if len(x_pol) != len(y_pol):
            raise ValueError("polarisations must have equal length")
        return cls(np.stack([x_pol, y_pol]).astype(complex), sample_rate,
                   centre_frequency_offset)

    @property
    def x_pol(self) -> np.ndarray:
        return self.samples[0]

    @property
    def y_pol(self) -> np.ndarray:
        return self.samples[1]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def power(self) -> float:
        """Mean total power (both polarisations) in W."""
        s = self.samples
        return float(np.mean(s.real ** 2 + s.imag ** 2) * 2)

    @property
    def energy(self) -> float:
        s = self.samples
        return float(np.sum(s.real ** 2 + s.imag ** 2))

    def frequencies(self) -> np.ndarray:
        return sfft.fftfreq(self.n, 1.0 / self.sample_rate)

    def with_samples(self, samples) -> "SampledField":
        return replace(self, samples=samples)

    def spectrum(self) -> np.ndarray:
        return sfft.fft(self.samples, axis=-1)


@dataclass(frozen=True)
class RrcSpec:
    symbol_period: float
    rolloff: float

    def __post_init__(self):
        if not 0 < self.rolloff < 1:
            raise ValueError("rolloff must lie in (0, 1)")
        if self.symbol_period <= 0:
            raise ValueError("symbol_period must be positive")

    @classmethod
    def from_rate(cls, symbol_rate, rolloff):
        return cls(1.0 / symbol_rate, rolloff)

    @property
    def symbol_rate(self) -> float:
        return 1.0 / self.symbol_period

    @property
    def half_bandwidth(self) -> float:
        return (1 + self.rolloff) / (2 * self.symbol_period)


def rrc_response(f, spec: RrcSpec):
    """Root-raised-cosine amplitude response with unit passband gain."""
    f = np.abs(np.asarray(f, dtype=float))
    T, b = spec.symbol_period, spec.rolloff
    f1 = (1 - b) / (2 * T)
    f2 = (1 + b) / (2 * T)
    h = np.zeros_like(f)
    h[f <= f1] = 1.0
    band = (f > f1) & (f <= f2)
    h[band] = np.sqrt(0.5 * (1 + np.cos(np.pi * T / b * (f[band] - f1))))
    return h if h.ndim else float(h)


def _sps(sample_rate, symbol_rate) -> int:
    sps = sample_rate / symbol_rate
    if abs(sps - round(sps)) > 1e-9 * sps:
        raise ValueError("sample_rate must be an integer multiple of the symbol rate")
    return int(round(sps))


def shape_channel(frame: SymbolFrame, spec: RrcSpec, sample_rate: float) -> SampledField:
    """RRC-shape a symbol frame; output has unit mean total power."""
    if sample_rate < (1 + spec.rolloff) / spec.symbol_period:
        raise ValueError("sample_rate too low for the RRC bandwidth (undersampled)")
    sps = _sps(sample_rate, spec.symbol_rate)
    n = frame.n_symbols * sps
    impulses = np.zeros((2, n), complex)
    impulses[:, ::sps] = frame.symbols
    H = rrc_response(sfft.fftfreq(n, 1.0 / sample_rate), spec)
    samples = sfft.ifft(sfft.fft(impulses, axis=-1) * H, axis=-1)
    field = SampledField(samples, sample_rate)
    return field.with_samples(samples / np.sqrt(field.power))


def _shift_bins(field: SampledField, delta_f: float) -> int:
    df = field.sample_rate / field.n
    bins = delta_f / df
    if abs(bins - round(bins)) > 1e-6:
        raise ValueError(f"frequency shift {delta_f} Hz is not a multiple of the "
                         f"grid resolution {df} Hz (the frame would not stay cyclic)")
    return int(round(bins))


def frequency_shift(field: SampledField, delta_f: float, check_aliasing: bool = True,
                    tol: float = 1e-12) -> SampledField:
    """Multiply by exp(i 2 pi delta_f t).

    ``delta_f`` must lie on the FFT grid. With ``check_aliasing`` the call
    fails if more than ``tol`` of the energy would wrap past the Nyquist edge.
    """
    if delta_f == 0:
        return field
    k = _shift_bins(field, delta_f)
    if check_aliasing:
        f = field.frequencies()
        fs = field.sample_rate
        wraps = (f + delta_f >= fs / 2) | (f + delta_f < -fs / 2)
        S = field.spectrum()
        p = S.real ** 2 + S.imag ** 2
        if p[:, wraps].sum() > tol * p.sum():
            raise ValueError("frequency shift would alias signal energy across "
                             "the Nyquist edge")
    t = np.arange(field.n)
    # on-grid exponent computed modulo n keeps the phasor exact
    phasor = np.exp(2j * np.pi * ((k * t) % field.n) / field.n)
    return SampledField(field.samples * phasor, field.sample_rate,
                        field.centre_frequency_offset + delta_f)


def multiplex(channel_fields: list[SampledField], spacing: float) -> SampledField:
    """Sum channels at offsets k * spacing, k = -(N-1)/2 ... (N-1)/2."""
    n_ch = len(channel_fields)
    if n_ch % 2 == 0:
        raise ValueError("an odd number of channels is required")
    first = channel_fields[0]
    if any(f.sample_rate != first.sample_rate or f.n != first.n for f in channel_fields):
        raise ValueError("all channel fields must share sample rate and length")
    half = (n_ch - 1) // 2
    total = np.zeros_like(first.samples)
    for k, f in zip(range(-half, half + 1), channel_fields):
        total += frequency_shift(f, k * spacing).samples
    return SampledField(total, first.sample_rate, 0.0)


def set_launch_power(field: SampledField, per_channel_dbm: float,
                     n_channels: int) -> SampledField:
    p = field.power
    if p <= 0:
        raise ValueError("cannot set the power of a silent field")
    target = n_channels * 10 ** ((per_channel_dbm - 30) / 10)
    return field.with_samples(field.samples * np.sqrt(target / p))


def selection_response(f, bandwidth: float, shape: str = "rrc_aggregate",
                       rolloff: float = 0.001):
    if shape == "rrc_aggregate":
        return rrc_response(f, RrcSpec(1.0 / bandwidth, rolloff))
    if shape == "ideal_brickwall":
        return (np.abs(f) <= bandwidth / 2).astype(float)
    raise ValueError(f"unknown filter shape {shape!r}")


def bandwidth_select(field: SampledField, bandwidth: float,
                     shape: str = "rrc_aggregate", rolloff: float = 0.001) -> SampledField:
    """Suppress spectrum outside +-bandwidth/2 around the field centre.

    ``rrc_aggregate`` uses an RRC envelope whose -3 dB edges sit at
    +-bandwidth/2; ``ideal_brickwall`` is a rectangular window.
    """
    if bandwidth > field.sample_rate * (1 + 1e-12):
        raise ValueError("bandwidth exceeds the sample rate")
    H = selection_response(field.frequencies(), bandwidth, shape, rolloff)
    return field.with_samples(sfft.ifft(field.spectrum() * H, axis=-1))


def resample(field: SampledField, sample_rate: float) -> SampledField:
    """Change the sample rate by zero-padding or truncating the spectrum.

    Truncation discards any content beyond the new Nyquist frequency, so
    band-limit first when downsampling.
    """
    n_new = field.n * sample_rate / field.sample_rate
    if abs(n_new - round(n_new)) > 1e-9:
        raise ValueError("resampling ratio must give an integer length")
    n_new = int(round(n_new))
    if n_new == field.n:
        return field
    S = sfft.fftshift(field.spectrum(), axes=-1)
    if n_new < field.n:
        start = (field.n - n_new) // 2
        S = S[:, start:start + n_new]
    else:
        pad = (n_new - field.n) // 2
        S = np.pad(S, ((0, 0), (pad, pad)))
    samples = sfft.ifft(sfft.ifftshift(S, axes=-1), axis=-1) * (n_new / field.n)
    return SampledField(samples, sample_rate, field.centre_frequency_offset)


def matched_filter_downsample(field: SampledField, channel_index: int, spec: RrcSpec,
                              spacing: float | None = None) -> np.ndarray:
    """Received symbols of channel ``channel_index`` (signed comb offset).

    The channel is moved to baseband, RRC matched-filtered and sampled once
    per symbol at sample 0 of each period. Returns an array of shape
    ``(2, n_symbols)`` whose mean power equals the per-polarisation power of
    a noiseless channel.
    """
    spacing = spec.symbol_rate if spacing is None else spacing
    sps = _sps(field.sample_rate, spec.symbol_rate)
    offset = channel_index * spacing - field.centre_frequency_offset
    if abs(offset) + spec.half_bandwidth > field.sample_rate / 2:
        raise ValueError(f"channel index {channel_index} lies outside the field bandwidth")
    k = _shift_bins(field, offset)
    S = np.roll(field.spectrum(), -k, axis=-1)
    S *= rrc_response(field.frequencies(), spec)
    # decimate by folding the spectrum onto n/sps bins
    n_sym = field.n // sps
    folded = S.reshape(2, sps, n_sym).sum(axis=1) / sps
    return sfft.ifft(folded, axis=-1)


# --------------------------------------------------------------------------
# file formats

def write_field(path, field: SampledField) -> None:
    """Binary dump: magic ``MCDBPFLD``, uint64 length, float64 sample rate,
    float64 centre offset, then x then y samples as little-endian complex64."""
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(np.array([field.n], "<u8").tobytes())
        fh.write(np.array([field.sample_rate, field.centre_frequency_offset], "<f8").tobytes())
        fh.write(field.samples.astype("<c8").tobytes())


def read_field(path) -> SampledField:
    with open(path, "rb") as fh:
        if fh.read(8) != FIELD_MAGIC:
            raise ValueError(f"{path}: not a field dump")
        n = int(np.frombuffer(fh.read(8), "<u8")[0])
        fs, offset = np.frombuffer(fh.read(16), "<f8")
        samples = np.frombuffer(fh.read(), "<c8").reshape(2, n).astype(complex)
    return SampledField(samples, float(fs), float(offset))


def psd(field: SampledField, nperseg: int = 4096):
    """Welch PSD summed over polarisations; frequencies ascending, W/Hz."""
    nperseg = min(nperseg, field.n)
    f, p = ssig.welch(field.samples, fs=field.sample_rate, nperseg=nperseg,
                      return_onesided=False, detrend=False, axis=-1)
    return sfft.fftshift(f), sfft.fftshift(p.sum(axis=0))


def write_spectrum_csv(path, field: SampledField, nperseg: int = 4096) -> None:
    f, p = psd(field, nperseg)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_Hz", "psd_dB"])
        for fi, pi in zip(f, p):
            w.writerow([f"{fi:.6e}", f"{10 * np.log10(max(pi, 1e-300)):.4f}"])
