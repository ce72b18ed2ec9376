"""Receiver compensation: frequency-domain EDC and multi-channel digital
back-propagation (reverse split-step over a selected bandwidth)."""
from __future__ import annotations

import math

import numpy as np
import scipy.fft as sfft

from .channel import _omega2, link_amplifier, propagate_span
from .config import DbpSpec, LinkSpec, WdmSpec
from .sigproc import SampledField, bandwidth_select, resample

__all__ = ["DbpSpec", "edc", "dbp", "dbp_sample_rate"]


def edc(field: SampledField, link: LinkSpec, length: float | None = None) -> SampledField:
    """All-pass inverse of the accumulated dispersion of ``length`` km
    (default: the whole link)."""
    length = link.length if length is None else length
    if length == 0:
        return field
    beta2 = link.fiber.beta2 * 1e-24
    H = np.exp(-0.5j * beta2 * _omega2(field.n, field.sample_rate) * length)
    return field.with_samples(sfft.ifft(field.spectrum() * H, axis=-1))


def dbp_sample_rate(spec: DbpSpec, wdm: WdmSpec, grid_rate: float) -> float:
    """DSP rate for back-propagating ``spec.bandwidth``."""
    if spec.oversampling_per_channel == 0:
        return grid_rate
    k = max(1, round(spec.bandwidth / wdm.channel_spacing))
    sps = 1 << math.ceil(math.log2(spec.oversampling_per_channel * k))
    return min(grid_rate, sps * wdm.symbol_rate)


def dbp(field: SampledField, spec: DbpSpec, link: LinkSpec, wdm: WdmSpec,
        launch_power_dbm: float | None = None, gamma: float | None = None) -> SampledField:
    """Back-propagate the received full-band field over ``spec.bandwidth``.

    Steps: band-select (and resample to the DSP rate), scale the in-band
    power to the launch power of the selected channels, then for each span
    in reverse undo the amplifier gain and run the span backwards with
    ``spec.steps_per_span`` logarithmic steps. The result is rescaled by the
    inverse of the power normalisation. ``gamma`` overrides the fibre
    nonlinear coefficient inside DBP only.
    """
    p_dbm = spec.launch_power_dbm if launch_power_dbm is None else launch_power_dbm
    if p_dbm is None:
        raise ValueError("DBP needs the launch power")
    if spec.bandwidth > field.sample_rate:
        raise ValueError("DBP bandwidth exceeds the simulation grid")
    x = bandwidth_select(field, spec.bandwidth, spec.filter_shape, wdm.rolloff)
    x = resample(x, dbp_sample_rate(spec, wdm, field.sample_rate))

    scale = 1.0
    if spec.power_scaling == "inband":
        # channels actually inside the selected band
        k = min(wdm.n_channels, max(1, round(spec.bandwidth / wdm.channel_spacing)))
        target = k * 10 ** ((p_dbm - 30) / 10)
        scale = math.sqrt(target / x.power)
        x = x.with_samples(x.samples * scale)

    fiber = link.fiber
    if gamma is not None:
        fiber = type(fiber)(**{**fiber.__dict__, "gamma": gamma})
    inv_gain = 1 / math.sqrt(link_amplifier(link, wdm.carrier_frequency).gain)
    for _ in range(link.n_spans):
        x = x.with_samples(x.samples * inv_gain)
        x = propagate_span(x, fiber, spec.steps_per_span, direction="backward")
    return x.with_samples(x.samples / scale)
