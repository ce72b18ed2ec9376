import math

import numpy as np
import pytest

from mcdbp.channel import propagate_link
from mcdbp.config import DbpSpec, FiberSpec, LinkSpec, WdmSpec
from mcdbp.equalizer import dbp, dbp_sample_rate, edc
from mcdbp.metrics import estimate_snr
from mcdbp.modem import build_constellation, generate_frame
from mcdbp.sigproc import RrcSpec, matched_filter_downsample, set_launch_power, shape_channel

RS = 32e9


def _wdm(n_ch=1, n_sym=512, ovs=4):
    return WdmSpec(n_ch, RS, RS, 0.001, 1550e-9, "16QAM", n_sym, ovs)


def _link(n_spans=3, steps=10, gamma=1.2, ase=False):
    fib = FiberSpec(0.2, 17.0, gamma, 80.0, steps)
    return LinkSpec(n_spans, fib, 4.5, ase=ase)


def _tx(wdm, p_dbm, seed=1):
    frame = generate_frame(0, build_constellation(wdm.order), wdm.n_symbols, seed)
    f = shape_channel(frame, RrcSpec.from_rate(RS, wdm.rolloff), wdm.sample_rate)
    return frame, set_launch_power(f, p_dbm, 1)


def test_edc_inverts_linear_link():
    wdm = _wdm()
    link = _link(gamma=0.0, steps=1)
    frame, tx = _tx(wdm, 0.0)
    rx = edc(propagate_link(tx, link, 1, wdm.carrier_frequency), link)
    assert np.max(np.abs(rx.samples - tx.samples)) < 1e-10 * np.max(np.abs(tx.samples))


def test_edc_partial_length_and_zero():
    wdm = _wdm()
    link = _link(gamma=0.0)
    _, tx = _tx(wdm, 0.0)
    assert edc(tx, link, 0.0) is tx
    twice = edc(edc(tx, link, 120.0), link, 120.0)
    assert np.allclose(twice.samples, edc(tx, link, 240.0).samples, atol=1e-14)


@pytest.mark.parametrize("n_ch,bw,expect", [(1, 32e9, 2 * RS), (3, 32e9, 2 * RS),
                                            (3, 96e9, 8 * RS), (9, 288e9, 32 * RS),
                                            (9, 160e9, 16 * RS)])
def test_dbp_rate(n_ch, bw, expect):
    wdm = WdmSpec(n_ch, RS, RS, 0.001, 1550e-9, "QPSK", 64)
    assert dbp_sample_rate(DbpSpec(bw, 10), wdm, wdm.sample_rate) == expect


def test_dbp_rate_capped_and_full_grid():
    wdm = _wdm(ovs=4)
    assert dbp_sample_rate(DbpSpec(32e9, 1, oversampling_per_channel=8), wdm, 4 * RS) == 4 * RS
    assert dbp_sample_rate(DbpSpec(32e9, 1, oversampling_per_channel=0), wdm, 4 * RS) == 4 * RS


def test_dbp_exactly_inverts_noiseless_link():
    wdm = _wdm()
    link = _link(steps=12)
    _, tx = _tx(wdm, 6.0)
    rx = propagate_link(tx, link, 1, wdm.carrier_frequency)
    spec = DbpSpec(wdm.sample_rate, 12, "ideal_brickwall", power_scaling="none",
                   oversampling_per_channel=0)
    back = dbp(rx, spec, link, wdm, 6.0)
    assert np.max(np.abs(back.samples - tx.samples)) < 1e-9 * np.max(np.abs(tx.samples))


def test_inband_scaling_is_transparent_when_power_matches():
    wdm = _wdm()
    link = _link(steps=12)
    _, tx = _tx(wdm, 6.0)
    rx = propagate_link(tx, link, 1, wdm.carrier_frequency)
    a = dbp(rx, DbpSpec(wdm.sample_rate, 12, "ideal_brickwall", power_scaling="none",
                        oversampling_per_channel=0), link, wdm, 6.0)
    b = dbp(rx, DbpSpec(wdm.sample_rate, 12, "ideal_brickwall", power_scaling="inband",
                        oversampling_per_channel=0), link, wdm, 6.0)
    # the lossless link returns the launch power, so both agree
    assert np.max(np.abs(a.samples - b.samples)) < 1e-9 * np.max(np.abs(a.samples))


def test_single_channel_dbp_beats_edc_at_high_power():
    wdm = _wdm(n_sym=1024)
    link = _link(n_spans=5, steps=20)
    frame, tx = _tx(wdm, 8.0, seed=3)
    rx = propagate_link(tx, link, 1, wdm.carrier_frequency)
    spec = RrcSpec.from_rate(RS, wdm.rolloff)
    s_edc = estimate_snr(frame.symbols, matched_filter_downsample(edc(rx, link), 0, spec))
    out = dbp(rx, DbpSpec(32e9, 20), link, wdm, 8.0)
    s_dbp = estimate_snr(frame.symbols, matched_filter_downsample(out, 0, spec))
    assert s_dbp > s_edc + 10
    assert s_dbp > 30


def test_gamma_zero_dbp_equals_edc():
    wdm = _wdm()
    link = _link(steps=4)
    _, tx = _tx(wdm, 0.0)
    rx = propagate_link(tx, link, 1, wdm.carrier_frequency)
    spec = DbpSpec(wdm.sample_rate, 4, "ideal_brickwall", oversampling_per_channel=0)
    a = dbp(rx, spec, link, wdm, 0.0, gamma=0.0)
    b = edc(rx, link)
    # DBP also undoes the gain/loss bookkeeping, which nets to unity
    assert np.max(np.abs(a.samples - b.samples)) < 1e-10 * np.max(np.abs(b.samples))


def test_dbp_requires_power_and_valid_bandwidth():
    wdm = _wdm()
    link = _link()
    _, tx = _tx(wdm, 0.0)
    with pytest.raises(ValueError, match="launch power"):
        dbp(tx, DbpSpec(32e9, 1), link, wdm)
    with pytest.raises(ValueError, match="grid"):
        dbp(tx, DbpSpec(10 * wdm.sample_rate, 1), link, wdm, 0.0)
    assert math.isfinite(dbp(tx, DbpSpec(32e9, 1, launch_power_dbm=0.0), link, wdm).power)
