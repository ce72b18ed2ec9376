import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from mcdbp.modem import build_constellation, generate_frame
from mcdbp.sigproc import (RrcSpec, SampledField, bandwidth_select, frequency_shift,
                           matched_filter_downsample, multiplex, psd, read_field, resample,
                           rrc_response, set_launch_power, shape_channel, write_field,
                           write_spectrum_csv)

from oracles import rrc_shape_direct

RS = 32e9


def _frame(n=256, k=0, seed=1, M=16):
    return generate_frame(k, build_constellation(M), n, seed)


def test_rrc_response_values():
    spec = RrcSpec.from_rate(RS, 0.001)
    assert rrc_response(0.0, spec) == 1.0
    assert rrc_response(RS / 2, spec) == pytest.approx(np.sqrt(0.5))
    assert rrc_response(RS * 0.51, spec) == 0.0
    assert spec.half_bandwidth == pytest.approx(RS * 1.001 / 2)


def test_shape_unit_power_and_bandwidth():
    f = shape_channel(_frame(), RrcSpec.from_rate(RS, 0.001), 4 * RS)
    assert f.power == pytest.approx(1.0, rel=1e-12)
    S = np.abs(f.spectrum()) ** 2
    out = np.abs(f.frequencies()) > RS * 1.001 / 2
    assert S[:, out].sum() < 1e-20 * S.sum()


def test_shape_matches_time_domain_convolution():
    # roll-off 0.25 so the truncated closed-form pulse converges quickly
    frame = _frame(n=128)
    sps = 4
    f = shape_channel(frame, RrcSpec(1 / RS, 0.25), sps * RS)
    ref = rrc_shape_direct(frame.x_pol, sps, 0.25, span=64)
    a = np.vdot(ref, f.x_pol) / np.vdot(ref, ref)
    err = np.linalg.norm(f.x_pol - a * ref) / np.linalg.norm(f.x_pol)
    assert err < 1e-3


def test_undersampling_rejected():
    with pytest.raises(ValueError, match="undersampled"):
        shape_channel(_frame(), RrcSpec.from_rate(RS, 0.001), RS)


def test_shift_round_trip_and_offset():
    f = shape_channel(_frame(), RrcSpec.from_rate(RS, 0.001), 8 * RS)
    g = frequency_shift(f, 2 * RS)
    assert g.centre_frequency_offset == 2 * RS
    back = frequency_shift(g, -2 * RS)
    assert np.max(np.abs(back.samples - f.samples)) < 1e-12


def test_shift_aliasing_and_grid():
    f = shape_channel(_frame(), RrcSpec.from_rate(RS, 0.001), 4 * RS)
    with pytest.raises(ValueError, match="alias"):
        frequency_shift(f, 2 * RS)
    with pytest.raises(ValueError, match="grid"):
        frequency_shift(f, 1e6 + 0.3)


def test_multiplex_nine_channels_power():
    spec = RrcSpec.from_rate(RS, 0.001)
    fields = [shape_channel(_frame(64, k), spec, 32 * RS) for k in range(-4, 5)]
    total = set_launch_power(multiplex(fields, RS), -2.0, 9)
    # oracle: 9 * 10**(-3.2) W = 5.6786 mW
    assert total.power == pytest.approx(5.67862e-3, rel=1e-4)


def test_multiplex_spectral_placement():
    spec = RrcSpec.from_rate(RS, 0.001)
    fields = [shape_channel(_frame(256, k), spec, 8 * RS) for k in (-1, 0, 1)]
    field = multiplex(fields, RS)
    fr = field.frequencies()
    S = (np.abs(field.spectrum()) ** 2).sum(0)
    for k in (-1, 0, 1):
        inside = np.abs(fr - k * RS) < 0.4 * RS
        assert S[inside].sum() > 0.25 * S.sum()
    outside = np.abs(fr) > 1.51 * RS
    assert S[outside].sum() < 1e-20 * S.sum()


def test_multiplex_needs_odd():
    f = shape_channel(_frame(), RrcSpec.from_rate(RS, 0.001), 4 * RS)
    with pytest.raises(ValueError):
        multiplex([f, f], RS)


def test_set_launch_power_dbm():
    f = shape_channel(_frame(), RrcSpec.from_rate(RS, 0.001), 4 * RS)
    assert set_launch_power(f, 0.0, 1).power == pytest.approx(1e-3)
    assert set_launch_power(f, 10.0, 3).power == pytest.approx(3e-2)


def test_matched_filter_recovers_symbols_single_channel():
    frame = _frame(512)
    f = shape_channel(frame, RrcSpec.from_rate(RS, 0.001), 4 * RS)
    rx = matched_filter_downsample(f, 0, RrcSpec.from_rate(RS, 0.001))
    h = np.vdot(frame.symbols[0], rx[0]) / np.vdot(frame.symbols[0], frame.symbols[0])
    err = np.abs(rx - h * frame.symbols) ** 2
    assert err.mean() / abs(h) ** 2 < 1e-20
    # output power equals per-polarisation power
    assert np.mean(np.abs(rx) ** 2) == pytest.approx(f.power / 2, rel=1e-9)


def test_matched_filter_out_of_band_index():
    f = shape_channel(_frame(), RrcSpec.from_rate(RS, 0.001), 4 * RS)
    with pytest.raises(ValueError, match="outside"):
        matched_filter_downsample(f, 3, RrcSpec.from_rate(RS, 0.001))


def test_nyquist_crosstalk_floor():
    """Neighbours at spacing = symbol rate leak through the roll-off overlap.

    For a flat-topped RRC the overlap energy per side is beta/8 of the
    channel, so with two neighbours the interference floor is about beta/4.
    """
    spec = RrcSpec.from_rate(RS, 0.001)
    n = 2 ** 13
    frames = [_frame(n, k, 5) for k in (-1, 0, 1)]
    fields = [shape_channel(f, spec, 8 * RS) for f in frames]
    rx = matched_filter_downsample(multiplex(fields, RS), 0, spec)
    t = frames[1].symbols
    h = np.vdot(t[0], rx[0]) / np.vdot(t[0], t[0])
    rel = np.mean(np.abs(rx - h * t) ** 2) / abs(h) ** 2
    assert 10 * np.log10(rel) == pytest.approx(10 * np.log10(0.001 / 4), abs=1.0)


def test_bandwidth_select_shapes():
    spec = RrcSpec.from_rate(RS, 0.001)
    fields = [shape_channel(_frame(256, k), spec, 8 * RS) for k in (-1, 0, 1)]
    field = multiplex(fields, RS)
    for shape in ("rrc_aggregate", "ideal_brickwall"):
        sel = bandwidth_select(field, RS, shape)
        S = (np.abs(sel.spectrum()) ** 2).sum(0)
        assert S[np.abs(sel.frequencies()) > 0.51 * RS].sum() < 1e-20 * S.sum()
    full = bandwidth_select(field, 3 * RS, "ideal_brickwall")
    assert full.power == pytest.approx(field.power, rel=1e-3)
    with pytest.raises(ValueError):
        bandwidth_select(field, 9 * RS)


def test_resample_round_trip():
    f = shape_channel(_frame(), RrcSpec.from_rate(RS, 0.001), 8 * RS)
    down = resample(f, 2 * RS)
    assert down.n == f.n // 4
    assert down.power == pytest.approx(f.power, rel=1e-9)
    up = resample(down, 8 * RS)
    assert np.max(np.abs(up.samples - f.samples)) < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([4, 16, 64, 256]))
def test_field_power_is_parseval(seed, M):
    f = shape_channel(_frame(64, 0, seed, M), RrcSpec.from_rate(RS, 0.1), 4 * RS)
    S = f.spectrum()
    assert np.sum(np.abs(S) ** 2) / f.n ** 2 == pytest.approx(f.power, rel=1e-9)


def test_field_dump_round_trip(tmp_path):
    f = frequency_shift(shape_channel(_frame(), RrcSpec.from_rate(RS, 0.001), 8 * RS), RS)
    write_field(tmp_path / "f.bin", f)
    g = read_field(tmp_path / "f.bin")
    assert g.sample_rate == f.sample_rate and g.centre_frequency_offset == RS
    assert np.max(np.abs(g.samples - f.samples)) < 1e-6


def test_field_dump_rejects_garbage(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"nope" * 10)
    with pytest.raises(ValueError):
        read_field(tmp_path / "x.bin")


def test_spectrum_csv(tmp_path):
    f = shape_channel(_frame(1024), RrcSpec.from_rate(RS, 0.001), 4 * RS)
    fr, p = psd(f, 512)
    assert np.all(np.diff(fr) > 0)
    assert trapezoid(p, fr) == pytest.approx(f.power, rel=0.05)
    write_spectrum_csv(tmp_path / "s.csv", f, 512)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "frequency_Hz,psd_dB"
    assert len(lines) == 513


def test_sampled_field_validation():
    with pytest.raises(ValueError):
        SampledField(np.zeros((2, 3), complex), 1.0)
    with pytest.raises(ValueError):
        SampledField(np.zeros((3, 4), complex), 1.0)
    with pytest.raises(ValueError):
        SampledField(np.zeros((2, 4), complex), 0.0)
