import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcdbp.config import WdmSpec
from mcdbp.metrics import (SNR_CAP_DB, MetricsReport, air, estimate_snr, mi_awgn,
                           mi_from_air, score)
from mcdbp.modem import build_constellation, generate_frame

from oracles import qam_points

# Monte-Carlo oracle (tests/oracles.py::mi_monte_carlo, 1e6 draws; 4e5 for 256QAM)
MC_MI = [
    (4, 0, 0.97351), (4, 5, 1.71832), (4, 10, 1.99348),
    (16, 5, 1.97405), (16, 10, 3.16387), (16, 15, 3.92838),
    (64, 15, 4.68177), (64, 20, 5.80167),
    (256, 20, 6.25916), (256, 25, 7.61699), (256, 30, 7.99540),
]


def _wdm(n_ch=9, fmt="256QAM"):
    return WdmSpec(n_ch, 32e9, 32e9, 0.001, 1550e-9, fmt, 64)


def test_constellation_matches_independent_grid():
    for M in (4, 16, 64, 256):
        a = np.sort_complex(build_constellation(M).points)
        b = np.sort_complex(qam_points(M))
        assert np.allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("M,snr,mc", MC_MI)
def test_mi_against_monte_carlo(M, snr, mc):
    assert mi_awgn(snr, M) == pytest.approx(mc, abs=0.01)
    assert mi_awgn(snr, M, order=30) == pytest.approx(mc, abs=0.005)


@pytest.mark.parametrize("M", [4, 16, 64, 256])
def test_mi_limits_and_monotone(M):
    vals = [mi_awgn(s, M) for s in np.arange(-10, 41, 2.5)]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    assert vals[0] < 0.2
    assert mi_awgn(45, M) == pytest.approx(math.log2(M), abs=1e-6)
    assert 0 <= mi_awgn(-30, M) < 1e-2


def test_mi_below_shannon():
    for M in (4, 16, 64, 256):
        for s in (0, 10, 20):
            assert mi_awgn(s, M) <= math.log2(1 + 10 ** (s / 10)) + 1e-9


def test_air_examples():
    per, total = air(8.0, _wdm())
    assert per == pytest.approx(512e9)
    assert total == pytest.approx(4.608e12)
    assert mi_from_air(2.86e12, _wdm()) == pytest.approx(4.96528, abs=1e-5)


def test_snr_estimator_known_noise():
    n = 2 ** 16
    rng = np.random.default_rng(0)
    tx = generate_frame(0, build_constellation(16), n, 2).symbols
    sigma2 = 10 ** (-20 / 10)
    noise = np.sqrt(sigma2 / 2) * (rng.standard_normal(tx.shape) + 1j * rng.standard_normal(tx.shape))
    rx = 0.3 * np.exp(0.7j) * tx + 0.3 * noise
    assert estimate_snr(tx, rx) == pytest.approx(20.0, abs=0.05)


def test_snr_cap_and_shape_errors():
    tx = generate_frame(0, build_constellation(4), 64, 1).symbols
    assert estimate_snr(tx, tx) == SNR_CAP_DB
    assert estimate_snr(tx, 2j * tx) == SNR_CAP_DB
    with pytest.raises(ValueError):
        estimate_snr(tx, tx[:, :10])
    with pytest.raises(ValueError):
        estimate_snr(np.zeros(4), np.ones(4))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.floats(-math.pi, math.pi), st.integers(0, 1000))
def test_snr_invariant_to_complex_gain(g, phi, seed):
    rng = np.random.default_rng(seed)
    tx = generate_frame(0, build_constellation(16), 256, seed).symbols
    rx = tx + 0.1 * (rng.standard_normal(tx.shape) + 1j * rng.standard_normal(tx.shape))
    assert estimate_snr(tx, g * np.exp(1j * phi) * rx) == pytest.approx(estimate_snr(tx, rx),
                                                                         abs=1e-9)


def test_score_and_report_round_trip():
    tx = generate_frame(0, build_constellation(16), 1024, 1).symbols
    rng = np.random.default_rng(1)
    rx = tx + 0.05 * (rng.standard_normal(tx.shape) + 1j * rng.standard_normal(tx.shape))
    rep = score(tx, rx, _wdm(3, "16QAM"))
    assert rep.n_symbols_used == 1024
    assert rep.air_total == pytest.approx(3 * rep.air_per_channel)
    assert rep.mi_bits_per_2d_symbol == pytest.approx(mi_awgn(rep.snr_db, 16))
    back = MetricsReport.from_csv_row(rep.csv_row())
    assert back.snr_db == pytest.approx(rep.snr_db, abs=1e-6)
    assert back.n_symbols_used == 1024
    assert set(rep.to_record()) == {"snr_db", "mi_bits_per_2d_symbol", "air_per_channel",
                                    "air_total", "n_symbols_used"}
