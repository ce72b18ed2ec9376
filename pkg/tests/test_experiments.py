import math

import numpy as np
import pytest

import mcdbp.experiments as ex
from mcdbp.config import DbpSpec, ExperimentSpec, FiberSpec, LinkSpec, SystemConfig, WdmSpec
from mcdbp.experiments import (SWEEP_COLUMNS, MrnspsResult, SweepPoint, find_optimum,
                               load_results, mrnsps_search, mrnsps_study, peak_value,
                               persist_results, power_sweep, read_sweep_csv,
                               write_mrnsps_table, write_sweep_csv)


def tiny(fmt="16QAM", n_ch=1, steps=8):
    fib = FiberSpec(0.2, 17.0, 1.2, 80.0, steps)
    return SystemConfig(
        wdm=WdmSpec(n_ch, 32e9, 32e9, 0.001, 1550e-9, fmt, 256, 4 if n_ch == 1 else 8),
        link=LinkSpec(3, fib, 4.5),
        dbp=DbpSpec(32e9, steps),
        launch_power_dbm=0.0, master_seed=3, scale_preset="custom",
        experiment=ExperimentSpec(ladder=(1, 2, 8)))


def _pt(p, snr, fmt="QPSK"):
    return SweepPoint(fmt, float(p), 0.0, 0, snr, 1.0, 1.0, 1)


def test_sweep_deterministic_and_ordered(tmp_path):
    cfg = tiny()
    comps = [None, cfg.dbp]
    a = power_sweep(cfg, [2, -2, 0], comps)
    b = power_sweep(cfg, [-2, 0, 2], comps)
    assert [p.power_dbm for p in a] == [-2, -2, 0, 0, 2, 2]
    assert [p.is_edc for p in a] == [True, False] * 3
    write_sweep_csv(a, tmp_path / "a.csv")
    write_sweep_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_parallel_matches_serial():
    cfg = tiny()
    serial = power_sweep(cfg, [-2, 4], [None, cfg.dbp])
    parallel = power_sweep(cfg, [-2, 4], [None, cfg.dbp], workers=2)
    assert serial == parallel


def test_seed_changes_results():
    cfg = tiny()
    a = power_sweep(cfg, [0], [None])[0]
    b = power_sweep(cfg.replace(master_seed=4), [0], [None])[0]
    assert a.snr_db != b.snr_db


def test_timing_flag():
    cfg = tiny()
    assert power_sweep(cfg, [0], [None])[0].wallclock_s == 0.0
    assert power_sweep(cfg, [0], [None], timing=True)[0].wallclock_s > 0.0


def test_cache_reuses_forward_run(monkeypatch):
    cfg = tiny()
    cache = {}
    power_sweep(cfg, [0], [None], cache=cache)
    calls = []
    monkeypatch.setattr(ex, "transmit", lambda *a: calls.append(a))
    power_sweep(cfg, [0], [cfg.dbp], cache=cache)
    assert not calls


def test_failure_is_recorded_and_sweep_continues(monkeypatch):
    cfg = tiny()
    real = ex.receive

    def flaky(cfg_, rx, tx, comp, p):
        if p == 0.0 and comp is not None:
            raise RuntimeError("boom")
        return real(cfg_, rx, tx, comp, p)

    monkeypatch.setattr(ex, "receive", flaky)
    pts = power_sweep(cfg, [-2, 0], [None, cfg.dbp])
    bad = [p for p in pts if p.error]
    assert len(bad) == 1 and "boom" in bad[0].error and math.isnan(bad[0].snr_db)
    assert sum(not math.isnan(p.snr_db) for p in pts) == 3


def test_dbp_improves_single_channel_tiny_link():
    cfg = tiny()
    pts = power_sweep(cfg, [6], [None, cfg.dbp])
    assert pts[1].snr_db > pts[0].snr_db + 3


def test_find_optimum_tie_and_edge():
    pts = [_pt(-2, 10.0), _pt(0, 12.0), _pt(2, 12.0), _pt(4, 11.0)]
    assert find_optimum(pts).power_dbm == 0
    with pytest.warns(UserWarning, match="boundary"):
        find_optimum([_pt(0, 1.0), _pt(2, 2.0)])
    with pytest.raises(ValueError):
        find_optimum([])
    with pytest.raises(ValueError):
        find_optimum([_pt(0, math.nan)])


def test_peak_value_parabola():
    p = np.arange(-4, 9, 2.0)
    v = 20 - 0.25 * (p - 1.3) ** 2
    xp, vp = peak_value(p, v)
    assert xp == pytest.approx(1.3)
    assert vp == pytest.approx(20.0)
    assert peak_value([0, 1, 2], [1, 2, 3]) == (2.0, 3.0)


def test_mrnsps_study_shapes_and_tolerance(tmp_path):
    cfg = tiny(steps=8)
    res, pts = mrnsps_study(cfg, ["QPSK"], [32e9], [2, 4, 6, 8, 10])
    assert {r.criterion for r in res} == {"air", "snr"}
    for r in res:
        assert r.reference_steps == 8
        assert r.chosen_steps in r.candidate_ladder
        assert r.peak_values[r.chosen_steps] >= r.converged_reference_value - r.tolerance
        smaller = [s for s in r.candidate_ladder if s < r.chosen_steps]
        assert all(r.peak_values[s] < r.converged_reference_value - r.tolerance
                   for s in smaller)
    air = next(r for r in res if r.criterion == "air")
    assert air.tolerance == pytest.approx(0.005 * 2 * 32e9 * 2)
    assert len(pts) == 5 * 3
    persist_results(res, tmp_path / "m.json")
    assert load_results(tmp_path / "m.json") == res
    write_mrnsps_table(res, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "criterion,format,32-GHz"
    assert lines[1].startswith("AIR,QPSK,") and lines[2].startswith("SNR,QPSK,")


def test_mrnsps_search_custom_tolerance():
    cfg = tiny(steps=8)
    loose = mrnsps_search(cfg, 32e9, "QPSK", "snr", tolerance=100.0, powers=[2, 4, 6])
    assert loose.chosen_steps == 1 and loose.tolerance == 100.0
    strict = mrnsps_search(cfg, 32e9, "QPSK", "snr", tolerance=0.0, powers=[2, 4, 6])
    assert strict.chosen_steps in (2, 8)


def test_mrnsps_record_round_trip():
    r = MrnspsResult("QPSK", 96e9, "snr", (1, 5), 200, 20.0, 5, 0.1, {1: 18.0, 5: 19.95, 200: 20.0})
    assert MrnspsResult.from_record(r.to_record()) == r


def test_sweep_csv_round_trip_and_errors(tmp_path):
    pts = [_pt(0, 12.5), SweepPoint("16QAM", 2.0, 96.0, 25, 18.25, 3.5, 0.672, 7, 1.5)]
    persist_results(pts, tmp_path / "s.csv")
    text = (tmp_path / "s.csv").read_text().splitlines()
    assert text[0] == ",".join(SWEEP_COLUMNS)
    assert load_results(tmp_path / "s.csv") == pts
    (tmp_path / "bad.csv").write_text(",".join(SWEEP_COLUMNS) + ",extra\n")
    with pytest.raises(ValueError, match="extra"):
        read_sweep_csv(tmp_path / "bad.csv")
    (tmp_path / "miss.csv").write_text("format,power_dbm\n")
    with pytest.raises(ValueError, match="missing"):
        read_sweep_csv(tmp_path / "miss.csv")
    with pytest.raises(OSError):
        read_sweep_csv(tmp_path / "nope.csv")
    with pytest.raises(OSError):
        persist_results(pts, tmp_path / "no" / "dir.csv")
