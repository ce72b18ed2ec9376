"""Launch-power sweeps and the minimum-steps-per-span search.

A *compensation* is either ``None`` (EDC only) or a :class:`DbpSpec`. In
result files EDC is written with ``bandwidth_ghz = 0`` and
``steps_per_span = 0``.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .channel import propagate_link
from .config import FORMAT_ORDERS, DbpSpec, SystemConfig
from .equalizer import dbp, edc
from .metrics import MetricsReport, air, mi_awgn, score
from .modem import build_constellation, decorrelate_polarizations, generate_frame
from .sigproc import (RrcSpec, SampledField, matched_filter_downsample, multiplex,
                      set_launch_power, shape_channel)

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("format", "power_dbm", "bandwidth_ghz", "steps_per_span", "snr_db",
                 "mi_bits", "air_tbps", "seed", "wallclock_s")


@dataclass(frozen=True)
class SweepPoint:
    format: str
    power_dbm: float
    bandwidth_ghz: float
    steps_per_span: int
    snr_db: float
    mi_bits: float
    air_tbps: float
    seed: int
    wallclock_s: float = 0.0
    error: Optional[str] = field(default=None, compare=False)
    report: Optional[MetricsReport] = field(default=None, compare=False, repr=False)

    @property
    def is_edc(self) -> bool:
        return self.bandwidth_ghz == 0

    @property
    def key(self) -> tuple:
        return (self.format, self.power_dbm, self.bandwidth_ghz, self.steps_per_span)

    @property
    def label(self) -> str:
        if self.is_edc:
            return "EDC"
        return f"DBP {self.bandwidth_ghz:g} GHz, {self.steps_per_span} steps/span"


def compensation_key(comp: Optional[DbpSpec]) -> tuple[float, int]:
    return (0.0, 0) if comp is None else (comp.bandwidth / 1e9, comp.steps_per_span)


# --------------------------------------------------------------------------
# single-point pipeline

def transmit(cfg: SystemConfig, launch_power_dbm: float | None = None):
    """Generate, shape, multiplex and propagate one WDM frame.

    Returns ``(tx_symbols, received_field)`` where ``tx_symbols`` are the
    centre channel's transmitted symbols, shape ``(2, n_symbols)``.
    """
    wdm = cfg.wdm
    p = cfg.launch_power_dbm if launch_power_dbm is None else launch_power_dbm
    const = build_constellation(wdm.order)
    rrc = RrcSpec.from_rate(wdm.symbol_rate, wdm.rolloff)
    frames = [decorrelate_polarizations(generate_frame(k, const, wdm.n_symbols, cfg.master_seed))
              for k in wdm.channel_offsets]
    tx = multiplex([shape_channel(f, rrc, wdm.sample_rate) for f in frames],
                   wdm.channel_spacing)
    tx = set_launch_power(tx, p, wdm.n_channels)
    rx = propagate_link(tx, cfg.link, cfg.master_seed, wdm.carrier_frequency)
    centre = frames[wdm.n_channels // 2]
    return centre.symbols, rx


def compensate(cfg: SystemConfig, rx: SampledField, comp: Optional[DbpSpec],
               launch_power_dbm: float) -> SampledField:
    if comp is None:
        return edc(rx, cfg.link)
    return dbp(rx, comp, cfg.link, cfg.wdm, launch_power_dbm=launch_power_dbm)


def receive(cfg: SystemConfig, rx: SampledField, tx_symbols, comp: Optional[DbpSpec],
            launch_power_dbm: float) -> MetricsReport:
    """Compensate, matched-filter the centre channel and score it."""
    wdm = cfg.wdm
    y = compensate(cfg, rx, comp, launch_power_dbm)
    rrc = RrcSpec.from_rate(wdm.symbol_rate, wdm.rolloff)
    symbols = matched_filter_downsample(y, 0, rrc, wdm.channel_spacing)
    return score(tx_symbols, symbols, wdm, cfg.experiment.mi_quadrature_order)


def _point(cfg, power, comp, report=None, error=None, wallclock=0.0) -> SweepPoint:
    bw, steps = compensation_key(comp)
    nan = math.nan
    return SweepPoint(
        format=cfg.wdm.format, power_dbm=float(power), bandwidth_ghz=float(bw),
        steps_per_span=int(steps),
        snr_db=report.snr_db if report else nan,
        mi_bits=report.mi_bits_per_2d_symbol if report else nan,
        air_tbps=report.air_total / 1e12 if report else nan,
        seed=cfg.master_seed, wallclock_s=float(wallclock), error=error, report=report)


def simulate_point(cfg: SystemConfig, launch_power_dbm: float,
                   compensations: Sequence[Optional[DbpSpec]] = (None,),
                   timing: bool = False, cache: dict | None = None) -> list[SweepPoint]:
    """One forward propagation scored under every compensation setting.

    ``cache`` (optional, in-process) memoises received fields keyed by
    format, power and seed so repeated studies share forward runs.
    """
    t0 = time.perf_counter()
    key = (cfg.wdm, cfg.link, cfg.master_seed, float(launch_power_dbm))
    try:
        if cache is not None and key in cache:
            tx, rx = cache[key]
        else:
            tx, rx = transmit(cfg, launch_power_dbm)
            if cache is not None:
                cache[key] = (tx, rx)
    except Exception as exc:  # recorded per point; the sweep continues
        log.exception("forward propagation failed at %s dBm", launch_power_dbm)
        return [_point(cfg, launch_power_dbm, c, error=repr(exc)) for c in compensations]
    t_fwd = time.perf_counter() - t0
    out = []
    for comp in compensations:
        t1 = time.perf_counter()
        try:
            rep = receive(cfg, rx, tx, comp, launch_power_dbm)
            err = None
        except Exception as exc:
            log.exception("compensation %s failed at %s dBm", comp, launch_power_dbm)
            rep, err = None, repr(exc)
        wall = (t_fwd + time.perf_counter() - t1) if timing else 0.0
        out.append(_point(cfg, launch_power_dbm, comp, rep, err, wall))
    return out


def _sweep_task(args):
    cfg, power, comps, timing = args
    return simulate_point(cfg, power, comps, timing)


def power_sweep(cfg: SystemConfig, powers: Iterable[float],
                compensations: Sequence[Optional[DbpSpec]] | None = None,
                workers: int = 1, timing: bool = False,
                cache: dict | None = None) -> list[SweepPoint]:
    """Run the full pipeline at each launch power (per channel, dBm).

    ``compensations`` defaults to ``[cfg.dbp]``. Points are sorted by power,
    then by the order of ``compensations``. Worker count does not change
    results since every random stream is derived from ``cfg.master_seed``.
    """
    powers = [float(p) for p in powers]
    comps = list(compensations) if compensations is not None else [cfg.dbp]
    if not powers:
        return []
    if workers > 1:
        tasks = [(cfg, p, comps, timing) for p in powers]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_sweep_task, tasks))
    else:
        chunks = [simulate_point(cfg, p, comps, timing, cache) for p in powers]
    order = {compensation_key(c): i for i, c in enumerate(comps)}
    points = [pt for chunk in chunks for pt in chunk]
    return sorted(points, key=lambda pt: (pt.power_dbm,
                                          order[(pt.bandwidth_ghz, pt.steps_per_span)]))


# --------------------------------------------------------------------------
# optimum search

def find_optimum(points: Sequence[SweepPoint], metric: str = "snr_db") -> SweepPoint:
    """Point with the largest ``metric``; ties go to the lower power. Warns
    when the optimum sits on the edge of the power range."""
    if not points:
        raise ValueError("no points")
    valid = [p for p in points if not math.isnan(getattr(p, metric))]
    if not valid:
        raise ValueError("all points failed")
    ordered = sorted(valid, key=lambda p: p.power_dbm)
    best = max(ordered, key=lambda p: (getattr(p, metric), -p.power_dbm))
    if len(ordered) > 1 and best.power_dbm in (ordered[0].power_dbm, ordered[-1].power_dbm):
        warnings.warn(f"optimum of {metric} lies on the boundary of the power range "
                      f"({best.power_dbm} dBm)", stacklevel=2)
    return best


def peak_value(powers, values) -> tuple[float, float]:
    """(power, value) of the maximum, refined by a parabola through the
    discrete maximum and its neighbours when it is interior."""
    powers = np.asarray(powers, float)
    values = np.asarray(values, float)
    order = np.argsort(powers)
    powers, values = powers[order], values[order]
    i = int(np.nanargmax(values))
    if i == 0 or i == len(values) - 1:
        return float(powers[i]), float(values[i])
    x, y = powers[i - 1:i + 2], values[i - 1:i + 2]
    a, b, c = np.polyfit(x, y, 2)
    if a >= 0:
        return float(powers[i]), float(values[i])
    xp = float(np.clip(-b / (2 * a), x[0], x[-1]))
    return xp, float(max(np.polyval([a, b, c], xp), values[i]))


# --------------------------------------------------------------------------
# minimum required number of steps per span

@dataclass(frozen=True)
class MrnspsResult:
    format: str
    bandwidth: float
    criterion: str
    candidate_ladder: tuple
    reference_steps: int
    converged_reference_value: float
    chosen_steps: int
    tolerance: float
    peak_values: dict
    saturated: bool = False

    def to_record(self) -> dict:
        d = dataclasses.asdict(self)
        d["candidate_ladder"] = list(self.candidate_ladder)
        d["peak_values"] = {str(k): v for k, v in self.peak_values.items()}
        return d

    @classmethod
    def from_record(cls, d: dict) -> "MrnspsResult":
        d = dict(d)
        d["candidate_ladder"] = tuple(d["candidate_ladder"])
        d["peak_values"] = {int(k): v for k, v in d["peak_values"].items()}
        return cls(**d)


def _choose(criterion, fmt, ladder, ref_steps, peaks_snr, cfg, bandwidth,
            tolerance=None) -> MrnspsResult:
    M = build_constellation(FORMAT_ORDERS[fmt])
    if criterion == "snr":
        tol = cfg.experiment.snr_tolerance_db if tolerance is None else tolerance
        peaks = dict(peaks_snr)
    elif criterion == "air":
        # peak AIR at own-optimum power = AIR of the peak SNR (MI is monotone)
        tol = (cfg.experiment.air_tolerance_fraction * 2 * cfg.wdm.symbol_rate
               * math.log2(M.order)) if tolerance is None else tolerance
        peaks = {s: air(mi_awgn(v, M, cfg.experiment.mi_quadrature_order), cfg.wdm)[0]
                 for s, v in peaks_snr.items()}
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    ref = peaks[ref_steps]
    chosen = next((s for s in ladder if peaks[s] >= ref - tol), None)
    return MrnspsResult(format=fmt, bandwidth=float(bandwidth), criterion=criterion,
                        candidate_ladder=tuple(ladder), reference_steps=ref_steps,
                        converged_reference_value=float(ref),
                        chosen_steps=ref_steps if chosen is None else chosen,
                        tolerance=float(tol),
                        peak_values={s: float(v) for s, v in peaks.items()},
                        saturated=chosen is None)


def mrnsps_study(cfg: SystemConfig, formats: Sequence[str], bandwidths: Sequence[float],
                 powers: Sequence[float], ladder: Sequence[int] | None = None,
                 criteria: Sequence[str] = ("air", "snr"), workers: int = 1,
                 cache: dict | None = None) -> tuple[list[MrnspsResult], list[SweepPoint]]:
    """Minimum DBP steps per span for every (format, bandwidth, criterion).

    For each format one data/noise realisation is propagated per power and
    shared by every ladder entry and bandwidth (paired comparison). The
    peak SNR of each step count is taken at its own optimum power; the AIR
    criterion uses the AIR at that peak. The reference is the forward step
    count. Returns the results and every sweep point computed.
    """
    ladder = list(cfg.experiment.ladder if ladder is None else ladder)
    if ladder != sorted(ladder):
        raise ValueError("ladder must be sorted ascending")
    ref_steps = cfg.link.fiber.steps_per_span
    runs = sorted(set(ladder) | {ref_steps})
    base = cfg.dbp or DbpSpec(bandwidth=cfg.wdm.n_channels * cfg.wdm.channel_spacing,
                              steps_per_span=ref_steps)
    comps = [dataclasses.replace(base, bandwidth=float(bw), steps_per_span=s)
             for bw in bandwidths for s in runs]
    results, all_points = [], []
    for fmt in formats:
        fcfg = cfg.with_format(fmt)
        pts = power_sweep(fcfg, powers, comps, workers=workers, cache=cache)
        all_points += pts
        for bw in bandwidths:
            peaks = {}
            for s in runs:
                sel = [p for p in pts if p.bandwidth_ghz == bw / 1e9 and p.steps_per_span == s
                       and not math.isnan(p.snr_db)]
                peaks[s] = peak_value([p.power_dbm for p in sel], [p.snr_db for p in sel])[1]
            for crit in criteria:
                results.append(_choose(crit, fmt, ladder, ref_steps, peaks, fcfg, bw))
    return results, all_points


def mrnsps_search(cfg: SystemConfig, bandwidth: float, format: str, criterion: str,
                  ladder: Sequence[int] | None = None, tolerance: float | None = None,
                  powers: Sequence[float] = tuple(range(-4, 9)),
                  workers: int = 1, cache: dict | None = None) -> MrnspsResult:
    """Smallest ladder entry whose peak metric is within ``tolerance`` of
    the forward-step-count reference (SNR in dB, AIR in bit/s per channel).
    Falls back to the reference step count with ``saturated=True``."""
    results, points = mrnsps_study(cfg, [format], [bandwidth], powers, ladder,
                                   criteria=(criterion,), workers=workers, cache=cache)
    res = results[0]
    if tolerance is not None:
        ladder = list(res.candidate_ladder)
        peaks_snr = {}
        for s in sorted(set(ladder) | {res.reference_steps}):
            sel = [p for p in points if p.steps_per_span == s and not math.isnan(p.snr_db)]
            peaks_snr[s] = peak_value([p.power_dbm for p in sel], [p.snr_db for p in sel])[1]
        res = _choose(criterion, format, ladder, res.reference_steps, peaks_snr,
                      cfg.with_format(format), bandwidth, tolerance)
    return res


# --------------------------------------------------------------------------
# persistence

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_sweep_csv(points: Sequence[SweepPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for p in points:
            w.writerow([_fmt(getattr(p, c)) for c in SWEEP_COLUMNS])


def read_sweep_csv(path) -> list[SweepPoint]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read results file {path}: {exc}") from exc
    if not rows:
        return []
    header = rows[0]
    unknown = [c for c in header if c not in SWEEP_COLUMNS]
    if unknown:
        raise ValueError(f"{path}: unknown columns {', '.join(unknown)}")
    missing = [c for c in SWEEP_COLUMNS if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {', '.join(missing)}")
    types = {"format": str, "steps_per_span": int, "seed": int}
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
        rec = {c: types.get(c, float)(v) for c, v in zip(header, row)}
        out.append(SweepPoint(**rec))
    return out


def write_mrnsps_json(results: Sequence[MrnspsResult], path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_record() for r in results], fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_mrnsps_json(path) -> list[MrnspsResult]:
    with open(path) as fh:
        return [MrnspsResult.from_record(d) for d in json.load(fh)]


def write_mrnsps_table(results: Sequence[MrnspsResult], path) -> None:
    """Table-shaped CSV: one block per criterion (AIR first), formats as rows,
    back-propagated bandwidths (GHz) as columns."""
    bws = sorted({r.bandwidth for r in results})
    fmts = list(dict.fromkeys(r.format for r in results))
    lookup = {(r.criterion, r.format, r.bandwidth): r.chosen_steps for r in results}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["criterion", "format"] + [f"{bw / 1e9:g}-GHz" for bw in bws])
        for crit in ("air", "snr"):
            for fmt in fmts:
                if any((crit, fmt, bw) in lookup for bw in bws):
                    w.writerow([crit.upper(), fmt] +
                               [lookup.get((crit, fmt, bw), "") for bw in bws])


def persist_results(results, path) -> None:
    """CSV for sweep points, JSON for MRNSPS records (chosen by content)."""
    results = list(results)
    try:
        if results and isinstance(results[0], MrnspsResult):
            write_mrnsps_json(results, path)
        else:
            write_sweep_csv(results, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def load_results(path):
    path = str(path)
    if path.endswith(".json"):
        return read_mrnsps_json(path)
    return read_sweep_csv(path)
