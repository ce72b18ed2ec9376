"""Command-line front end.

    mcdbp simulate      --preset desk --set launch_power_dbm=-2
    mcdbp sweep-power   --preset desk --powers=-10:8:2 --compensation edc,1,3
    mcdbp optimize-steps --preset desk --bandwidths 32,96 --formats QPSK,16QAM
    mcdbp report        results/sweep.csv

Exit codes: 0 success, 1 runtime failure (some point failed), 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .config import (PRESETS, ConfigError, DbpSpec, SystemConfig, apply_overrides,
                     config_to_dict, dump_config, load_config)
from .experiments import (MrnspsResult, SweepPoint, find_optimum, load_results,
                          mrnsps_study, persist_results, power_sweep, write_mrnsps_table,
                          write_sweep_csv)

log = logging.getLogger("mcdbp")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or configuration (exit 2)."""


@dataclass
class CommandOutcome:
    exit_code: int = EXIT_OK
    artifacts: list = field(default_factory=list)


# --------------------------------------------------------------------------
# argument helpers

def parse_range(text: str) -> list[float]:
    """Inclusive ``start:stop:step`` grid, e.g. ``-10:4:2`` -> -10, -8, ..., 4."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"malformed range {text!r}: expected start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"malformed range {text!r}: non-numeric field") from None
    if not (step > 0 and stop >= start and all(map(math.isfinite, (start, stop, step)))):
        raise UsageError(f"malformed range {text!r}: need step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]


def _csv_list(text: str, conv, what: str) -> list:
    try:
        return [conv(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"malformed {what} list {text!r}") from None


def parse_compensations(text: str, cfg: SystemConfig, steps: int | None) -> list:
    """``edc`` or a channel count per entry (``full`` = all channels)."""
    steps = steps or (cfg.dbp.steps_per_span if cfg.dbp else cfg.link.fiber.steps_per_span)
    base = cfg.dbp or DbpSpec(cfg.wdm.channel_spacing, steps)
    out = []
    for tok in _csv_list(text, str, "compensation"):
        t = tok.lower()
        if t == "edc":
            out.append(None)
            continue
        if t == "full":
            k = cfg.wdm.n_channels
        else:
            try:
                k = int(t)
            except ValueError:
                raise UsageError(f"unknown compensation {tok!r} (use edc, full or a "
                                 "channel count)") from None
        if k < 1 or k % 2 == 0 or k > cfg.wdm.n_channels:
            raise UsageError(f"DBP channel count {k} must be odd and <= "
                             f"{cfg.wdm.n_channels}")
        out.append(dataclasses.replace(base, bandwidth=k * cfg.wdm.channel_spacing,
                                       steps_per_span=steps))
    if not out:
        raise UsageError("empty compensation list")
    return out


def resolve_config(args) -> SystemConfig:
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
        try:
            cfg = load_config(text)
        except ConfigError as exc:
            raise UsageError(f"{path}: {exc}") from None
    else:
        cfg = PRESETS[args.preset]()
        env = os.environ.get("MCDBP_MASTER_SEED")
        if env is not None:
            try:
                cfg = cfg.replace(master_seed=int(env))
            except ValueError:
                raise UsageError(f"MCDBP_MASTER_SEED={env!r} is not an integer") from None
    try:
        return apply_overrides(cfg, args.set or [])
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _workers(args) -> int:
    return args.workers if args.workers else (os.cpu_count() or 1)


def _cost_warning(cfg: SystemConfig) -> None:
    if cfg.scale_preset == "paper":
        print("warning: paper-scale preset (9 channels, 25 spans, 800 steps/span, "
              "2^18 symbols); each launch power takes on the order of an hour of "
              "CPU time", file=sys.stderr)


def _write_metadata(out: Path, command: str, args, cfg: SystemConfig, extra=None) -> Path:
    meta = {"command": command, "overrides": list(args.set or []),
            "config_source": args.config or f"preset:{args.preset}",
            "config": config_to_dict(cfg)}
    if extra:
        meta.update(extra)
    path = out / f"{command}.meta.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (out / f"{command}.config.toml").write_text(dump_config(cfg))
    return path


def _outdir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in text).strip("_").lower()


# --------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> CommandOutcome:
    cfg = resolve_config(args)
    _cost_warning(cfg)
    out = _outdir(args)
    comps = [None] if args.edc else [cfg.dbp]
    points = power_sweep(cfg, [cfg.launch_power_dbm], comps, workers=1, timing=args.timing)
    path = out / "simulate.csv"
    write_sweep_csv(points, path)
    meta = _write_metadata(out, "simulate", args, cfg)
    for p in points:
        if p.error:
            print(f"{p.label} at {p.power_dbm:g} dBm failed: {p.error}", file=sys.stderr)
        else:
            r = p.report
            print(f"{p.format} {p.label} at {p.power_dbm:g} dBm: SNR {r.snr_db:.3f} dB, "
                  f"MI {r.mi_bits_per_2d_symbol:.4f} bit/2D-symbol, "
                  f"AIR {r.air_per_channel / 1e9:.2f} Gbit/s per channel, "
                  f"{r.air_total / 1e12:.4f} Tbit/s total")
    code = EXIT_RUNTIME if any(p.error for p in points) else EXIT_OK
    return CommandOutcome(code, [str(path), str(meta)])


def _write_curves(points, out: Path) -> list[str]:
    """Per-curve plot data: (power_dbm, snr_db) and (power_dbm, air_tbps)."""
    groups = defaultdict(list)
    for p in points:
        groups[(p.format, p.label)].append(p)
    written = []
    for (fmt, label), pts in groups.items():
        pts = sorted(pts, key=lambda p: p.power_dbm)
        for metric in ("snr_db", "air_tbps"):
            path = out / f"curve_{_slug(fmt)}_{_slug(label)}_{metric.split('_')[0]}.csv"
            lines = [f"power_dbm,{metric}"]
            lines += [f"{p.power_dbm!r},{getattr(p, metric)!r}" for p in pts]
            path.write_text("\n".join(lines) + "\n")
            written.append(str(path))
    return written


def cmd_sweep_power(args) -> CommandOutcome:
    cfg = resolve_config(args)
    powers = parse_range(args.powers)
    comps = parse_compensations(args.compensation, cfg, args.dbp_steps)
    _cost_warning(cfg)
    out = _outdir(args)
    points = power_sweep(cfg, powers, comps, workers=_workers(args), timing=args.timing)
    path = out / "sweep.csv"
    write_sweep_csv(points, path)
    arts = [str(path)] + _write_curves(points, out)
    arts.append(str(_write_metadata(out, "sweep-power", args, cfg,
                                    {"powers_dbm": powers, "compensation": args.compensation})))
    _print_summary(points)
    failed = [p for p in points if p.error]
    for p in failed:
        print(f"failed: {p.label} at {p.power_dbm:g} dBm: {p.error}", file=sys.stderr)
    return CommandOutcome(EXIT_RUNTIME if failed else EXIT_OK, arts)


def cmd_optimize_steps(args) -> CommandOutcome:
    cfg = resolve_config(args)
    criteria = ("air", "snr") if args.criterion == "both" else (args.criterion,)
    formats = _csv_list(args.formats, str, "format") if args.formats else [cfg.wdm.format]
    bad = [f for f in formats if f not in ("QPSK", "16QAM", "64QAM", "256QAM")]
    if bad:
        raise UsageError(f"unknown format(s) {', '.join(bad)}")
    if args.bandwidths:
        bandwidths = [b * 1e9 for b in _csv_list(args.bandwidths, float, "bandwidth")]
    else:
        bandwidths = [cfg.wdm.n_channels * cfg.wdm.channel_spacing]
    full = cfg.wdm.n_channels * cfg.wdm.channel_spacing
    if any(b <= 0 or b > full * (1 + 1e-9) for b in bandwidths):
        raise UsageError(f"bandwidths must lie in (0, {full / 1e9:g}] GHz")
    ladder = _csv_list(args.ladder, int, "ladder") if args.ladder else None
    if ladder is not None and (not ladder or ladder != sorted(set(ladder)) or ladder[0] < 1):
        raise UsageError("ladder must be strictly ascending positive integers")
    powers = parse_range(args.powers)
    _cost_warning(cfg)
    out = _outdir(args)
    results, points = mrnsps_study(cfg, formats, bandwidths, powers, ladder, criteria,
                                   workers=_workers(args))
    table = out / "mrnsps_table.csv"
    write_mrnsps_table(results, table)
    js = out / "mrnsps.json"
    persist_results(results, js)
    sweep = out / "mrnsps_points.csv"
    write_sweep_csv(points, sweep)
    meta = _write_metadata(out, "optimize-steps", args, cfg, {"powers_dbm": powers})
    _print_mrnsps(results)
    failed = [p for p in points if p.error]
    return CommandOutcome(EXIT_RUNTIME if failed else EXIT_OK,
                          [str(table), str(js), str(sweep), str(meta)])


def cmd_report(args) -> CommandOutcome:
    path = Path(args.results)
    if not path.exists():
        raise UsageError(f"results file {path} does not exist")
    try:
        data = load_results(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if not data:
        print("no data")
        return CommandOutcome(EXIT_OK, [])
    out = _outdir(args)
    if isinstance(data[0], MrnspsResult):
        _print_mrnsps(data)
        table = out / "mrnsps_table.csv"
        write_mrnsps_table(data, table)
        return CommandOutcome(EXIT_OK, [str(table)])
    _check_consistent(data, path)
    _print_summary(data)
    arts = [_plot(data, "snr_db", "SNR [dB]", out / "snr_vs_power.svg"),
            _plot(data, "air_tbps", "AIR [Tbit/s]", out / "air_vs_power.svg")]
    return CommandOutcome(EXIT_OK, [str(a) for a in arts])


# --------------------------------------------------------------------------
# reporting

def _check_consistent(points: list[SweepPoint], path) -> None:
    seen = {}
    for p in points:
        k = (p.key, p.seed)
        if k in seen and seen[k] != (p.snr_db, p.air_tbps) \
                and not all(map(math.isnan, seen[k] + (p.snr_db, p.air_tbps))):
            raise UsageError(f"{path}: contradictory rows for {p.format} {p.label} "
                             f"at {p.power_dbm:g} dBm")
        seen[k] = (p.snr_db, p.air_tbps)


def _print_summary(points: list[SweepPoint]) -> None:
    groups = defaultdict(list)
    for p in points:
        groups[(p.format, p.label)].append(p)
    print(f"{'format':<8} {'compensation':<34} {'opt dBm':>8} {'SNR dB':>8} {'AIR Tb/s':>9}")
    for (fmt, label), pts in groups.items():
        valid = [p for p in pts if not math.isnan(p.snr_db)]
        if not valid:
            print(f"{fmt:<8} {label:<34} {'-':>8} {'failed':>8} {'-':>9}")
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            best = find_optimum(valid, "snr_db")
        print(f"{fmt:<8} {label:<34} {best.power_dbm:>8.2f} {best.snr_db:>8.3f} "
              f"{best.air_tbps:>9.4f}")


def _print_mrnsps(results) -> None:
    bws = sorted({r.bandwidth for r in results})
    print(f"{'criterion':<10} {'format':<8} " + " ".join(f"{b / 1e9:>8g}G" for b in bws))
    lookup = {(r.criterion, r.format, r.bandwidth): r for r in results}
    for crit in ("air", "snr"):
        for fmt in dict.fromkeys(r.format for r in results):
            cells = []
            for b in bws:
                r = lookup.get((crit, fmt, b))
                txt = "" if r is None else f"{r.chosen_steps}{'*' if r.saturated else ''}"
                cells.append(f"{txt:>9}")
            if any(c.strip() for c in cells):
                print(f"{crit.upper():<10} {fmt:<8} " + " ".join(cells))


def _plot(points, metric, ylabel, path: Path) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "mcdbp"
    groups = defaultdict(list)
    for p in points:
        if not math.isnan(getattr(p, metric)):
            groups[(p.format, p.label)].append(p)
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for (fmt, label), pts in groups.items():
        pts = sorted(pts, key=lambda p: p.power_dbm)
        ax.plot([p.power_dbm for p in pts], [getattr(p, metric) for p in pts],
                marker="o", ms=3, label=f"{fmt}, {label}")
    ax.set_xlabel("Launch power per channel [dBm]")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if groups:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="configuration file (flat TOML)")
    src.add_argument("--preset", choices=sorted(PRESETS), default="desk",
                     help="built-in configuration when --config is not given (default: desk)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="dotted-key override applied after loading, e.g. "
                             "--set link.n_spans=5 (repeatable)")
    common.add_argument("--out", default="results", metavar="DIR",
                        help="output directory (default: results)")
    common.add_argument("--workers", type=int, default=0, metavar="N",
                        help="worker processes (default: available cores)")
    common.add_argument("--timing", action="store_true",
                        help="record wall-clock time per point (makes CSVs non-reproducible)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    p = argparse.ArgumentParser(prog="mcdbp", description=__doc__.split("\n\n")[0],
                                allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("simulate", parents=[common], allow_abbrev=False,
                       help="run one launch power through the full pipeline")
    s.add_argument("--edc", action="store_true",
                   help="score with EDC instead of the configured DBP")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep-power", parents=[common], allow_abbrev=False,
                       help="launch-power sweep over compensation settings")
    s.add_argument("--powers", default="-10:8:2", metavar="START:STOP:STEP",
                   help="inclusive dBm grid (default: -10:8:2)")
    s.add_argument("--compensation", default="edc,full", metavar="LIST",
                   help="comma list of edc, full or DBP channel counts (default: edc,full)")
    s.add_argument("--dbp-steps", type=int, default=None, metavar="N",
                   help="DBP steps per span (default: configured value)")
    s.set_defaults(func=cmd_sweep_power)

    s = sub.add_parser("optimize-steps", parents=[common], allow_abbrev=False,
                       help="minimum DBP steps per span (table of step counts)")
    s.add_argument("--criterion", choices=("snr", "air", "both"), default="both")
    s.add_argument("--bandwidths", metavar="GHZ,...",
                   help="back-propagated bandwidths in GHz (default: full field)")
    s.add_argument("--formats", metavar="FMT,...",
                   help="QPSK,16QAM,64QAM,256QAM subset (default: configured format)")
    s.add_argument("--ladder", metavar="N,...",
                   help="candidate steps per span (default: configured ladder)")
    s.add_argument("--powers", default="-4:12:2", metavar="START:STOP:STEP",
                   help="inclusive dBm grid (default: -4:12:2)")
    s.set_defaults(func=cmd_optimize_steps)

    s = sub.add_parser("report", allow_abbrev=False,
                       help="summary table and SVG plots from a results file")
    s.add_argument("results", help="sweep CSV or MRNSPS JSON")
    s.add_argument("--out", default="results", metavar="DIR",
                   help="output directory (default: results)")
    s.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    s.set_defaults(func=cmd_report)
    return p


def _join_range_args(argv: list[str]) -> list[str]:
    # "--powers -10:4:2" would otherwise be parsed as an unknown option
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a == "--powers" and i + 1 < len(argv):
            out.append(f"--powers={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_range_args(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        outcome = args.func(args)
    except UsageError as exc:
        print(f"mcdbp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report, do not dump a traceback
        log.debug("runtime failure", exc_info=True)
        print(f"mcdbp: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for a in outcome.artifacts:
        log.info("wrote %s", a)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
