"""System configuration: physical constants, fibre/link/WDM parameters and
the structured-text configuration format.

The configuration document is flat TOML with dotted keys, e.g.::

    launch_power_dbm = 0.0
    master_seed = 1
    scale_preset = "desk"
    wdm.n_channels = 3
    wdm.symbol_rate = 32e9
    fiber.alpha_db_per_km = 0.2
    ...

See ``docs/config_schema.md`` for every key, its unit and default.
"""
from __future__ import annotations

import dataclasses
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Any, Optional

import tomli
import tomli_w

SEED_ENV_VAR = "MCDBP_MASTER_SEED"

FORMAT_ORDERS = {"QPSK": 4, "16QAM": 16, "64QAM": 64, "256QAM": 256}
STEP_RULES = ("logarithmic", "uniform")
FILTER_SHAPES = ("rrc_aggregate", "ideal_brickwall")
POWER_SCALING = ("inband", "none")
SCALE_PRESETS = ("paper", "desk", "custom")

DEFAULT_LADDER = (1, 2, 5, 10, 25, 50, 75, 100, 150, 200, 250, 500)


class ConfigError(ValueError):
    """Raised for malformed or invalid configuration."""


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = 2.998e8
    h: float = 6.626e-34


CONSTANTS = PhysicalConstants()


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _require(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{name}: {msg}")


@dataclass(frozen=True)
class WdmSpec:
    n_channels: int
    symbol_rate: float
    channel_spacing: float
    rolloff: float
    centre_wavelength: float
    format: str
    n_symbols: int
    sim_oversampling: Optional[int] = None

    def __post_init__(self):
        _require(isinstance(self.n_channels, int) and self.n_channels >= 1,
                 "n_channels", "must be a positive integer")
        _require(self.n_channels % 2 == 1, "n_channels",
                 "must be odd so that a central channel exists")
        _require(self.symbol_rate > 0, "symbol_rate", "must be positive")
        _require(0 < self.rolloff < 1, "rolloff", "must lie in (0, 1)")
        # Nyquist spacing (spacing == symbol rate) is allowed; the RRC
        # roll-off regions of neighbours then overlap slightly.
        _require(self.channel_spacing >= self.symbol_rate, "channel_spacing",
                 "must be >= symbol_rate")
        _require(self.centre_wavelength > 0, "centre_wavelength", "must be positive")
        _require(self.format in FORMAT_ORDERS, "format",
                 f"must be one of {sorted(FORMAT_ORDERS)}")
        _require(isinstance(self.n_symbols, int) and _is_pow2(self.n_symbols)
                 and self.n_symbols >= 2, "n_symbols", "must be a power of two >= 2")
        if self.sim_oversampling is None:
            object.__setattr__(self, "sim_oversampling",
                               default_oversampling(self.n_channels))
        _require(isinstance(self.sim_oversampling, int)
                 and _is_pow2(self.sim_oversampling), "sim_oversampling",
                 "must be a power of two")
        occupied = (self.n_channels - 1) * self.channel_spacing \
            + self.symbol_rate * (1 + self.rolloff)
        _require(self.sample_rate > occupied, "sim_oversampling",
                 f"grid of {self.sample_rate:.4g} Sa/s does not cover the "
                 f"occupied bandwidth {occupied:.4g} Hz")

    @property
    def order(self) -> int:
        return FORMAT_ORDERS[self.format]

    @property
    def sample_rate(self) -> float:
        return self.sim_oversampling * self.symbol_rate

    @property
    def n_samples(self) -> int:
        return self.n_symbols * self.sim_oversampling

    @property
    def carrier_frequency(self) -> float:
        return CONSTANTS.c / self.centre_wavelength

    @property
    def channel_offsets(self) -> list[int]:
        half = (self.n_channels - 1) // 2
        return list(range(-half, half + 1))


def default_oversampling(n_channels: int) -> int:
    """Smallest power of two >= 2 * n_channels samples per symbol."""
    return 1 << max(1, math.ceil(math.log2(2 * n_channels)))


@dataclass(frozen=True)
class FiberSpec:
    alpha_db_per_km: float
    dispersion_D: float
    gamma: float
    span_length: float
    steps_per_span: int
    manakov_factor: float = 8.0 / 9.0
    step_rule: str = "logarithmic"
    reference_wavelength: float = 1550e-9

    def __post_init__(self):
        _require(self.alpha_db_per_km > 0, "alpha_db_per_km", "must be > 0")
        _require(self.span_length >= 0, "span_length", "must be >= 0")
        _require(isinstance(self.steps_per_span, int) and self.steps_per_span >= 1,
                 "steps_per_span", "must be an integer >= 1")
        _require(0 < self.manakov_factor <= 1, "manakov_factor", "must lie in (0, 1]")
        _require(self.step_rule in STEP_RULES, "step_rule", f"must be one of {STEP_RULES}")
        _require(self.reference_wavelength > 0, "reference_wavelength", "must be positive")

    @property
    def alpha_np(self) -> float:
        """Field-power attenuation in Np/km."""
        return self.alpha_db_per_km / (10.0 * math.log10(math.e))

    @property
    def beta2(self) -> float:
        """Group-velocity dispersion in ps^2/km."""
        return beta2_from_D(self.dispersion_D, self.reference_wavelength)


@dataclass(frozen=True)
class LinkSpec:
    n_spans: int
    fiber: FiberSpec
    amp_noise_figure_db: float
    ase: bool = True

    def __post_init__(self):
        _require(isinstance(self.n_spans, int) and self.n_spans >= 1,
                 "n_spans", "must be an integer >= 1")
        _require(math.isfinite(self.amp_noise_figure_db),
                 "amp_noise_figure_db", "must be finite")
        if self.amp_noise_figure_db < 10 * math.log10(2):
            warnings.warn(f"amp_noise_figure_db={self.amp_noise_figure_db} is below "
                          "the 3 dB quantum limit", stacklevel=3)

    @property
    def length(self) -> float:
        return self.n_spans * self.fiber.span_length


@dataclass(frozen=True)
class DbpSpec:
    """Back-propagation settings.

    ``bandwidth`` is in Hz and should be an odd multiple of the channel
    spacing. ``oversampling_per_channel`` sets the DSP resolution in samples
    per symbol per back-propagated channel (rounded up to a power of two and
    capped at the simulation grid); ``0`` keeps the full grid.
    """
    bandwidth: float
    steps_per_span: int
    filter_shape: str = "rrc_aggregate"
    launch_power_dbm: Optional[float] = None
    power_scaling: str = "inband"
    oversampling_per_channel: int = 2

    def __post_init__(self):
        _require(self.bandwidth > 0, "dbp.bandwidth", "must be positive")
        _require(isinstance(self.steps_per_span, int) and self.steps_per_span >= 1,
                 "dbp.steps_per_span", "must be an integer >= 1")
        _require(self.filter_shape in FILTER_SHAPES, "dbp.filter_shape",
                 f"must be one of {FILTER_SHAPES}")
        _require(self.power_scaling in POWER_SCALING, "dbp.power_scaling",
                 f"must be one of {POWER_SCALING}")
        _require(isinstance(self.oversampling_per_channel, int)
                 and self.oversampling_per_channel >= 0,
                 "dbp.oversampling_per_channel", "must be an integer >= 0")


@dataclass(frozen=True)
class ExperimentSpec:
    ladder: tuple = DEFAULT_LADDER
    snr_tolerance_db: float = 0.1
    air_tolerance_fraction: float = 0.005
    mi_quadrature_order: int = 10

    def __post_init__(self):
        object.__setattr__(self, "ladder", tuple(int(s) for s in self.ladder))
        _require(len(self.ladder) > 0 and list(self.ladder) == sorted(set(self.ladder))
                 and self.ladder[0] >= 1, "experiment.ladder",
                 "must be strictly ascending positive integers")
        _require(self.snr_tolerance_db >= 0, "experiment.snr_tolerance_db", "must be >= 0")
        _require(self.air_tolerance_fraction >= 0, "experiment.air_tolerance_fraction",
                 "must be >= 0")
        _require(self.mi_quadrature_order >= 2, "experiment.mi_quadrature_order",
                 "must be >= 2")


@dataclass(frozen=True)
class SystemConfig:
    wdm: WdmSpec
    link: LinkSpec
    dbp: Optional[DbpSpec]
    launch_power_dbm: float
    master_seed: int
    scale_preset: str = "custom"
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)

    def __post_init__(self):
        _require(self.scale_preset in SCALE_PRESETS, "scale_preset",
                 f"must be one of {SCALE_PRESETS}")
        _require(isinstance(self.master_seed, int) and self.master_seed >= 0,
                 "master_seed", "must be a non-negative integer")
        if self.dbp is not None:
            full = self.wdm.n_channels * self.wdm.channel_spacing
            _require(self.dbp.bandwidth <= full * (1 + 1e-9), "dbp.bandwidth",
                     "exceeds the aggregate WDM bandwidth")

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def with_format(self, fmt: str) -> "SystemConfig":
        return self.replace(wdm=dataclasses.replace(self.wdm, format=fmt))


def beta2_from_D(D: float, wavelength: float) -> float:
    """Convert dispersion D [ps/nm/km] at ``wavelength`` [m] to beta2 [ps^2/km]."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    # D [ps/nm/km] -> [s/m/km] is 1e-3; result [s^2/km] -> [ps^2/km] is 1e24
    return -D * 1e-3 * wavelength ** 2 / (2 * math.pi * CONSTANTS.c) * 1e24


def span_gain_db(fiber: FiberSpec) -> float:
    """Amplifier gain that exactly offsets one span's loss."""
    return fiber.alpha_db_per_km * fiber.span_length


# --------------------------------------------------------------------------
# presets

def paper_config(fmt: str = "256QAM", launch_power_dbm: float = 0.0,
                 master_seed: int = 1) -> SystemConfig:
    fiber = FiberSpec(alpha_db_per_km=0.2, dispersion_D=17.0, gamma=1.2,
                      span_length=80.0, steps_per_span=800)
    return SystemConfig(
        wdm=WdmSpec(n_channels=9, symbol_rate=32e9, channel_spacing=32e9,
                    rolloff=0.001, centre_wavelength=1550e-9, format=fmt,
                    n_symbols=2 ** 18),
        link=LinkSpec(n_spans=25, fiber=fiber, amp_noise_figure_db=4.5),
        dbp=DbpSpec(bandwidth=9 * 32e9, steps_per_span=800),
        launch_power_dbm=launch_power_dbm,
        master_seed=master_seed,
        scale_preset="paper",
        experiment=ExperimentSpec(ladder=DEFAULT_LADDER + (800,)),
    )


def desk_config(fmt: str = "16QAM", launch_power_dbm: float = 0.0,
                master_seed: int = 1) -> SystemConfig:
    fiber = FiberSpec(alpha_db_per_km=0.2, dispersion_D=17.0, gamma=1.2,
                      span_length=80.0, steps_per_span=200)
    return SystemConfig(
        wdm=WdmSpec(n_channels=3, symbol_rate=32e9, channel_spacing=32e9,
                    rolloff=0.001, centre_wavelength=1550e-9, format=fmt,
                    n_symbols=2 ** 13),
        link=LinkSpec(n_spans=10, fiber=fiber, amp_noise_figure_db=4.5),
        dbp=DbpSpec(bandwidth=3 * 32e9, steps_per_span=200),
        launch_power_dbm=launch_power_dbm,
        master_seed=master_seed,
        scale_preset="desk",
        experiment=ExperimentSpec(ladder=(1, 5, 25, 75, 200)),
    )


PRESETS = {"paper": paper_config, "desk": desk_config}


# --------------------------------------------------------------------------
# structured-text format

_SECTIONS = {
    "wdm": (WdmSpec, {"n_channels", "symbol_rate", "channel_spacing", "rolloff",
                      "centre_wavelength", "format", "n_symbols"}),
    "fiber": (FiberSpec, {"alpha_db_per_km", "dispersion_D", "gamma",
                          "span_length", "steps_per_span"}),
    "link": (LinkSpec, {"n_spans", "amp_noise_figure_db"}),
    "dbp": (DbpSpec, set()),
    "experiment": (ExperimentSpec, set()),
}
_TOP_REQUIRED = {"launch_power_dbm", "master_seed"}
_TOP_OPTIONAL = {"scale_preset"}
_INT_KEYS = {"n_channels", "n_symbols", "sim_oversampling", "steps_per_span",
             "n_spans", "master_seed", "mi_quadrature_order",
             "oversampling_per_channel"}


def _fields(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def _coerce(key: str, value: Any) -> Any:
    if key in _INT_KEYS and isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def load_config(text: str, apply_env: bool = True) -> SystemConfig:
    """Parse and validate a configuration document.

    Raises
    ------
    ConfigError
        On parse failures (message carries the line), missing or unknown keys,
        or any violated invariant (message names the offending key).
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    return config_from_dict(doc, apply_env=apply_env)


def config_from_dict(doc: dict, apply_env: bool = True) -> SystemConfig:
    doc = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    unknown = []
    for key, value in doc.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a section of dotted keys")
            allowed = _fields(_SECTIONS[key][0]) - {"fiber"}
            if key == "dbp":
                allowed = allowed | {"enabled"}
            unknown += [f"{key}.{k}" for k in value if k not in allowed]
        elif key not in _TOP_REQUIRED | _TOP_OPTIONAL:
            unknown.append(key)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")

    missing = [k for k in sorted(_TOP_REQUIRED) if k not in doc]
    for name, (_, required) in _SECTIONS.items():
        section = doc.get(name, {})
        missing += [f"{name}.{k}" for k in sorted(required) if k not in section]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}")

    def build(name):
        cls = _SECTIONS[name][0]
        kw = {k: _coerce(k, v) for k, v in doc.get(name, {}).items()}
        return cls, kw

    try:
        cls, kw = build("wdm")
        wdm = cls(**kw)
        cls, kw = build("fiber")
        fiber = cls(**kw)
        cls, kw = build("link")
        link = cls(fiber=fiber, **kw)
        cls, kw = build("dbp")
        enabled = kw.pop("enabled", bool(kw))
        dbp = cls(**kw) if enabled else None
        cls, kw = build("experiment")
        experiment = cls(**kw)
        seed = _coerce("master_seed", doc["master_seed"])
        if apply_env and os.environ.get(SEED_ENV_VAR):
            seed = int(os.environ[SEED_ENV_VAR])
        return SystemConfig(wdm=wdm, link=link, dbp=dbp,
                            launch_power_dbm=float(doc["launch_power_dbm"]),
                            master_seed=seed,
                            scale_preset=doc.get("scale_preset", "custom"),
                            experiment=experiment)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg: SystemConfig) -> dict:
    def section(obj, skip=()):
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f in dataclasses.fields(obj)
                if f.name not in skip and (v := getattr(obj, f.name)) is not None}

    doc = {
        "launch_power_dbm": cfg.launch_power_dbm,
        "master_seed": cfg.master_seed,
        "scale_preset": cfg.scale_preset,
        "wdm": section(cfg.wdm),
        "fiber": section(cfg.link.fiber),
        "link": section(cfg.link, skip=("fiber",)),
        "experiment": section(cfg.experiment),
    }
    doc["dbp"] = {"enabled": False} if cfg.dbp is None else \
        {"enabled": True, **section(cfg.dbp)}
    return doc


def dump_config(cfg: SystemConfig) -> str:
    """Serialise as flat dotted-key TOML (one ``section.key = value`` per line)."""
    def literal(v):
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(literal(x) for x in v) + "]"
        return tomli_w.dumps({"v": v})[4:].strip()

    lines = []
    for key, value in config_to_dict(cfg).items():
        if isinstance(value, dict):
            for sub, v in value.items():
                lines.append(f"{key}.{sub} = {literal(v)}")
        else:
            lines.append(f"{key} = {literal(value)}")
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: SystemConfig, overrides: list[str]) -> SystemConfig:
    """Apply ``section.key=value`` overrides (values parsed as TOML literals)."""
    doc = config_to_dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        try:
            value = tomli.loads(f"v = {raw.strip()}")["v"]
        except tomli.TOMLDecodeError:
            value = raw.strip()
        parts = key.split(".")
        if len(parts) == 1:
            doc[key] = value
        elif len(parts) == 2:
            doc.setdefault(parts[0], {})[parts[1]] = value
        else:
            raise ConfigError(f"override key {key!r} has too many dots")
    return config_from_dict(doc, apply_env=False)
