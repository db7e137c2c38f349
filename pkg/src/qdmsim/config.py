"""Declarative run configuration, presets and (de)serialisation.

Config files are YAML (JSON is accepted too). Angles are stored in radians;
any angle key may instead be given in degrees with a ``_deg`` suffix, e.g.
``theta_deg: 90``. Serialisation always writes radians, so
``parse -> dump -> parse`` is exact.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .gaussian import r_from_db
from .network import QdmConfig, SignalKind, SignalSpec, threshold_r
from .synth import AcquisitionConfig
from .veto import DetectionParams

ANGLE_KEYS = {"theta", "bhd_a_angle", "angle_phi", "phase", "min_theta", "theta_start", "theta_stop"}


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e6`` and ``1.0e6`` as floats (YAML 1.2 style)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class AnalyticParams:
    signal_x: float = 1.0
    signal_p: float = 1.0
    signal_x_theta: float | None = None


@dataclass(frozen=True)
class SweepParams:
    theta_start: float = 0.0
    theta_stop: float = math.pi / 2
    steps: int = 19

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("steps must be >= 2")
        for v in (self.theta_start, self.theta_stop):
            if not 0.0 <= v <= math.pi / 2 + 1e-12:
                raise ValueError("sweep angles must lie in [0, pi/2]")


@dataclass(frozen=True)
class RunConfig:
    qdm: QdmConfig = field(default_factory=QdmConfig)
    signals: tuple[SignalSpec, ...] = ()
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    detection: DetectionParams = field(default_factory=DetectionParams)
    analytic: AnalyticParams = field(default_factory=AnalyticParams)
    sweep: SweepParams = field(default_factory=SweepParams)
    output_dir: str = "qdm-out"

    def replace(self, **kw) -> RunConfig:
        return dataclasses.replace(self, **kw)

    def with_seed(self, seed: int) -> RunConfig:
        return self.replace(acquisition=dataclasses.replace(self.acquisition, seed=int(seed)))

    def with_theta(self, theta: float) -> RunConfig:
        return self.replace(qdm=dataclasses.replace(self.qdm, theta=theta))

    def to_dict(self) -> dict:
        return {
            "qdm": dataclasses.asdict(self.qdm),
            "signals": [s.to_dict() for s in self.signals],
            "acquisition": dataclasses.asdict(self.acquisition),
            "detection": dataclasses.asdict(self.detection),
            "analytic": dataclasses.asdict(self.analytic),
            "sweep": dataclasses.asdict(self.sweep),
            "output_dir": self.output_dir,
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _section(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    kwargs = {}
    for key, value in data.items():
        name = key
        if key.endswith("_deg") and key[:-4] in ANGLE_KEYS:
            name = key[:-4]
            if value is not None:
                value = math.radians(_number(value, f"{where}.{key}"))
        if name not in names:
            raise ConfigError(f"{where}.{key}: unknown field (expected one of {', '.join(sorted(names))})")
        if name in kwargs:
            raise ConfigError(f"{where}.{key}: given twice (radians and degrees)")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    known = {"qdm", "signals", "acquisition", "detection", "analytic", "sweep", "output_dir"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"config: unknown section(s) {', '.join(sorted(extra))}")
    signals = data.get("signals") or []
    if not isinstance(signals, list):
        raise ConfigError("signals: expected a list")
    specs = []
    for i, s in enumerate(signals):
        if isinstance(s, dict) and "kind" in s:
            try:
                SignalKind(s["kind"])
            except ValueError:
                raise ConfigError(f"signals[{i}].kind: must be 'science' or 'parasitic'") from None
        specs.append(_section(SignalSpec, s, f"signals[{i}]"))
    cfg = RunConfig(
        qdm=_section(QdmConfig, data.get("qdm"), "qdm"),
        signals=tuple(specs),
        acquisition=_section(AcquisitionConfig, data.get("acquisition"), "acquisition"),
        detection=_section(DetectionParams, data.get("detection"), "detection"),
        analytic=_section(AnalyticParams, data.get("analytic"), "analytic"),
        sweep=_section(SweepParams, data.get("sweep"), "sweep"),
        output_dir=str(data.get("output_dir", RunConfig.output_dir)),
    )
    nyquist = cfg.acquisition.sample_rate / 2
    for i, s in enumerate(cfg.signals):
        if s.frequency >= nyquist:
            raise ConfigError(
                f"signals[{i}].frequency: {s.frequency:g} Hz is above Nyquist ({nyquist:g} Hz); "
                f"raise acquisition.sample_rate above {2 * s.frequency:g}"
            )
    return cfg


def loads(text: str) -> RunConfig:
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    return from_dict(data or {})


def load(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)


FIG3_R = r_from_db(6.0)
SCIENCE_HZ = 5.55e6
PARASITIC_HZ = 5.17e6


def _fig3(theta_deg: float, parasitic: bool = True) -> RunConfig:
    signals = [SignalSpec(SCIENCE_HZ, 2.0, 0.0, SignalKind.SCIENCE)]
    if parasitic:
        signals.append(SignalSpec(PARASITIC_HZ, 1.5, math.radians(60.0), SignalKind.PARASITIC))
    return RunConfig(
        qdm=QdmConfig(r_a=FIG3_R, r_b=FIG3_R, theta=math.radians(theta_deg)),
        signals=tuple(signals),
        acquisition=AcquisitionConfig(seed=1),
    )


PRESETS = {
    "fig3": lambda: _fig3(90.0),
    "fig3-detuned": lambda: _fig3(75.0),
    "pure-science": lambda: _fig3(90.0, parasitic=False),
    "vacuum": lambda: RunConfig(qdm=QdmConfig(), acquisition=AcquisitionConfig(seed=1)),
    "threshold-scan": lambda: RunConfig(
        qdm=QdmConfig(r_a=threshold_r(), r_b=threshold_r(), theta=math.pi / 2),
        signals=_fig3(90.0).signals,
        acquisition=AcquisitionConfig(seed=1),
    ),
}


def preset(name: str) -> RunConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
