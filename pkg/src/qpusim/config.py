"""Global JSON configuration.

Each module gets one section.  Keys map one-to-one onto dataclass fields, so
units ride along in the key names.  Unknown keys are rejected; missing keys
fall back to the field default (and are an error where there is none).
"""
from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from importlib.resources import files

from .analog import BiasLimits, LeakageModel, SigmaDeltaSequencer, VdacStage, load_leakage_csv
from .detector import DetectorChainConfig
from .noise import DetectorNoiseParams, InjectorNoiseParams
from .qexp import BiasScanConfig, TunnelingModel
from .thermal import ThermalScenario

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "GlobalConfig",
    "from_dict",
    "load_config",
    "default_config",
    "config_schema",
]

SCHEMA_VERSION = "1"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PatgenSection:
    node_table: dict | None = None  # name -> control-line bit; None = built-in table
    ckdiv_hz: float = 125e6
    max_ticks: int = 10_000_000


@dataclass(frozen=True)
class PulsegenSection:
    clk_freq_hz: float = 2e9
    duration_s: float = 32e-9
    sel1: int = 0
    sel2: int = 4
    combine: str = "AND"
    leaf_index: int = 0
    jitter_rms_s: float = 1.5e-12


@dataclass(frozen=True)
class AnalogSection:
    coarse: VdacStage = field(default_factory=VdacStage)
    fine: VdacStage = field(default_factory=lambda: VdacStage(c1_f=0.75e-15 / 16))
    sequencer: SigmaDeltaSequencer = field(default_factory=SigmaDeltaSequencer)
    limits: BiasLimits = field(default_factory=BiasLimits)
    target_v: float = 0.4
    hold_time_s: float = 600e-6
    droop_rate_v_per_s: float = 5e-3 / 600e-6
    leakage_csv: str | None = None

    def leakage(self) -> LeakageModel:
        if self.leakage_csv:
            return load_leakage_csv(self.leakage_csv, self.droop_rate_v_per_s)
        return LeakageModel(self.droop_rate_v_per_s)


@dataclass(frozen=True)
class NoiseSection:
    injector: InjectorNoiseParams = field(default_factory=lambda: InjectorNoiseParams(1e-18, 2e-18))
    detector: DetectorNoiseParams = field(
        default_factory=lambda: DetectorNoiseParams((11e-9) ** 2, (11e-9) ** 2, (10e-9) ** 2, (10e-9) ** 2)
    )


@dataclass(frozen=True)
class QexpSection:
    v_low_v: float = 33e-3
    v_high_v: float = 78e-3
    p_at_low: float = 0.0025
    p_at_high: float = 0.95
    divider_ratio: float = 0.1
    short_lag_corr: float = 0.3
    midzone_rate: float = 0.02
    midzone_range_v: tuple[float, float] = (-0.29, -0.01)
    noise_rms_v: float = 17.5e-3
    step_v: float = 78e-3
    n_trials: int = 10_000
    sweep_steps_v: tuple[float, ...] = tuple(round(0.033 + 0.005 * i, 3) for i in range(10))
    bin_width_v: float = 0.05
    acf_max_lag: int = 20
    bias_scan: BiasScanConfig = field(
        default_factory=lambda: BiasScanConfig(
            tuple(round(0.2 + 0.05 * i, 2) for i in range(9)),
            tuple(round(0.8 + 0.05 * i, 2) for i in range(9)),
        )
    )

    def model(self, detector: DetectorChainConfig) -> TunnelingModel:
        keys = [f.name for f in dataclasses.fields(TunnelingModel) if f.name != "detector"]
        return TunnelingModel(**{k: getattr(self, k) for k in keys}, detector=detector)


@dataclass(frozen=True)
class GlobalConfig:
    schema_version: str = SCHEMA_VERSION
    seed: int = 0
    patgen: PatgenSection = field(default_factory=PatgenSection)
    pulsegen: PulsegenSection = field(default_factory=PulsegenSection)
    analog: AnalogSection = field(default_factory=AnalogSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    detector: DetectorChainConfig = field(default_factory=DetectorChainConfig)
    thermal: ThermalScenario = field(default_factory=ThermalScenario)
    qexp: QexpSection = field(default_factory=QexpSection)

    def tunneling_model(self) -> TunnelingModel:
        return self.qexp.model(self.detector)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _strip_optional(tp):
    if typing.get_origin(tp) in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return tp


def _convert(tp, value, path: str):
    tp = _strip_optional(tp)
    if value is None:
        return None
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, path)
    if typing.get_origin(tp) is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        return tuple(value)
    if tp is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def from_dict(cls, data, path: str = "config"):
    """Build dataclass ``cls`` from nested dicts, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
    kwargs = {k: _convert(hints[k], v, f"{path}.{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path=None) -> GlobalConfig:
    """Read a JSON config file; ``None`` gives the bundled default."""
    if path is None:
        return default_config()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return _checked(data)


def _checked(data) -> GlobalConfig:
    if isinstance(data, dict) and data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {data['schema_version']!r}")
    return from_dict(GlobalConfig, data)


def default_config() -> GlobalConfig:
    return _checked(json.loads(files("qpusim.data").joinpath("paper.json").read_text()))


_JSON_TYPES = {float: "number", int: "integer", str: "string", bool: "boolean", dict: "object"}


def _schema_for(tp) -> dict:
    optional = typing.get_origin(tp) in (typing.Union, types.UnionType) and type(None) in typing.get_args(tp)
    tp = _strip_optional(tp)
    if dataclasses.is_dataclass(tp):
        s = config_schema(tp)
    elif typing.get_origin(tp) is tuple:
        s = {"type": "array", "items": {"type": "number"}}
    else:
        s = {"type": _JSON_TYPES.get(tp, "string")}
    if optional:
        s = {"anyOf": [s, {"type": "null"}]}
    return s


def config_schema(cls=GlobalConfig) -> dict:
    """JSON Schema document for a config dataclass."""
    hints = typing.get_type_hints(cls)
    props = {f.name: _schema_for(hints[f.name]) for f in dataclasses.fields(cls)}
    required = [
        f.name
        for f in dataclasses.fields(cls)
        if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
    ]
    out = {"type": "object", "properties": props, "additionalProperties": False}
    if required:
        out["required"] = required
    if cls is GlobalConfig:
        out["$schema"] = "https://json-schema.org/draft/2020-12/schema"
        out["title"] = "qpusim configuration"
    return out
