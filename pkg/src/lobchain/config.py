"""JSON run configuration for the command-line tool."""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .book import ModelParams
from .stats import DEFAULT_GRID


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        loc = f"line {line}: " if line else ""
        super().__init__(loc + message)


@dataclass
class SimulationConfig:
    seed: int = 1
    n_events: int = 100_000
    burn_in: int = 100_000
    snapshot_stride: int = 100
    replicas: int = 1


@dataclass
class AnalysisConfig:
    max_lag: int = 200
    cutoff_run: int = 3
    cutoff_threshold: float = 2.0
    variance_grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    aggregation_windows: list = field(default_factory=lambda: [1, 100])
    batch_size: int | None = None


@dataclass
class DriftConfig:
    z: float = 1.05
    n_sample: int = 10_000
    n_large: int = 100
    phi_max: int = 1000


@dataclass
class OracleConfig:
    cap: int = 5
    n_events: int = 10_000_000
    tv_tolerance: float = 0.02


@dataclass
class ToyConfig:
    lam_plus: float = 1.0
    lam_minus: float = 1.0
    u: float = 1.0
    tick: float = 1.0
    n_events: int = 100_000
    fclt_n: int = 10_000
    fclt_replicas: int = 1000


_SECTIONS = {"simulation": SimulationConfig, "analysis": AnalysisConfig, "drift": DriftConfig,
             "oracle": OracleConfig, "toy": ToyConfig}
_MODEL_KEYS = {f.name for f in fields(ModelParams)}


@dataclass
class RunConfig:
    model: ModelParams
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    drift: DriftConfig = field(default_factory=DriftConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    toy: ToyConfig = field(default_factory=ToyConfig)
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(d) - {"model", "output_dir", *_SECTIONS}
        if unknown:
            k = sorted(unknown)[0]
            raise ConfigError(f"unknown key {k!r}", k)
        if "model" not in d:
            raise ConfigError("missing 'model' section", "model")
        m = d["model"]
        if not isinstance(m, dict):
            raise ConfigError("'model' must be an object", "model")
        bad = set(m) - _MODEL_KEYS
        if bad:
            k = sorted(bad)[0]
            raise ConfigError(f"unknown key {k!r} in model", k)
        try:
            model = ModelParams(**m)
        except TypeError as e:
            raise ConfigError(f"model: {e}", "N") from None
        except ValueError as e:
            key = str(e).split(":")[0].split("/")[0]
            raise ConfigError(f"model.{e}", key) from None
        kw = {"model": model}
        for name, typ in _SECTIONS.items():
            sec = d.get(name, {})
            if not isinstance(sec, dict):
                raise ConfigError(f"{name!r} must be an object", name)
            allowed = {f.name: f for f in fields(typ)}
            for k, v in sec.items():
                if k not in allowed:
                    raise ConfigError(f"unknown key {k!r} in {name}", k)
                _check_value(name, k, v, getattr(typ(), k))
            kw[name] = typ(**sec)
        if "output_dir" in d:
            if not isinstance(d["output_dir"], str):
                raise ConfigError("output_dir must be a string", "output_dir")
            kw["output_dir"] = d["output_dir"]
        return cls(**kw)

    def to_dict(self) -> dict:
        out = {"model": self.model.to_dict()}
        for name in _SECTIONS:
            out[name] = asdict(getattr(self, name))
        out["output_dir"] = self.output_dir
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


_MAY_BE_ZERO = {"seed", "burn_in", "snapshot_stride", "lam_plus", "lam_minus", "u"}


def _check_value(section, key, value, default):
    where = f"{section}.{key}"
    is_int = isinstance(value, int) and not isinstance(value, bool)
    if key == "batch_size":
        ok = value is None or (is_int and value > 0)
    elif isinstance(default, int):
        ok = is_int
        if ok and (value < 0 or (value == 0 and key not in _MAY_BE_ZERO)):
            raise ConfigError(f"{where} must be positive, got {value}", key)
    elif isinstance(default, float):
        ok = (is_int or isinstance(value, float)) and not isinstance(value, bool)
        if ok and (value < 0 or (value == 0 and key not in _MAY_BE_ZERO)):
            raise ConfigError(f"{where} must be positive, got {value}", key)
    elif isinstance(default, list):
        ok = (isinstance(value, list) and bool(value)
              and all(isinstance(x, int) and not isinstance(x, bool) and x > 0 for x in value))
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{where} has an invalid value {value!r}", key)


def _line_of(text: str, key: str | None) -> int | None:
    if not key:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def loads(text: str) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", line=e.lineno) from None
    try:
        return RunConfig.from_dict(raw)
    except ConfigError as e:
        line = _line_of(text, e.key)
        raise ConfigError(str(e), e.key, line) from None


def load(path: str | Path) -> RunConfig:
    return loads(Path(path).read_text(encoding="utf-8"))
