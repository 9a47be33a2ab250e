"""JSON run configs, run manifests and result files."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from datasurv.abm import AbmConfig, StrategyConfig
from datasurv.errors import ConfigError, InvalidParameterError
from datasurv.model import CompartmentState, ModelParams, ModelVariant

TOOL_VERSION = "0.1.0"
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class OdeRunConfig:
    """Deterministic integration request.

    With ``fractions`` (the default) states are shares of the network and ``b``
    is used as given. Otherwise states are node counts out of ``n`` and the
    model runs with ``b / n``. Missing ``s0`` / ``i0`` default to a 90/10 split.
    """

    variant: ModelVariant = ModelVariant.CLASSIC
    b: float = 0.4
    c: float = 0.15
    m: float = 0.0
    m_prime: float = 0.0
    l: float = 0.0
    fractions: bool = True
    n: float = 1.0
    s0: float | None = None
    i0: float | None = None
    r_init: float = 0.0
    t_end: float = 200.0
    dt: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", ModelVariant.parse(self.variant))
        if not isinstance(self.fractions, bool):
            raise InvalidParameterError("fractions", f"expected true/false, got {self.fractions!r}")
        for name in ("b", "c", "m", "m_prime", "l", "n", "r_init", "t_end", "dt"):
            _number(name, getattr(self, name))
        if self.fractions and self.n != 1.0:
            raise InvalidParameterError("n", "must be 1 when fractions is true")
        if self.n <= 0:
            raise InvalidParameterError("n", f"must be > 0, got {self.n!r}")
        if self.dt <= 0:
            raise InvalidParameterError("dt", f"must be > 0, got {self.dt!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidParameterError("seed", f"expected a non-negative integer, got {self.seed!r}")
        if self.s0 is None:
            object.__setattr__(self, "s0", 0.9 * self.n)
        if self.i0 is None:
            object.__setattr__(self, "i0", 0.1 * self.n)
        for name in ("s0", "i0"):
            _number(name, getattr(self, name))
        for name in ("b", "c", "m", "m_prime", "l", "n", "s0", "i0", "r_init", "t_end", "dt"):
            object.__setattr__(self, name, float(getattr(self, name)))
        # surface ModelParams range errors at load time
        self.params()

    def params(self) -> ModelParams:
        rates = dict(m=self.m, m_prime=self.m_prime, l=self.l)
        if self.fractions:
            return ModelParams(b=self.b, c=self.c, n_total=1.0, **rates)
        return ModelParams.from_beta(self.b, self.c, self.n, **rates)

    def initial_state(self) -> CompartmentState:
        return CompartmentState(self.s0, self.i0, self.r_init, 0.0)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["variant"] = self.variant.value
        return out


def _number(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidParameterError(name, f"expected a number, got {value!r}")
    if not math.isfinite(value) or value < 0:
        raise InvalidParameterError(name, f"must be finite and >= 0, got {value!r}")


def _reject_unknown(data: dict, allowed: set, prefix: str = "") -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        name = prefix + unknown[0]
        raise ConfigError(f"unknown key {name!r} (allowed: {', '.join(sorted(allowed))})", field=name)


def config_from_dict(data: dict) -> OdeRunConfig | AbmConfig:
    """Validate a parsed config object. ``kind`` selects ``"ode"`` (default) or ``"abm"``."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    kind = data.pop("kind", "ode")
    try:
        if kind == "ode":
            _reject_unknown(data, {f.name for f in dataclasses.fields(OdeRunConfig)})
            return OdeRunConfig(**data)
        if kind == "abm":
            _reject_unknown(data, {f.name for f in dataclasses.fields(AbmConfig)})
            strategy = data.pop("strategy", {})
            if not isinstance(strategy, dict):
                raise ConfigError("strategy must be an object", field="strategy")
            _reject_unknown(strategy, {f.name for f in dataclasses.fields(StrategyConfig)}, "strategy.")
            return AbmConfig(strategy=StrategyConfig(**strategy), **data)
    except InvalidParameterError as exc:
        raise ConfigError(f"invalid value for {exc.field!r}: {exc}", field=exc.field) from exc
    raise ConfigError(f"unknown kind {kind!r} (expected 'ode' or 'abm')", field="kind")


def config_to_dict(config: OdeRunConfig | AbmConfig) -> dict:
    kind = "abm" if isinstance(config, AbmConfig) else "ode"
    return {"kind": kind, **config.to_dict()}


def _parse_json(text: str, path) -> object:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def load_config(path) -> OdeRunConfig | AbmConfig:
    """Read a JSON config, or the ``config`` section of a run manifest."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    data = _parse_json(text, path)
    if isinstance(data, dict) and "tool_version" in data and "config" in data:
        data = data["config"]
    return config_from_dict(data)


def save_config(config: OdeRunConfig | AbmConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(config_to_dict(config), indent=2) + "\n")
    return path


@dataclass
class RunManifest:
    """Everything needed to regenerate a run's outputs byte for byte."""

    command: str
    config: dict
    seeds: list = field(default_factory=list)
    args: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    duration_s: float = 0.0
    tool_version: str = TOOL_VERSION

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        names = {f.name for f in dataclasses.fields(cls)}
        _reject_unknown(data, names)
        return cls(**data)


def load_manifest(path) -> RunManifest:
    path = Path(path)
    try:
        data = _parse_json(path.read_text(), path)
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc.strerror}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: manifest must be a JSON object")
    return RunManifest.from_dict(data)


def write_results(results, manifest: RunManifest, out_dir) -> list[Path]:
    """Write each result and then ``manifest.json`` into ``out_dir``.

    ``results`` maps file names to objects with ``to_csv`` (trajectories, ABM
    results, sweep tables, ...) or ``to_dict`` (reports, written as JSON). A
    bare result is written as ``result.csv``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create output directory {out}: {exc.strerror}") from exc
    if not isinstance(results, dict):
        results = {"result.csv": results}
    paths = []
    for name, obj in results.items():
        path = out / name
        try:
            if hasattr(obj, "to_csv"):
                obj.to_csv(path)
            else:
                payload = obj.to_dict() if hasattr(obj, "to_dict") else obj
                path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
        paths.append(path)
    manifest.outputs = [p.name for p in paths]
    mpath = out / MANIFEST_NAME
    mpath.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    paths.append(mpath)
    return paths
