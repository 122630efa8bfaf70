"""Scenario and comparison-suite configuration, loaded from strict JSON files."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from complab.controllers import CompensatorParams
from complab.dynamics import DisturbanceEvent, Sinusoid, Step, Target
from complab.harness.systems import CONTROLLERS, SYSTEMS

PRESET_DIR = Path(__file__).resolve().parent.parent / "presets"


class ConfigError(ValueError):
    pass


def _take(cls, d: dict, where: str, required: tuple[str, ...] = ()) -> dict:
    """Check ``d`` against the dataclass fields of ``cls``: no unknown keys, no missing required ones."""
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    names = {f.name for f in fields(cls)}
    extra = sorted(set(d) - names)
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"{where}: missing keys {missing}")
    return dict(d)


@dataclass(frozen=True)
class ControllerSpec:
    kind: str = "smc"
    gains: dict = field(default_factory=lambda: {"lam": 3.0, "k": 60.0, "gamma": 0.1, "boundary_layer": 0.1})

    @classmethod
    def from_dict(cls, d: dict, where: str = "controller") -> "ControllerSpec":
        d = _take(cls, d, where, ("kind",))
        if d["kind"] not in CONTROLLERS:
            raise ConfigError(f"{where}: unknown controller kind {d['kind']!r}")
        return cls(d["kind"], dict(d.get("gains", {})))


@dataclass(frozen=True)
class TargetSpec:
    kind: str = "step"
    amplitude: float = 10.0
    frequency: float = 0.0
    time: float = 0.0
    initial: float = 0.0
    offset: float = 0.0

    @classmethod
    def from_dict(cls, d: dict, where: str = "target") -> "TargetSpec":
        d = _take(cls, d, where, ("kind", "amplitude"))
        t = cls(**d)
        if t.kind not in ("step", "sinusoid"):
            raise ConfigError(f"{where}: kind must be step or sinusoid")
        if t.kind == "sinusoid" and not t.frequency > 0:
            raise ConfigError(f"{where}: sinusoid needs frequency > 0")
        return t

    def build(self) -> Target:
        if self.kind == "step":
            return Step(self.amplitude, self.time, self.initial)
        return Sinusoid(self.amplitude, self.frequency, self.offset)


@dataclass(frozen=True)
class DesignSpec:
    backend: str = "rules"
    max_iter: int = 10
    tol: float = 0.25
    initial: dict = field(default_factory=lambda: {"kp": 1.0, "kd": 0.5, "kv": 0.5, "ki": 0.0})
    base_url: str = "http://127.0.0.1:8000/v1"
    model_name: str = "default"
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 2

    @classmethod
    def from_dict(cls, d: dict, where: str = "design") -> "DesignSpec":
        d = _take(cls, d, where)
        s = cls(**d)
        if s.backend not in ("rules", "llm"):
            raise ConfigError(f"{where}: backend must be rules or llm")
        if s.max_iter < 1 or not s.tol > 0:
            raise ConfigError(f"{where}: need max_iter >= 1 and tol > 0")
        return s


@dataclass(frozen=True)
class CompensatorSpec:
    source: str = "none"
    params: dict | None = None

    @classmethod
    def from_dict(cls, d: dict, where: str = "compensator") -> "CompensatorSpec":
        d = _take(cls, d, where, ("source",))
        s = cls(**d)
        if s.source not in ("none", "fixed", "designer"):
            raise ConfigError(f"{where}: source must be none, fixed or designer")
        if s.source == "fixed":
            if s.params is None:
                raise ConfigError(f"{where}: fixed source needs params")
            try:
                CompensatorParams.from_dict(s.params)
            except KeyError as exc:
                raise ConfigError(f"{where}: {exc}") from None
        return s

    def fixed_params(self) -> CompensatorParams | None:
        return CompensatorParams.from_dict(self.params) if self.source == "fixed" else None


@dataclass(frozen=True)
class PhaseSpec:
    """Second run reusing the designed compensator with another controller and target."""

    base_controller: ControllerSpec
    target: TargetSpec
    horizon: float | None = None

    @classmethod
    def from_dict(cls, d: dict, where: str = "test_phase") -> "PhaseSpec":
        d = _take(cls, d, where, ("base_controller", "target"))
        return cls(
            ControllerSpec.from_dict(d["base_controller"], f"{where}.base_controller"),
            TargetSpec.from_dict(d["target"], f"{where}.target"),
            d.get("horizon"),
        )


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    system: str
    seed: int
    base_controller: ControllerSpec = field(default_factory=ControllerSpec)
    compensator: CompensatorSpec = field(default_factory=CompensatorSpec)
    target: TargetSpec = field(default_factory=TargetSpec)
    disturbances: tuple[DisturbanceEvent, ...] = ()
    dt: float = 1e-3
    horizon: float = 5.0
    indirect_mode: bool = False
    shaping_bounds: tuple[float, float] | None = None
    reference_system: str = "reference"
    b_scale: float = 1.0
    load: float = 0.0
    integral_mode: str = "desired"
    design: DesignSpec = field(default_factory=DesignSpec)
    test_phase: PhaseSpec | None = None
    description: str = ""

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.horizon > self.dt:
            raise ConfigError("horizon must exceed dt")
        for sys_name in (self.system, self.reference_system):
            if sys_name not in SYSTEMS:
                raise ConfigError(f"unknown system {sys_name!r}")
        if self.integral_mode not in ("desired", "reference"):
            raise ConfigError("integral_mode must be desired or reference")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        for ev in self.disturbances:
            if not 0 <= ev.time <= self.horizon:
                raise ConfigError(f"disturbance at t={ev.time} lies outside the horizon")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = _take(cls, d, "scenario", ("name", "system", "seed"))
        kw = dict(d)
        if "base_controller" in d:
            kw["base_controller"] = ControllerSpec.from_dict(d["base_controller"], "base_controller")
        if "compensator" in d:
            kw["compensator"] = CompensatorSpec.from_dict(d["compensator"])
        if "target" in d:
            kw["target"] = TargetSpec.from_dict(d["target"])
        if "design" in d:
            kw["design"] = DesignSpec.from_dict(d["design"])
        if d.get("test_phase") is not None:
            kw["test_phase"] = PhaseSpec.from_dict(d["test_phase"])
        evs = []
        for i, ev in enumerate(d.get("disturbances", [])):
            if set(ev) != {"time", "state"} or len(ev["state"]) != 2:
                raise ConfigError(f"disturbances[{i}]: need exactly time and a 2-element state")
            evs.append(DisturbanceEvent(float(ev["time"]), (float(ev["state"][0]), float(ev["state"][1]))))
        kw["disturbances"] = tuple(evs)
        if d.get("shaping_bounds") is not None:
            lo, hi = d["shaping_bounds"]
            kw["shaping_bounds"] = (float(lo), float(hi))
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["disturbances"] = [{"time": ev.time, "state": list(ev.state)} for ev in self.disturbances]
        if self.shaping_bounds is not None:
            d["shaping_bounds"] = list(self.shaping_bounds)
        return d

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class Perturbation:
    label: str
    b_scale: float = 1.0
    load: float = 0.0


@dataclass(frozen=True)
class ComparisonEntry:
    label: str
    base_controller: ControllerSpec
    compensator: CompensatorSpec = field(default_factory=CompensatorSpec)


@dataclass(frozen=True)
class CompareConfig:
    """Several controllers on one plant under a set of payload-like perturbations.

    The reference response is always the reference plant under
    ``reference_controller``.
    """

    name: str
    system: str
    seed: int
    entries: tuple[ComparisonEntry, ...] = ()
    perturbations: tuple[Perturbation, ...] = (Perturbation("nominal"),)
    reference_controller: ControllerSpec = field(default_factory=ControllerSpec)
    target: TargetSpec = field(default_factory=TargetSpec)
    dt: float = 1e-3
    horizon: float = 5.0
    description: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "CompareConfig":
        d = _take(cls, d, "compare", ("name", "system", "seed"))
        kw = dict(d)
        entries = []
        for i, e in enumerate(d.get("entries", [])):
            e = _take(ComparisonEntry, e, f"entries[{i}]", ("label", "base_controller"))
            entries.append(
                ComparisonEntry(
                    e["label"],
                    ControllerSpec.from_dict(e["base_controller"], f"entries[{i}].base_controller"),
                    CompensatorSpec.from_dict(e.get("compensator", {"source": "none"}), f"entries[{i}].compensator"),
                )
            )
        kw["entries"] = tuple(entries)
        if "perturbations" in d:
            kw["perturbations"] = tuple(
                Perturbation(**_take(Perturbation, p, f"perturbations[{i}]", ("label",))) for i, p in enumerate(d["perturbations"])
            )
        if "reference_controller" in d:
            kw["reference_controller"] = ControllerSpec.from_dict(d["reference_controller"], "reference_controller")
        if "target" in d:
            kw["target"] = TargetSpec.from_dict(d["target"])
        if d["system"] not in SYSTEMS:
            raise ConfigError(f"unknown system {d['system']!r}")
        if not (kw.get("dt", 1e-3) > 0 and kw.get("horizon", 5.0) > kw.get("dt", 1e-3)):
            raise ConfigError("need 0 < dt < horizon")
        if any(e.compensator.source == "designer" for e in entries):
            raise ConfigError("comparison entries take fixed compensators only")
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)


def load_json(path_or_name: str | Path) -> dict:
    """A config file path, or the name of a shipped preset."""
    p = Path(path_or_name)
    if not p.exists():
        preset = PRESET_DIR / f"{path_or_name}.json"
        if not preset.exists():
            raise FileNotFoundError(f"no config file or preset named {path_or_name!r}")
        p = preset
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None


def load_scenario(path_or_name: str | Path) -> ScenarioConfig:
    return ScenarioConfig.from_dict(load_json(path_or_name))


def load_compare(path_or_name: str | Path) -> CompareConfig:
    return CompareConfig.from_dict(load_json(path_or_name))


def preset_names() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.json") if p.stem != "paper_envelope")
