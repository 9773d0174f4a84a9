"""Scenario documents: one JSON file describing topology, sensors, noise and game."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import IciError, ScenarioError
from .model import (ClusterSpec, GasPipelineSpec, GeneratorSpec, JunctionSpec,
                    TransmissionLineSpec, WaterPipelineSpec)

SECTIONS = ("generators", "lines", "gas_pipelines", "water_pipelines", "junctions",
            "coupling", "sensors", "noise", "game")
STRATEGIES = ("msne", "proportional", "best-response")
CI_NAMES = ("power", "gas", "water")


def bundled_scenario_path() -> Path:
    return Path(str(resources.files("iciblotto") / "data" / "benchmark_scenario.json"))


@dataclass(frozen=True)
class GameConfig:
    alpha: float = 0.5
    R_a: float = 1.0
    R_d: float = 5.0
    attacker: str = "msne"
    defender: str = "msne"
    replicas: int = 50
    horizon: int = 200
    seed: int = 0
    track_states: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.alpha > 0:
            raise ScenarioError("game.alpha must be > 0")
        if not (self.R_a > 0 and self.R_d > 0):
            raise ScenarioError("game budgets must be > 0")
        if self.replicas < 1:
            raise ScenarioError("game.replicas must be >= 1")
        if self.horizon < 1:
            raise ScenarioError("game.horizon must be >= 1")
        check_strategy(self.attacker, "attacker")
        check_strategy(self.defender, "defender")


def parse_subset(text: str) -> tuple[str, ...]:
    parts = tuple(p.strip() for p in text.split(",") if p.strip())
    if not parts:
        raise ScenarioError("empty CI subset")
    bad = [p for p in parts if p not in CI_NAMES]
    if bad:
        raise ScenarioError(f"unknown CI name(s) {bad}; expected a subset of {CI_NAMES}")
    return parts


def check_strategy(name: str, player: str) -> None:
    if name in STRATEGIES:
        return
    if name.startswith("single-ci:"):
        if player != "defender":
            raise ScenarioError("single-ci strategies are defender-only")
        parse_subset(name.split(":", 1)[1])
        return
    raise ScenarioError(f"unknown {player} strategy {name!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    dt: float
    generators: tuple[GeneratorSpec, ...]
    lines: tuple[TransmissionLineSpec, ...]
    gas_pipelines: tuple[GasPipelineSpec, ...]
    water_pipelines: tuple[WaterPipelineSpec, ...]
    junctions: tuple[JunctionSpec, ...]
    coupling: dict[str, tuple[tuple[str, str], ...]]
    sensors: tuple[ClusterSpec, ...]
    noise: dict[str, Any]
    game: GameConfig
    power_demand: dict[str, tuple[tuple[int, float], ...]] = field(default_factory=dict)
    sha256: str = ""
    source: dict = field(default_factory=dict, repr=False)

    def with_game(self, **changes) -> "ScenarioConfig":
        return replace(self, game=replace(self.game, **changes))


def _profile(raw, where) -> tuple[tuple[int, float], ...]:
    if raw is None:
        return ((0, 0.0),)
    if isinstance(raw, (int, float)):
        return ((0, float(raw)),)
    try:
        prof = tuple((int(k), float(v)) for k, v in raw)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: demand profile must be a list of [step, value] pairs") from None
    prof = tuple(sorted(prof))
    if not prof or prof[0][0] != 0:
        raise ScenarioError(f"{where}: demand profile must start at step 0")
    return prof


def _take(obj, key, where, cast=float, default=None):
    if key not in obj:
        if default is not None:
            return default
        raise ScenarioError(f"{where}: missing field {key!r}")
    try:
        return cast(obj[key])
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: field {key!r} has bad value {obj[key]!r}") from None


def _noise_value(v, where):
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, dict):
        return {str(k): float(x) for k, x in v.items()}
    raise ScenarioError(f"noise.{where} must be a number or an object keyed by infrastructure/state")


def parse_scenario(doc: dict, sha256: str = "") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    missing = [s for s in SECTIONS if s not in doc]
    if missing:
        raise ScenarioError(f"scenario is missing section(s): {', '.join(missing)}")
    try:
        gens, power_demand = [], {}
        for i, g in enumerate(doc["generators"]):
            w = f"generators[{i}]"
            gid = _take(g, "id", w, str)
            gens.append(GeneratorSpec(
                id=gid, inertia=_take(g, "inertia", w), damping=_take(g, "damping", w),
                turbine_time=_take(g, "turbine_time", w), power=_take(g, "power", w),
                voltage=_take(g, "voltage", w, default=1.0), angle=_take(g, "angle", w, default=0.0),
                fuel=_take(g, "fuel", w, str, default="external"),
                efficiency=float(g["efficiency"]) if g.get("efficiency") is not None else None))
            if "demand" in g:
                power_demand[gid] = _profile(g["demand"], w)
        lines = tuple(TransmissionLineSpec(_take(l, "from", f"lines[{i}]", str), _take(l, "to", f"lines[{i}]", str),
                                           _take(l, "reactance", f"lines[{i}]"))
                      for i, l in enumerate(doc["lines"]))
        junctions = []
        for i, j in enumerate(doc["junctions"]):
            w = f"junctions[{i}]"
            junctions.append(JunctionSpec(
                id=_take(j, "id", w, str), infrastructure=_take(j, "infrastructure", w, str),
                setpoint=_take(j, "setpoint", w), efficiency=_take(j, "efficiency", w, default=0.0),
                demand=_profile(j.get("demand"), w)))
        gas = []
        for i, p in enumerate(doc["gas_pipelines"]):
            w = f"gas_pipelines[{i}]"
            gas.append(GasPipelineSpec(
                id=_take(p, "id", w, str), from_junction=_take(p, "from", w, str), to_junction=_take(p, "to", w, str),
                **{k: _take(p, k, w) for k in ("tau1", "tau2", "tau3", "tau1_hat", "tau2_hat", "rho1", "rho1_hat")},
                area=_take(p, "area", w, default=1.0)))
        water = []
        for i, p in enumerate(doc["water_pipelines"]):
            w = f"water_pipelines[{i}]"
            water.append(WaterPipelineSpec(
                id=_take(p, "id", w, str), from_junction=_take(p, "from", w, str), to_junction=_take(p, "to", w, str),
                viscosity=_take(p, "viscosity", w), friction=_take(p, "friction", w),
                area=_take(p, "area", w, default=1.0)))
        c = doc["coupling"] or {}
        coupling = {k: tuple((str(a), str(b)) for a, b in c.get(k, ()))
                    for k in ("gas_to_generator", "water_to_generator", "compressor_to_bus", "pump_to_bus")}
        unknown = set(c) - set(coupling)
        if unknown:
            raise ScenarioError(f"coupling: unknown link list(s) {sorted(unknown)}")
        sensors = []
        for i, s in enumerate(doc["sensors"]):
            w = f"sensors[{i}]"
            ci = s.get("ci")
            if ci is not None and ci not in CI_NAMES:
                raise ScenarioError(f"{w}: ci must be one of {CI_NAMES}")
            sensors.append(ClusterSpec(_take(s, "id", w, str), tuple(s.get("states", ())), ci))
        ids = [s.id for s in sensors]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate sensor cluster ids")
        nz = doc["noise"]
        noise = {k: _noise_value(nz.get(k, d), k) for k, d in
                 (("psi", 0.0), ("phi", 0.0), ("omega", 1.0), ("cost", 1.0))}
        noise["threshold"] = nz.get("threshold")
        g = doc["game"]
        game = GameConfig(
            alpha=float(g.get("alpha", 0.5)), R_a=float(g.get("R_a", 1.0)), R_d=float(g.get("R_d", 5.0)),
            attacker=str(g.get("attacker", "msne")), defender=str(g.get("defender", "msne")),
            replicas=int(g.get("replicas", 50)), horizon=int(g.get("horizon", 200)),
            seed=int(g.get("seed", 0)), track_states=tuple(g.get("track_states", ())))
        dt = float(doc.get("dt", 0.1))
    except ScenarioError:
        raise
    except IciError as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from None
    except (KeyError, TypeError, AttributeError) as exc:
        raise ScenarioError(f"malformed scenario: {exc!r}") from None
    return ScenarioConfig(str(doc.get("name", "scenario")), dt, tuple(gens), lines, tuple(gas), tuple(water),
                          tuple(junctions), coupling, tuple(sensors), noise, game, power_demand, sha256, doc)


def load_scenario(path=None) -> ScenarioConfig:
    path = Path(path) if path is not None else bundled_scenario_path()
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    return parse_scenario(doc, hashlib.sha256(raw).hexdigest())


def noise_vector(spec, labels, infra_of) -> np.ndarray:
    """Expand a scalar or {infrastructure|label: value} mapping onto labels.

    Exact label keys win over infrastructure keys; ``default`` covers the rest.
    """
    if isinstance(spec, float):
        return np.full(len(labels), spec)
    out = np.empty(len(labels))
    for i, lab in enumerate(labels):
        if lab in spec:
            out[i] = spec[lab]
        elif infra_of(lab) in spec:
            out[i] = spec[infra_of(lab)]
        elif "default" in spec:
            out[i] = spec["default"]
        else:
            raise ScenarioError(f"noise value missing for {lab!r}")
    return out
