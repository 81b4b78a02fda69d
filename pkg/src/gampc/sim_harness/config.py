"""Scenario files: INI text with one section per component.

Sections and keys::

    [map]       source = synthetic | file; generator (straight, circle, oval, campus);
                radius; straight; length; path; ds; y_min; y_max
    [vehicle]   planner VehicleParams fields (M, J, l_f, l_r, R_r, c_aero, B, C, E,
                mu, eps0, g, length, width)
    [plant]     same keys as [vehicle], overriding it for the simulated car; dt_plant
    [weights]   Weights fields
    [bounds]    y, delta, tau, u1, u2 as "lower, upper"
    [horizon]   N, dt, dt_state, v_ref (a speed, or "s:v, s:v, ..." breakpoints)
    [ga]        GaConfig fields; alpha_mut_range as "lo, hi"
    [obstacles] one key per obstacle: "s=.., y=.., theta=.., v_s=.., v_y=.., a=.., b=.."
    [run]       duration, laps, s_stop, dt_cycle, seed, s0, y0, v0, warm_shift,
                y_abort, out_dir, name

Any key not listed is rejected.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..cost_constraints import Bounds, HorizonSpec, Weights
from ..ga_solver import GaConfig
from ..obstacles import Obstacle
from ..road_map import RoadMap, load_map_file
from ..vehicle_dynamics import VehicleParams
from .tracks import synthetic_map


class ScenarioError(ValueError):
    """Invalid or inconsistent scenario configuration."""


MAP_KEYS = {"source", "generator", "radius", "straight", "length", "path", "ds", "y_min", "y_max"}
RUN_KEYS = {"duration", "laps", "s_stop", "dt_cycle", "seed", "s0", "y0", "v0", "warm_shift",
            "y_abort", "out_dir", "name"}
PLANT_EXTRA = {"dt_plant"}
OBSTACLE_KEYS = {"s": "s_obs", "y": "y_obs", "theta": "theta_obs", "v_s": "v_s", "v_y": "v_y",
                 "a": "a", "b": "b"}
SECTIONS = ("map", "vehicle", "plant", "weights", "bounds", "horizon", "ga", "obstacles", "run")


@dataclass(frozen=True)
class MapSpec:
    source: str = "synthetic"
    generator: str = "campus"
    radius: float | None = None
    straight: float | None = None
    length: float | None = None
    path: str | None = None
    ds: float = 4.0
    y_min: float = -1.75
    y_max: float = 1.75

    def build(self, base_dir: Path | None = None) -> RoadMap:
        if self.source == "file":
            if not self.path:
                raise ScenarioError("[map] source = file needs a path")
            p = Path(self.path)
            if not p.is_absolute() and base_dir is not None:
                p = base_dir / p
            return load_map_file(p, ds=self.ds, b_yl=self.y_min, b_yh=self.y_max)
        if self.source != "synthetic":
            raise ScenarioError(f"[map] source must be 'synthetic' or 'file', got {self.source!r}")
        params = {k: getattr(self, k) for k in ("radius", "straight", "length")
                  if getattr(self, k) is not None}
        try:
            return synthetic_map(self.generator, ds=self.ds, b_yl=self.y_min, b_yh=self.y_max, **params)
        except TypeError as e:
            raise ScenarioError(f"[map] generator {self.generator!r}: {e}") from None


@dataclass(frozen=True)
class RunSpec:
    duration: float = 60.0
    laps: float = 0.0
    s_stop: float | None = None
    dt_cycle: float = 0.05
    seed: int = 0
    s0: float = 0.0
    y0: float = 0.0
    v0: float | None = None
    warm_shift: float | None = None
    y_abort: float = 5.0
    out_dir: str = "out"
    name: str = "scenario"


@dataclass(frozen=True)
class ScenarioConfig:
    map: MapSpec = field(default_factory=MapSpec)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    plant: VehicleParams = field(default_factory=VehicleParams)
    dt_plant: float = 0.01
    weights: Weights = field(default_factory=Weights)
    bounds: Bounds = field(default_factory=Bounds)
    horizon: HorizonSpec = field(default_factory=HorizonSpec)
    ga: GaConfig = field(default_factory=GaConfig)
    obstacles: tuple = ()
    run: RunSpec = field(default_factory=RunSpec)
    base_dir: Path | None = None

    def __post_init__(self):
        validate(self)

    @property
    def plant_steps_per_cycle(self) -> int:
        return int(round(self.run.dt_cycle / self.dt_plant))

    @property
    def warm_shift(self) -> float:
        """Control steps the previous plan is advanced by at each replan."""
        if self.run.warm_shift is not None:
            return self.run.warm_shift
        return self.run.dt_cycle / self.horizon.dt

    def with_seed(self, seed: int) -> ScenarioConfig:
        return replace(self, run=replace(self.run, seed=int(seed)))


def _divides(small: float, big: float) -> bool:
    r = big / small
    return abs(r - round(r)) < 1e-9 and round(r) >= 1


def validate(cfg: ScenarioConfig) -> None:
    if not cfg.dt_plant > 0:
        raise ScenarioError("dt_plant must be positive")
    if not cfg.run.dt_cycle > 0:
        raise ScenarioError("dt_cycle must be positive")
    if not _divides(cfg.dt_plant, cfg.run.dt_cycle):
        raise ScenarioError(f"dt_plant={cfg.dt_plant} does not divide the planner cycle {cfg.run.dt_cycle}")
    if not _divides(cfg.dt_plant, cfg.horizon.dt):
        raise ScenarioError(f"dt_plant={cfg.dt_plant} does not divide the horizon step {cfg.horizon.dt}")
    if not _divides(cfg.horizon.dt_state, cfg.horizon.dt):
        raise ScenarioError("dt_state does not divide dt")
    if cfg.run.duration < 0 or cfg.run.laps < 0:
        raise ScenarioError("duration and laps must be non-negative")
    if not cfg.run.y_abort > 0:
        raise ScenarioError("y_abort must be positive")
    if cfg.run.v0 is not None and cfg.run.v0 < 0:
        raise ScenarioError("v0 must be non-negative")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _float(section, key, text):
    try:
        v = float(text)
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ScenarioError(f"[{section}] {key}: value must be finite")
    return v


def _int(section, key, text):
    v = _float(section, key, text)
    if v != int(v):
        raise ScenarioError(f"[{section}] {key}: expected an integer, got {text!r}")
    return int(v)


def _pair(section, key, text):
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) != 2:
        raise ScenarioError(f"[{section}] {key}: expected 'lower, upper', got {text!r}")
    return (_float(section, key, parts[0]), _float(section, key, parts[1]))


def _bool(section, key, text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ScenarioError(f"[{section}] {key}: expected true or false, got {text!r}")


def _coerce(section, key, text, kind):
    if kind is bool:
        return _bool(section, key, text)
    if kind is int:
        return _int(section, key, text)
    if kind is float:
        return _float(section, key, text)
    if kind == "pair":
        return _pair(section, key, text)
    return text.strip()


def _dataclass_kinds(cls):
    kinds = {}
    for f in fields(cls):
        t = str(f.type)
        if "tuple" in t:
            kinds[f.name] = "pair"
        elif t.startswith("bool"):
            kinds[f.name] = bool
        elif t.startswith("int"):
            kinds[f.name] = int
        elif t.startswith("float") or t == "float | None":
            kinds[f.name] = float
        else:
            kinds[f.name] = str
    return kinds


def _section_values(cp, section, cls, extra=None, skip=()):
    kinds = {k: v for k, v in _dataclass_kinds(cls).items() if k not in skip}
    kinds.update(extra or {})
    out = {}
    if not cp.has_section(section):
        return out
    for key, text in cp.items(section):
        if key not in kinds:
            raise ScenarioError(f"[{section}] unknown key {key!r}; allowed: {', '.join(sorted(kinds))}")
        out[key] = _coerce(section, key, text, kinds[key])
    return out


def _parse_vref(text):
    text = text.strip()
    if ":" not in text:
        return _float("horizon", "v_ref", text)
    table = []
    for item in text.split(","):
        s, _, v = item.partition(":")
        table.append((_float("horizon", "v_ref", s), _float("horizon", "v_ref", v)))
    return tuple(table)


def _parse_obstacle(name, text):
    vals = {}
    for item in text.split(","):
        if not item.strip():
            continue
        k, sep, v = item.partition("=")
        k = k.strip()
        if not sep or k not in OBSTACLE_KEYS:
            raise ScenarioError(f"[obstacles] {name}: bad entry {item.strip()!r}; keys are {', '.join(OBSTACLE_KEYS)}")
        vals[OBSTACLE_KEYS[k]] = _float("obstacles", f"{name}.{k}", v)
    for req in ("s_obs", "y_obs"):
        if req not in vals:
            raise ScenarioError(f"[obstacles] {name}: missing {req[0]}")
    try:
        return Obstacle(**vals)
    except ValueError as e:
        raise ScenarioError(f"[obstacles] {name}: {e}") from None


def _build(cls, section, values):
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"[{section}] {e}") from None


def parse_scenario(text: str, overrides=(), base_dir: Path | None = None) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from INI text plus ``section.key=value`` overrides."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ScenarioError(f"malformed scenario file: {e}") from None
    for ov in overrides:
        key, sep, value = ov.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot or not option:
            raise ScenarioError(f"override must look like section.key=value, got {ov!r}")
        if section not in SECTIONS:
            raise ScenarioError(f"override {ov!r}: unknown section {section!r}")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option, value.strip())
    for section in cp.sections():
        if section not in SECTIONS:
            raise ScenarioError(f"unknown section [{section}]; allowed: {', '.join(SECTIONS)}")

    map_vals = _section_values(cp, "map", MapSpec)
    vehicle = _build(VehicleParams, "vehicle", _section_values(cp, "vehicle", VehicleParams))
    plant_vals = _section_values(cp, "plant", VehicleParams, extra={"dt_plant": float})
    dt_plant = plant_vals.pop("dt_plant", 0.01)
    try:
        plant = replace(vehicle, **plant_vals)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"[plant] {e}") from None
    weights = _build(Weights, "weights", _section_values(cp, "weights", Weights))
    bounds = _build(Bounds, "bounds", _section_values(cp, "bounds", Bounds))
    hz = _section_values(cp, "horizon", HorizonSpec, extra={"v_ref": str})
    if "v_ref" in hz:
        hz["v_ref"] = _parse_vref(hz["v_ref"])
    horizon = _build(HorizonSpec, "horizon", hz)
    ga_vals = _section_values(cp, "ga", GaConfig)
    ga = _build(GaConfig, "ga", ga_vals)
    obstacles = tuple(_parse_obstacle(k, v) for k, v in cp.items("obstacles")) if cp.has_section("obstacles") else ()
    run_vals = _section_values(cp, "run", RunSpec, extra={"seed": int})
    run = _build(RunSpec, "run", run_vals)
    mp = _build(MapSpec, "map", map_vals)
    try:
        return ScenarioConfig(map=mp, vehicle=vehicle, plant=plant, dt_plant=dt_plant, weights=weights,
                              bounds=bounds, horizon=horizon, ga=ga, obstacles=obstacles, run=run,
                              base_dir=base_dir)
    except ValueError as e:
        raise ScenarioError(str(e)) from None


def load_scenario(path, overrides=()) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {p}: {e.strerror}") from None
    return parse_scenario(text, overrides, base_dir=p.parent)
