"""Scenario files: YAML schema, validation, overrides, and shipped presets.

A scenario file has sections `vehicle`, `gains`, `fdi`, `sim`,
`trajectory`, and `faults`. Any section left out falls back to the
packaged defaults (see presets/defaults.yaml, which doubles as the schema
reference). Validation failures raise ScenarioError with the offending
key path in the message.
"""

from __future__ import annotations

import importlib.resources
import math
from pathlib import Path

import numpy as np
import yaml

from .controller import ControllerGains
from .fdi import FdiConfig
from .simulation import FaultSchedule, Scenario
from .trajectory import Segment, TrajectoryPlan
from .vehicle import ThrusterBank, ThrusterGeometry, VehicleParams


class ScenarioError(ValueError):
    """Scenario file failed schema or invariant validation."""


def _presets_dir():
    return importlib.resources.files("rovftc") / "presets"


def list_presets() -> list[str]:
    names = [p.name[:-5] for p in _presets_dir().iterdir()
             if p.name.endswith(".yaml") and p.name != "defaults.yaml"]
    return sorted(names)


def preset_path(name: str) -> Path:
    p = _presets_dir() / f"{name}.yaml"
    if not p.is_file():
        raise ScenarioError(f"unknown preset {name!r}; available: "
                            f"{', '.join(list_presets())}")
    return Path(str(p))


def resolve_scenario_path(ref: str) -> Path:
    """A scenario reference is either a file path or a preset name."""
    p = Path(ref)
    if p.is_file():
        return p
    if "/" not in ref and not ref.endswith(".yaml"):
        return preset_path(ref)
    raise ScenarioError(f"scenario file not found: {ref}")


def _defaults() -> dict:
    with (_presets_dir() / "defaults.yaml").open() as fh:
        return yaml.safe_load(fh)


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _matrix3(raw, path: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape == (3,):
        return np.diag(arr)
    if arr.shape == (3, 3):
        return arr
    raise ScenarioError(f"{path}: expected 3 diagonal entries or a 3x3 matrix")


def _vector(raw, n: int, path: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape != (n,):
        raise ScenarioError(f"{path}: expected {n} entries")
    return arr


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply repeatable `section.key=value` overrides. The key must
    already exist in the merged configuration."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in config.items()}
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r}: expected key=value")
        key, _, raw = item.partition("=")
        parts = key.strip().split(".")
        node = out
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ScenarioError(f"override {key!r}: unknown section {part!r}")
            node = node[part]
        leaf = parts[-1]
        if leaf not in node:
            raise ScenarioError(f"override {key!r}: no such config key")
        node[leaf] = yaml.safe_load(raw)
    return out


def scenario_from_dict(config: dict, name: str = "scenario") -> Scenario:
    cfg = _merge(_defaults(), config)

    veh = cfg["vehicle"]
    try:
        params = VehicleParams(
            inertia=_matrix3(veh["inertia"], "vehicle.inertia"),
            lin_damping=_matrix3(veh["lin_damping"], "vehicle.lin_damping"),
            quad_damping=_vector(veh["quad_damping"], 3, "vehicle.quad_damping"),
            B=_matrix3(veh["B"], "vehicle.B"),
        )
    except ValueError as exc:
        raise ScenarioError(f"vehicle: {exc}") from exc

    fdi_cfg = cfg["fdi"]
    try:
        fdi = FdiConfig(**fdi_cfg)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"fdi: {exc}") from exc

    try:
        geom = ThrusterGeometry(alpha=float(veh["alpha"]), l=float(veh["l"]))
    except ValueError as exc:
        raise ScenarioError(f"vehicle geometry: {exc}") from exc

    try:
        bank = ThrusterBank(K=_vector(veh["K"], 4, "vehicle.K"),
                            u_max=float(veh["u_max"]),
                            w_min=fdi.w_min)
    except ValueError as exc:
        raise ScenarioError(f"vehicle thrusters: {exc}") from exc

    g = cfg["gains"]
    try:
        gains = ControllerGains(
            gamma1=_vector(g["gamma1"], 3, "gains.gamma1"),
            gamma2=_vector(g["gamma2"], 3, "gains.gamma2"),
            a1=_vector(g["a1"], 3, "gains.a1"),
            a2=_vector(g["a2"], 3, "gains.a2"),
        )
    except ValueError as exc:
        raise ScenarioError(f"gains: {exc}") from exc

    traj = cfg["trajectory"]
    segments = []
    for i, seg in enumerate(traj.get("segments", [])):
        path = f"trajectory.segments[{i}]"
        mode = seg.get("mode")
        try:
            if mode == "straight":
                segments.append(Segment("straight", float(seg["duration"]),
                                        speed=float(seg["speed"]),
                                        heading=float(seg["heading"])))
            elif mode == "turn":
                segments.append(Segment("turn", float(seg["duration"]),
                                        speed=float(seg["speed"]),
                                        yaw_rate=float(seg["yaw_rate"])))
            elif mode == "hold":
                segments.append(Segment("hold", float(seg["duration"])))
            else:
                raise ScenarioError(f"{path}: unknown mode {mode!r}")
        except KeyError as exc:
            raise ScenarioError(f"{path}: missing field {exc}") from exc
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    try:
        plan = TrajectoryPlan(_vector(traj["initial_pose"], 3,
                                      "trajectory.initial_pose"), segments)
    except ValueError as exc:
        raise ScenarioError(f"trajectory: {exc}") from exc

    sim = cfg["sim"]
    try:
        schedule = FaultSchedule(
            events=[(ev["time"], ev["thruster"], ev["weight"])
                    for ev in cfg.get("faults") or []],
            settle_time=float(sim["settle_time"]),
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"faults: each event needs time/thruster/weight "
                            f"({exc})") from exc
    except ValueError as exc:
        raise ScenarioError(f"faults: {exc}") from exc

    try:
        return Scenario(
            name=name,
            params=params, geometry=geom, bank=bank, gains=gains, fdi=fdi,
            plan=plan, schedule=schedule,
            dt=float(sim["dt"]), duration=float(sim["duration"]),
            decimation=int(sim["decimation"]),
            initial_state=_vector(sim["initial_state"], 6, "sim.initial_state"),
        )
    except ValueError as exc:
        raise ScenarioError(f"sim: {exc}") from exc


def load_scenario(ref: str, overrides: list[str] | None = None) -> Scenario:
    """Load and validate a scenario file or preset name."""
    path = resolve_scenario_path(str(ref))
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"{path}: YAML parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    known = {"vehicle", "gains", "fdi", "sim", "trajectory", "faults", "name"}
    unknown = set(raw) - known
    if unknown:
        raise ScenarioError(f"{path}: unknown sections {sorted(unknown)}")
    name = raw.pop("name", path.stem)
    if overrides:
        raw = apply_overrides(_merge(_defaults(), raw), list(overrides))
    return scenario_from_dict(raw, name=name)


def validate_scenario(ref: str, overrides: list[str] | None = None) -> list[str]:
    """Full schema and invariant check. Returns a list of violation
    messages (empty when the scenario is valid)."""
    try:
        load_scenario(ref, overrides)
    except ScenarioError as exc:
        return [str(exc)]
    except OSError as exc:
        return [f"cannot read scenario: {exc}"]
    return []
