"""YAML serialization of scenarios, strict in both directions.

Unknown keys are a hard error on parse; numbers round-trip exactly because
floats are written with repr precision.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import yaml

from tensekit.scenarios.model import (
    ActuationSpec,
    AnchorSpec,
    CableDecl,
    EndpointSpec,
    JointSpec,
    LoadSpec,
    MemberSpec,
    MotionSpec,
    NodeSpec,
    ProbeSpec,
    Scenario,
    ScenarioError,
    SolverSpec,
)

__all__ = ["parse_scenario", "serialize_scenario", "load_scenario_file"]


def _plain(value):
    """Convert to YAML-friendly plain python values."""
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if dataclasses.is_dataclass(value):
        return _dump_dataclass(value)
    return value


def _dump_dataclass(obj):
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if v is None:
            continue
        if isinstance(v, (list, tuple)) and not v and f.name != "nodes":
            continue
        out[f.name] = _plain(v)
    return out


def serialize_scenario(sc: Scenario) -> str:
    sc.validate()
    return yaml.safe_dump(_dump_dataclass(sc), sort_keys=False,
                          default_flow_style=None, width=100)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        sub = _NESTED.get((cls, f.name))
        if sub is not None and value is not None:
            if isinstance(sub, tuple):  # list of dataclasses
                inner = sub[0]
                value = [_build(inner, v, f"{where}.{f.name}[{k}]")
                         for k, v in enumerate(value)]
            else:
                value = _build(sub, value, f"{where}.{f.name}")
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


_NESTED = {
    (Scenario, "solver"): SolverSpec,
    (Scenario, "nodes"): (NodeSpec,),
    (Scenario, "anchors"): (AnchorSpec,),
    (Scenario, "members"): (MemberSpec,),
    (Scenario, "joints"): (JointSpec,),
    (Scenario, "cables"): (CableDecl,),
    (Scenario, "loads"): (LoadSpec,),
    (Scenario, "probes"): (ProbeSpec,),
    (NodeSpec, "motion"): MotionSpec,
    (AnchorSpec, "motion"): MotionSpec,
    (CableDecl, "a"): EndpointSpec,
    (CableDecl, "b"): EndpointSpec,
    (CableDecl, "actuation"): ActuationSpec,
    (JointSpec, "a"): EndpointSpec,
    (JointSpec, "b"): EndpointSpec,
}


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a mapping")
    sc = _build(Scenario, data, "scenario")
    sc.validate()
    return sc


def load_scenario_file(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
