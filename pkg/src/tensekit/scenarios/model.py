"""Declarative scenario description and its compilation to runtime objects.

A scenario is a plain data tree (nodes, members, joints, cables, loads,
solver settings) with SI units spelled out in the key names.  It can be
serialized to and parsed from YAML, and compiled into the assembled
topology plus force model used by the solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields
from typing import Optional

import numpy as np

from tensekit.assembly import SystemBuilder, SystemTopology
from tensekit.forces import (
    AnchorPoint,
    CableSpec,
    ConcentratedLoad,
    ForceModel,
    LoadSet,
    MemberPoint,
)
from tensekit.integrator import SolverSettings
from tensekit.members import LocalPoint, bar_template, body_template
from tensekit.scenarios.drives import ActuationProfile, SeismicDrive

__all__ = [
    "Scenario",
    "ScenarioError",
    "compile_scenario",
    "CompiledScenario",
]

OUTPUT_KINDS = ("simulate", "modal", "inverse-statics", "sweep", "check")


class ScenarioError(ValueError):
    """Malformed scenario content (unknown keys, dangling references...)."""


@dataclass
class MotionSpec:
    kind: str
    amplitude_m: float
    frequency_hz: float
    axis: list

    def validate(self, dim, where):
        if self.kind != "seismic":
            raise ScenarioError(f"{where}: unknown motion kind {self.kind!r}")
        if len(self.axis) != dim:
            raise ScenarioError(f"{where}: motion axis must have {dim} entries")


@dataclass
class NodeSpec:
    id: str
    position_m: list
    prescribed: bool = False
    motion: Optional[MotionSpec] = None


@dataclass
class AnchorSpec:
    id: str
    position_m: list
    motion: Optional[MotionSpec] = None


@dataclass
class MemberSpec:
    id: str
    kind: str                       # bar | body
    tag: str
    mass_kg: float
    nodes: list
    length_m: Optional[float] = None
    second_moment_kgm2: Optional[float] = None
    local_points_m: Optional[list] = None
    local_vectors_m: Optional[list] = None
    polar_inertia_kgm2: Optional[float] = None
    principal_inertia_kgm2: Optional[list] = None
    rotation_deg: Optional[float] = None
    rotation: Optional[list] = None
    vectors_m: Optional[list] = None


@dataclass
class EndpointSpec:
    member: Optional[str] = None
    anchor: Optional[str] = None
    coeffs: Optional[list] = None
    point_m: Optional[list] = None

    def validate(self, where, allow_anchor=True):
        if (self.member is None) == (self.anchor is None):
            raise ScenarioError(
                f"{where}: exactly one of 'member' or 'anchor' is required")
        if self.anchor is not None and not allow_anchor:
            raise ScenarioError(f"{where}: anchors are not allowed here")
        if self.member is not None and (self.coeffs is None) == (self.point_m is None):
            raise ScenarioError(
                f"{where}: a member endpoint needs exactly one of 'coeffs' "
                f"or 'point_m'")


@dataclass
class ActuationSpec:
    initial_m: float
    target_m: float
    duration_s: float


@dataclass
class CableDecl:
    id: str
    a: EndpointSpec
    b: EndpointSpec
    stiffness_npm: float
    damping_nspm: float = 0.0
    rest_length_m: Optional[float] = None
    actuation: Optional[ActuationSpec] = None
    allow_slack: bool = True


@dataclass
class JointSpec:
    a: EndpointSpec
    b: EndpointSpec


@dataclass
class LoadSpec:
    member: str
    force_n: list
    coeffs: Optional[list] = None
    point_m: Optional[list] = None


@dataclass
class ProbeSpec:
    label: str
    member: str
    coeffs: Optional[list] = None
    point_m: Optional[list] = None
    center: bool = False


@dataclass
class SolverSpec:
    dt_s: float = 1e-3
    tol: float = 1e-10
    max_iter: int = 20


@dataclass
class Scenario:
    """Declarative description of one structure plus its analysis setup."""

    name: str
    dim: int
    gravity_mps2: Optional[list] = None
    solver: SolverSpec = field(default_factory=SolverSpec)
    anchors: list = field(default_factory=list)       # [AnchorSpec]
    nodes: list = field(default_factory=list)         # [NodeSpec]
    members: list = field(default_factory=list)       # [MemberSpec]
    joints: list = field(default_factory=list)        # [JointSpec]
    cables: list = field(default_factory=list)        # [CableDecl]
    loads: list = field(default_factory=list)         # [LoadSpec]
    probes: list = field(default_factory=list)        # [ProbeSpec]
    outputs: list = field(default_factory=list)
    # rest lengths held fixed when re-solving inverse statics (cable -> m)
    fixed_rest_lengths_m: dict = field(default_factory=dict)

    def validate(self):
        if self.dim not in (2, 3):
            raise ScenarioError(f"dim must be 2 or 3, got {self.dim}")
        node_ids = [n.id for n in self.nodes]
        anchor_ids = [a.id for a in self.anchors]
        member_ids = [m.id for m in self.members]
        for name, ids in (("node", node_ids), ("anchor", anchor_ids),
                          ("member", member_ids), ("cable", [c.id for c in self.cables])):
            dupes = {i for i in ids if ids.count(i) > 1}
            if dupes:
                raise ScenarioError(f"duplicate {name} ids: {sorted(dupes)}")
        if set(node_ids) & set(anchor_ids):
            raise ScenarioError("node and anchor ids must not overlap")
        known_nodes = set(node_ids)
        for m in self.members:
            if m.kind not in ("bar", "body"):
                raise ScenarioError(f"member {m.id!r}: kind must be bar or body")
            for n in m.nodes:
                if n not in known_nodes:
                    raise ScenarioError(
                        f"member {m.id!r} references unknown node {n!r}")
        known_members = set(member_ids)
        known_anchors = set(anchor_ids)

        def check_endpoint(ep, where, allow_anchor=True):
            ep.validate(where, allow_anchor)
            if ep.member is not None and ep.member not in known_members:
                raise ScenarioError(f"{where}: unknown member {ep.member!r}")
            if ep.anchor is not None and ep.anchor not in known_anchors:
                raise ScenarioError(f"{where}: unknown anchor {ep.anchor!r}")

        for c in self.cables:
            check_endpoint(c.a, f"cable {c.id!r} endpoint a")
            check_endpoint(c.b, f"cable {c.id!r} endpoint b")
            if (c.rest_length_m is None) == (c.actuation is None):
                raise ScenarioError(
                    f"cable {c.id!r}: exactly one of 'rest_length_m' or "
                    f"'actuation' is required")
        for k, j in enumerate(self.joints):
            check_endpoint(j.a, f"joint {k} endpoint a", allow_anchor=False)
            check_endpoint(j.b, f"joint {k} endpoint b", allow_anchor=False)
        for load in self.loads:
            if load.member not in known_members:
                raise ScenarioError(
                    f"load references unknown member {load.member!r}")
            if (load.coeffs is None) == (load.point_m is None):
                raise ScenarioError(
                    "load needs exactly one of 'coeffs' or 'point_m'")
        for p in self.probes:
            if p.member not in known_members:
                raise ScenarioError(
                    f"probe {p.label!r} references unknown member {p.member!r}")
            picks = sum(x is not None for x in (p.coeffs, p.point_m)) + p.center
            if picks != 1:
                raise ScenarioError(
                    f"probe {p.label!r} needs exactly one of 'coeffs', "
                    f"'point_m' or 'center: true'")
        for out in self.outputs:
            if out not in OUTPUT_KINDS:
                raise ScenarioError(f"unknown output kind {out!r}")
        cable_ids = {c.id for c in self.cables}
        for name in self.fixed_rest_lengths_m:
            if name not in cable_ids:
                raise ScenarioError(
                    f"fixed rest length for unknown cable {name!r}")
        if self.gravity_mps2 is not None and len(self.gravity_mps2) != self.dim:
            raise ScenarioError(f"gravity must have {self.dim} components")
        return self


@dataclass
class CompiledScenario:
    scenario: Scenario
    topology: SystemTopology
    forces: ForceModel
    settings: SolverSettings
    probes: list       # [(label, m x n matrix)]
    node_index: dict
    anchor_index: dict


def _member_template(spec: MemberSpec, dim: int):
    if spec.kind == "bar":
        if spec.length_m is None:
            raise ScenarioError(f"member {spec.id!r}: bars need length_m")
        for bad in ("local_points_m", "local_vectors_m", "polar_inertia_kgm2",
                    "principal_inertia_kgm2"):
            if getattr(spec, bad) is not None:
                raise ScenarioError(
                    f"member {spec.id!r}: {bad} is not a bar field")
        return bar_template(dim, spec.mass_kg, spec.length_m,
                            spec.second_moment_kgm2, tag=spec.tag,
                            name=spec.id)
    if spec.local_points_m is None:
        raise ScenarioError(f"member {spec.id!r}: bodies need local_points_m")
    if dim == 2:
        if spec.polar_inertia_kgm2 is None:
            raise ScenarioError(
                f"member {spec.id!r}: 2D bodies need polar_inertia_kgm2")
        inertia = spec.polar_inertia_kgm2
    else:
        if spec.principal_inertia_kgm2 is None:
            raise ScenarioError(
                f"member {spec.id!r}: 3D bodies need principal_inertia_kgm2")
        inertia = spec.principal_inertia_kgm2
    return body_template(spec.tag, spec.mass_kg, spec.local_points_m,
                         spec.local_vectors_m, inertia=inertia, name=spec.id)


def _member_rotation(spec: MemberSpec, dim: int):
    if spec.rotation is not None and spec.rotation_deg is not None:
        raise ScenarioError(
            f"member {spec.id!r}: give rotation or rotation_deg, not both")
    if spec.rotation_deg is not None:
        if dim != 2:
            raise ScenarioError(
                f"member {spec.id!r}: rotation_deg is for 2D scenarios")
        a = np.deg2rad(spec.rotation_deg)
        return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    if spec.rotation is not None:
        R = np.asarray(spec.rotation, dtype=float)
        if R.shape != (dim, dim):
            raise ScenarioError(f"member {spec.id!r}: rotation must be "
                                f"{dim}x{dim}")
        if np.abs(R @ R.T - np.eye(dim)).max() > 1e-8 or np.linalg.det(R) < 0:
            raise ScenarioError(
                f"member {spec.id!r}: rotation must be a proper rotation")
        return R
    return None


def _local_point(template, coeffs, point_m, where):
    if coeffs is not None:
        return LocalPoint(coeffs)
    try:
        return template.local_coeffs(point_m)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def compile_scenario(sc: Scenario) -> CompiledScenario:
    """Assemble the runtime topology and force model from the description."""
    sc.validate()
    b = SystemBuilder(sc.dim)
    node_index = {}
    anchor_index = {}
    for n in sc.nodes:
        motion = None
        if n.motion is not None:
            n.motion.validate(sc.dim, f"node {n.id!r}")
            motion = SeismicDrive(n.motion.amplitude_m, n.motion.frequency_hz,
                                  tuple(n.motion.axis)).motion_for(n.position_m)
        node_index[n.id] = b.add_node(n.position_m)
        if n.prescribed or n.motion is not None:
            b.prescribe(node_index[n.id], motion)
    for a in sc.anchors:
        motion = None
        if a.motion is not None:
            a.motion.validate(sc.dim, f"anchor {a.id!r}")
            motion = SeismicDrive(a.motion.amplitude_m, a.motion.frequency_hz,
                                  tuple(a.motion.axis)).motion_for(a.position_m)
        anchor_index[a.id] = b.add_anchor(a.position_m, motion)

    templates = {}
    for m in sc.members:
        tpl = _member_template(m, sc.dim)
        templates[m.id] = tpl
        try:
            b.add_member(m.id, tpl, [node_index[n] for n in m.nodes],
                         vectors=m.vectors_m, rotation=_member_rotation(m, sc.dim))
        except ValueError as exc:
            raise ScenarioError(f"member {m.id!r}: {exc}") from None

    for k, j in enumerate(sc.joints):
        pa = _local_point(templates[j.a.member], j.a.coeffs, j.a.point_m,
                          f"joint {k} endpoint a")
        pb = _local_point(templates[j.b.member], j.b.coeffs, j.b.point_m,
                          f"joint {k} endpoint b")
        b.add_joint(j.a.member, pa, j.b.member, pb)

    topo = b.assemble()

    def endpoint(ep: EndpointSpec, where):
        if ep.anchor is not None:
            return AnchorPoint(anchor_index[ep.anchor])
        pt = _local_point(templates[ep.member], ep.coeffs, ep.point_m, where)
        return MemberPoint(ep.member, pt)

    cables = []
    for c in sc.cables:
        rest = (c.rest_length_m if c.actuation is None
                else ActuationProfile(c.actuation.initial_m,
                                      c.actuation.target_m,
                                      c.actuation.duration_s))
        cables.append(CableSpec(
            c.id, endpoint(c.a, f"cable {c.id!r} endpoint a"),
            endpoint(c.b, f"cable {c.id!r} endpoint b"),
            stiffness=c.stiffness_npm, damping=c.damping_nspm,
            rest_length=rest, allow_slack=c.allow_slack))

    loads = [ConcentratedLoad(
        load.member,
        _local_point(templates[load.member], load.coeffs, load.point_m, "load"),
        load.force_n) for load in sc.loads]
    forces = ForceModel(topo, cables, LoadSet(gravity=sc.gravity_mps2,
                                              concentrated=loads))

    probes = []
    for p in sc.probes:
        tpl = templates[p.member]
        if p.center:
            pt = LocalPoint(tpl.center_coeffs)
        else:
            pt = _local_point(tpl, p.coeffs, p.point_m, f"probe {p.label!r}")
        probes.append((p.label, topo.point_matrix(p.member, pt)))

    settings = SolverSettings(dt=sc.solver.dt_s, tol=sc.solver.tol,
                              max_iter=sc.solver.max_iter)
    return CompiledScenario(sc, topo, forces, settings, probes,
                            node_index, anchor_index)
