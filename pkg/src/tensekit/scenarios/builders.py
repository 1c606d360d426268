"""Built-in scenarios: the two-member pendulum, the 2D class-3 tower and
the 3D deployable structure.

The built-ins are constructed as declarative scenarios, so they serialize
to files and round-trip through the parser like any user scenario.  Where
the published description fixes geometry only up to a drawing, the
reconstruction used here is documented next to the numbers.
"""

from __future__ import annotations

import numpy as np

from tensekit.forces import ForceModel, LoadSet
from tensekit.scenarios.model import (
    ActuationSpec,
    AnchorSpec,
    CableDecl,
    EndpointSpec,
    JointSpec,
    MemberSpec,
    MotionSpec,
    NodeSpec,
    ProbeSpec,
    Scenario,
    ScenarioError,
    SolverSpec,
    compile_scenario,
)
from tensekit.statics import inverse_rest_lengths

__all__ = ["builtin", "BUILTIN_NAMES", "DEFAULT_GRAVITY"]

DEFAULT_GRAVITY = 9.8

BUILTIN_NAMES = ("example1", "example2", "example3")


def builtin(name: str, **kwargs) -> Scenario:
    """Construct a built-in scenario by name."""
    if name == "example1":
        return example1(**kwargs)
    if name == "example2":
        return example2(**kwargs)
    if name == "example3":
        return example3(**kwargs)
    raise ScenarioError(f"unknown built-in scenario {name!r}; "
                        f"available: {', '.join(BUILTIN_NAMES)}")


# --------------------------------------------------------------------------
# example 1: double pendulum (rigid bar plus triangular plate)
# --------------------------------------------------------------------------

E1_BAR_MASS = 0.026934977798
E1_BAR_INERTIA = 1.1222907415833337e-5
E1_BAR_LENGTH = 0.07071067811865477
TRI_MASS = 0.1271425597
TRI_INERTIA = 7.063475538888889e-5
TRI_HEIGHT = 0.05

# initial angles from the downward vertical; the published drawing fixes
# them only graphically, this choice gives rich motion that the reference
# timestep still resolves
E1_THETA1 = 1.2
E1_THETA2 = 0.0


def _triangle_geometry(apex_first: bool):
    """Vertices of the isosceles right plate in its centroid frame."""
    h = TRI_HEIGHT
    verts = [[-h, -h / 3], [h, -h / 3], [0.0, 2 * h / 3]]
    if apex_first:
        verts = [verts[2], verts[0], verts[1]]
    return verts


def _triangle_member(mid, tag, nodes, apex_first, rotation_deg=None):
    verts = _triangle_geometry(apex_first)
    npts = {"ruv": 1, "rrv": 2, "rrr": 3}[tag]
    pts = verts[:npts]
    vecs = [[verts[k][0] - verts[0][0], verts[k][1] - verts[0][1]]
            for k in range(npts, 3)] or None
    return MemberSpec(id=mid, kind="body", tag=tag, mass_kg=TRI_MASS,
                      nodes=nodes, local_points_m=pts, local_vectors_m=vecs,
                      polar_inertia_kgm2=TRI_INERTIA,
                      rotation_deg=rotation_deg)


def example1(theta1: float = E1_THETA1, theta2: float = E1_THETA2,
             gravity: float = DEFAULT_GRAVITY, dt: float = 1e-3) -> Scenario:
    """Planar double pendulum: a bar pinned at the origin carrying a plate.

    The plate's apex rides the bar tip (shared basic point); in the plate
    template the centroid sits straight below the apex, so the placement
    rotation equals the second angle.
    """
    l1 = E1_BAR_LENGTH
    tip = [l1 * np.sin(theta1), -l1 * np.cos(theta1)]
    return Scenario(
        name="example1",
        dim=2,
        gravity_mps2=[0.0, -gravity],
        solver=SolverSpec(dt_s=dt),
        nodes=[
            NodeSpec(id="pivot", position_m=[0.0, 0.0], prescribed=True),
            NodeSpec(id="tip", position_m=[float(tip[0]), float(tip[1])]),
        ],
        members=[
            MemberSpec(id="bar", kind="bar", tag="rr", mass_kg=E1_BAR_MASS,
                       length_m=E1_BAR_LENGTH,
                       second_moment_kgm2=E1_BAR_INERTIA,
                       nodes=["pivot", "tip"]),
            _triangle_member("plate", "ruv", ["tip"], apex_first=True,
                             rotation_deg=float(np.rad2deg(theta2))),
        ],
        probes=[
            ProbeSpec(label="tip", member="bar", point_m=[E1_BAR_LENGTH / 2, 0.0]),
            ProbeSpec(label="plate_center", member="plate", center=True),
        ],
        outputs=["simulate"],
    ).validate()


# --------------------------------------------------------------------------
# example 2: three-level 2D class-3 tower
# --------------------------------------------------------------------------

E2_BAR_MASS = 0.026934977798
E2_BAR_INERTIA = 2.244581483166667e-5
E2_BAR_LENGTH = 0.1
E2_KAPPA = 100.0
E2_ETA_DAMPED = 0.1
E2_SEISMIC_AMPLITUDE = 0.01
E2_SEISMIC_HZ = 3.0
E2_AUX_SPREAD = 0.1      # ground anchor offset of the auxiliary cables
E2_SKIP_ATTACH = 0.15    # skip-cable tie point along the level-2 bar

E2_SETUPS = ("UN", "DN", "US", "US-AUX")


def example2(alpha: float | None = None, beta: float | None = None,
             setup: str | None = None, dt: float = 1e-3) -> Scenario:
    """The 2D tower: 4 bars, 3 plates, 12 cables, 5 degrees of freedom.

    Without ``setup`` this builds the bare pre-stressed structure used for
    modal analyses (no gravity, fixed ground, alpha = beta = 0.9 default).
    With a setup name (UN, DN, US, US-AUX) it builds the seismic scenario:
    gravity on, ground shaking at 3 Hz, alpha = 0.95 and beta = 0.998
    defaults, and the setup's constitutive variant.

    Reconstruction notes: the published drawing fixes the topology (pin
    joints, member tags) and the member dimensions but not the cable
    runs; here the two levels above the first plate carry verticals and
    crossing diagonals, the top plate is also guyed from the middle joint
    and from a tie point on the level-2 bar, and the auxiliary cables
    anchor just outboard of the bar pins.  This layout reproduces the
    reported stability trends with the loss of stability near
    alpha = beta = 0.845.
    """
    dynamic = setup is not None
    if dynamic and setup not in E2_SETUPS:
        raise ScenarioError(f"unknown example2 setup {setup!r}; "
                            f"choose from {E2_SETUPS}")
    alpha = (0.95 if dynamic else 0.9) if alpha is None else float(alpha)
    beta = (0.998 if dynamic else alpha) if beta is None else float(beta)
    eta = E2_ETA_DAMPED if setup == "DN" else 0.0
    allow_slack = setup in ("US", "US-AUX")
    h = TRI_HEIGHT
    ytop = E2_BAR_LENGTH  # bars vertical: plate-3 corners at this height

    motion = MotionSpec(kind="seismic", amplitude_m=E2_SEISMIC_AMPLITUDE,
                        frequency_hz=E2_SEISMIC_HZ, axis=[1.0, 0.0]) \
        if dynamic else None
    aux_motion = motion if (dynamic and setup != "US-AUX") else None

    nodes = [
        NodeSpec(id="g1", position_m=[-0.05, 0.0], prescribed=True,
                 motion=motion),
        NodeSpec(id="g2", position_m=[0.05, 0.0], prescribed=True,
                 motion=motion),
        NodeSpec(id="n3l", position_m=[-0.05, ytop]),
        NodeSpec(id="n2t", position_m=[0.05, ytop]),
        NodeSpec(id="j1", position_m=[0.0, ytop + h]),
        NodeSpec(id="j2", position_m=[0.0, ytop + h + E2_BAR_LENGTH]),
        NodeSpec(id="n5", position_m=[-0.05, ytop + E2_BAR_LENGTH]),
        NodeSpec(id="j3", position_m=[0.0, ytop + h + 2 * E2_BAR_LENGTH]),
        NodeSpec(id="n7a", position_m=[-0.05, ytop + 2 * E2_BAR_LENGTH]),
        NodeSpec(id="n7b", position_m=[0.05, ytop + 2 * E2_BAR_LENGTH]),
    ]
    anchors = [
        AnchorSpec(id="a1", position_m=[-E2_AUX_SPREAD, 0.0],
                   motion=aux_motion),
        AnchorSpec(id="a2", position_m=[E2_AUX_SPREAD, 0.0],
                   motion=aux_motion),
    ]

    def bar(mid, nodes_):
        return MemberSpec(id=mid, kind="bar", tag="rr", mass_kg=E2_BAR_MASS,
                          length_m=E2_BAR_LENGTH,
                          second_moment_kgm2=E2_BAR_INERTIA, nodes=nodes_)

    members = [
        bar("bar1", ["g1", "n3l"]),
        bar("bar2", ["g2", "n2t"]),
        bar("bar4", ["j1", "j2"]),
        bar("bar6", ["j2", "j3"]),
        _triangle_member("tri3", "ruv", ["n3l"], apex_first=False),
        _triangle_member("tri5", "rrv", ["j2", "n5"], apex_first=True),
        _triangle_member("tri7", "rrr", ["j3", "n7a", "n7b"], apex_first=True),
    ]
    joints = [
        JointSpec(a=EndpointSpec(member="bar2",
                                 point_m=[E2_BAR_LENGTH / 2, 0.0]),
                  b=EndpointSpec(member="tri3", point_m=[h, -h / 3])),
        JointSpec(a=EndpointSpec(member="bar4",
                                 point_m=[-E2_BAR_LENGTH / 2, 0.0]),
                  b=EndpointSpec(member="tri3", point_m=[0.0, 2 * h / 3])),
    ]

    corner_l = [-h, -h / 3]
    corner_r = [h, -h / 3]
    P = {
        "3l": ("tri3", corner_l), "3r": ("tri3", corner_r),
        "5l": ("tri5", corner_l), "5r": ("tri5", corner_r),
        "7l": ("tri7", corner_l), "7r": ("tri7", corner_r),
    }

    def member_end(key):
        member, pt = P[key]
        return EndpointSpec(member=member, point_m=list(pt))

    runs = [
        ("c1", EndpointSpec(anchor="a1"), member_end("3l")),
        ("c2", EndpointSpec(anchor="a2"), member_end("3r")),
        ("c3", member_end("3l"), member_end("5l")),
        ("c4", member_end("3r"), member_end("5r")),
        ("c5", member_end("3l"), member_end("5r")),
        ("c6", member_end("3r"), member_end("5l")),
        ("c7", member_end("5l"), member_end("7l")),
        ("c8", member_end("5r"), member_end("7r")),
        ("c9", EndpointSpec(member="bar4", coeffs=[1.0]), member_end("7l")),
        ("c10", EndpointSpec(member="bar4", coeffs=[1.0]), member_end("7r")),
        ("c11", EndpointSpec(member="bar4", coeffs=[E2_SKIP_ATTACH]),
         member_end("7l")),
        ("c12", EndpointSpec(member="bar4", coeffs=[E2_SKIP_ATTACH]),
         member_end("7r")),
    ]
    cables = [CableDecl(id=name, a=ea, b=eb, stiffness_npm=E2_KAPPA,
                        damping_nspm=eta, rest_length_m=1.0,
                        allow_slack=allow_slack)
              for name, ea, eb in runs]

    sc = Scenario(
        name="example2" + (f"-{setup}" if setup else ""),
        dim=2,
        gravity_mps2=[0.0, -DEFAULT_GRAVITY] if dynamic else None,
        solver=SolverSpec(dt_s=dt),
        nodes=nodes,
        anchors=anchors,
        members=members,
        joints=joints,
        cables=cables,
        probes=[ProbeSpec(label="tri3_center", member="tri3", center=True),
                ProbeSpec(label="tri7_center", member="tri7", center=True)],
        outputs=["simulate"] if dynamic else ["modal", "sweep"],
    )
    _set_rest_lengths_from_ratios(sc, alpha, beta, aux_names=("c1", "c2"))
    return sc.validate()


def _set_rest_lengths_from_ratios(sc: Scenario, alpha, beta, aux_names):
    """Rest lengths as ratios of the as-built cable lengths."""
    compiled = compile_scenario(sc)
    lengths = compiled.forces.cable_lengths(compiled.topology.q0)
    for decl, length in zip(sc.cables, lengths):
        ratio = beta if decl.id in aux_names else alpha
        decl.rest_length_m = float(ratio * length)


# --------------------------------------------------------------------------
# example 3: 3D deployable structure (two-stage prism plus tetra modules)
# --------------------------------------------------------------------------

E3_BAR_MASS = 0.08
E3_BAR_INERTIA = 0.00032266666666666663
E3_BAR_LENGTH = 0.22
TET_MASS = 0.2999233976
TET_ZG = 0.01482294206269047
TET_INERTIA = [7.6639282053e-04, 7.6638139752e-04, 1.2464720496e-03]
TET_R = 0.1
TET_H = 0.07071067811865477
E3_D = 0.03535533905932738
E3_STAGE = {
    "initial": dict(h=0.07071067811865477, r2=0.11),
    "target": dict(h=0.14142135623730953, r2=0.07),
}
E3_R1 = 0.1
E3_KAPPA_PRISM = 1000.0
E3_KAPPA_OTHER = 500.0
E3_ETA = 2.0
E3_FIXED_REST = {**{f"c{j}": 0.03 for j in (13, 14, 15, 19, 20, 21)},
                 **{f"c{j}": 0.1 for j in (16, 17, 18)}}

_AZIMUTHS = np.deg2rad([90.0, 210.0, 330.0])
# proper rotation turning the canonical apex-up tetrahedron upside down
_FLIP = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]
# local base-vertex index that lands on global azimuth slot i when flipped
_FLIP_SLOT = {0: 0, 1: 2, 2: 1}


def _ring(radius, z, azimuths=None):
    az = _AZIMUTHS if azimuths is None else azimuths
    return [[float(radius * np.cos(a)), float(radius * np.sin(a)), float(z)]
            for a in az]


def _tet_vertices_local():
    base = _ring(TET_R, -TET_ZG)
    apex = [0.0, 0.0, TET_H - TET_ZG]
    return base, apex


def _tet_member(mid, tag, nodes, flipped):
    base, apex = _tet_vertices_local()
    order = {"rrrr": base + [apex],
             "rrrw": [apex, base[0], base[1], base[2]],
             "rrvw": [apex, base[0], base[1], base[2]],
             "ruvw": [apex, base[0], base[1], base[2]]}[tag]
    npts = {"ruvw": 1, "rrvw": 2, "rrrw": 3, "rrrr": 4}[tag]
    pts = order[:npts]
    vecs = [[p[k] - order[0][k] for k in range(3)] for p in order[npts:]] \
        or None
    return MemberSpec(id=mid, kind="body", tag=tag, mass_kg=TET_MASS,
                      nodes=nodes, local_points_m=pts, local_vectors_m=vecs,
                      principal_inertia_kgm2=list(TET_INERTIA),
                      rotation=_FLIP if flipped else None)


def _tet_corner(member, flipped, az_slot):
    """Endpoint at a tetra base vertex picked by its global azimuth slot."""
    base, _ = _tet_vertices_local()
    local = base[_FLIP_SLOT[az_slot] if flipped else az_slot]
    return EndpointSpec(member=member, point_m=list(local))


def _tet_apex(member):
    _, apex = _tet_vertices_local()
    return EndpointSpec(member=member, point_m=list(apex))


def example3(stage: str = "initial", nu: float | None = None,
             t_deploy: float = 10.0, gravity: float = DEFAULT_GRAVITY,
             dt: float = 1e-3) -> Scenario:
    """The 3D structure: six-bar two-stage prism carrying four tetrahedra.

    ``stage`` is "initial", "target" or "deploy".  The prism twist has the
    same handedness in both stages, so the top ring sits two twist angles
    from the ground ring; the tetra modules interlock with gap d and
    azimuth-aligned rings, which reproduces the published rest lengths
    exactly.  Rest lengths are solved by inverse statics at build time
    with the published fixed values; in the deploy stage the prism cables
    (c1..c9) ramp linearly from their initial to their target solution.

    ``nu`` adds the seismic ground drive (Hz); the deploy stage defaults
    to 0.5 Hz.
    """
    if stage not in ("initial", "target", "deploy"):
        raise ScenarioError(f"unknown example3 stage {stage!r}")
    if stage == "deploy" and nu is None:
        nu = 0.5

    def geometry(stage_name):
        p = E3_STAGE[stage_name]
        h, r2 = p["h"], p["r2"]
        cosphi = (E3_R1 ** 2 + r2 ** 2 + h ** 2 - E3_BAR_LENGTH ** 2) \
            / (2 * E3_R1 * r2)
        phi = np.arccos(cosphi)
        return h, r2, phi

    base_stage = "initial" if stage != "target" else "target"
    h, r2, phi = geometry(base_stage)

    motion = MotionSpec(kind="seismic", amplitude_m=0.01,
                        frequency_hz=float(nu), axis=[1.0, 0.0, 0.0]) \
        if nu is not None else None

    nodes = []
    for i, pos in enumerate(_ring(E3_R1, 0.0)):
        nodes.append(NodeSpec(id=f"g{i}", position_m=pos, prescribed=True,
                              motion=motion))
    for i, pos in enumerate(_ring(r2, h, _AZIMUTHS + phi)):
        nodes.append(NodeSpec(id=f"m{i}", position_m=pos))
    for i, pos in enumerate(_ring(E3_R1, 2 * h, _AZIMUTHS + 2 * phi)):
        nodes.append(NodeSpec(id=f"t{i}", position_m=pos))

    # the upper stack rides the top ring, so its azimuth offset is 2 phi
    z7 = 2 * h
    z8 = z7 + TET_H - E3_D
    z9 = z8 + 2 * TET_H
    z10 = z9 - E3_D + TET_H
    ring8 = _ring(TET_R, z8, _AZIMUTHS + 2 * phi)
    ring9 = _ring(TET_R, z9, _AZIMUTHS + 2 * phi)
    nodes += [
        NodeSpec(id="apex7", position_m=[0.0, 0.0, z7 + TET_H]),
        NodeSpec(id="apex89", position_m=[0.0, 0.0, z8 + TET_H]),
        NodeSpec(id="n8a", position_m=ring8[0]),
        NodeSpec(id="n8b", position_m=ring8[1]),
        NodeSpec(id="n9a", position_m=ring9[0]),
        NodeSpec(id="apex10", position_m=[0.0, 0.0, z9 - E3_D]),
    ]

    def bar(mid, nodes_):
        return MemberSpec(id=mid, kind="bar", tag="rr", mass_kg=E3_BAR_MASS,
                          length_m=E3_BAR_LENGTH,
                          second_moment_kgm2=E3_BAR_INERTIA, nodes=nodes_)

    rot_stack = np.array([[np.cos(2 * phi), -np.sin(2 * phi), 0.0],
                          [np.sin(2 * phi), np.cos(2 * phi), 0.0],
                          [0.0, 0.0, 1.0]])
    rot_flip = rot_stack @ np.array(_FLIP)
    members = [bar(f"bar{i+1}", [f"g{i}", f"m{i}"]) for i in range(3)]
    members += [bar(f"bar{i+4}", [f"m{i}", f"t{i}"]) for i in range(3)]
    members += [
        _tet_member("tetra7", "rrrr", ["t0", "t1", "t2", "apex7"], False),
        _tet_member("tetra8", "rrrw", ["apex89", "n8a", "n8b"], False),
        _tet_member("tetra9", "rrvw", ["apex89", "n9a"], True),
        _tet_member("tetra10", "ruvw", ["apex10"], True),
    ]
    for m in members:
        if m.kind == "body":
            m.rotation = (rot_flip if m.rotation is not None
                          else rot_stack).tolist()

    def bar_end(name, which):
        x = 0.5 * E3_BAR_LENGTH * (1 if which == "top" else -1)
        return EndpointSpec(member=name, point_m=[x, 0.0, 0.0])

    runs = []
    # prism: stage-1 verticals, waist ring, stage-2 verticals
    for i in range(3):
        runs.append((f"c{1+i}", bar_end(f"bar{i+1}", "bottom"),
                     bar_end(f"bar{(i + 2) % 3 + 1}", "top"), E3_KAPPA_PRISM))
    for i in range(3):
        runs.append((f"c{4+i}", bar_end(f"bar{i+1}", "top"),
                     bar_end(f"bar{(i + 1) % 3 + 1}", "top"), E3_KAPPA_PRISM))
    for i in range(3):
        runs.append((f"c{7+i}", _tet_corner("tetra7", False, i),
                     bar_end(f"bar{(i + 1) % 3 + 4}", "bottom"),
                     E3_KAPPA_PRISM))
    # class-1 module between tetra 7 and tetra 8: inner then outer
    for i in range(3):
        runs.append((f"c{10+i}", _tet_apex("tetra7"),
                     _tet_corner("tetra8", False, i), E3_KAPPA_OTHER))
    for i in range(3):
        runs.append((f"c{13+i}", _tet_corner("tetra7", False, i),
                     _tet_corner("tetra8", False, i), E3_KAPPA_OTHER))
    # class-2 module between tetra 8 and tetra 9
    for i in range(3):
        runs.append((f"c{16+i}", _tet_corner("tetra8", False, i),
                     _tet_corner("tetra9", True, i), E3_KAPPA_OTHER))
    # class-1 module between tetra 9 and tetra 10: outer then inner
    for i in range(3):
        runs.append((f"c{19+i}", _tet_corner("tetra9", True, i),
                     _tet_corner("tetra10", True, i), E3_KAPPA_OTHER))
    for i in range(3):
        runs.append((f"c{22+i}", _tet_corner("tetra9", True, i),
                     _tet_apex("tetra10"), E3_KAPPA_OTHER))

    cables = [CableDecl(id=name, a=ea, b=eb, stiffness_npm=kappa,
                        damping_nspm=E3_ETA, rest_length_m=0.05)
              for name, ea, eb, kappa in runs]

    sc = Scenario(
        name=f"example3-{stage}",
        dim=3,
        gravity_mps2=[0.0, 0.0, -gravity],
        solver=SolverSpec(dt_s=dt),
        nodes=nodes,
        members=members,
        cables=cables,
        probes=[ProbeSpec(label=f"tetra{k}_center", member=f"tetra{k}",
                          center=True) for k in (7, 8, 9, 10)],
        outputs=["simulate"] if stage == "deploy" else
                ["check", "inverse-statics", "modal"],
        fixed_rest_lengths_m=dict(E3_FIXED_REST),
    )

    mu = _solved_rest_lengths(sc)
    if stage != "deploy":
        for decl in sc.cables:
            decl.rest_length_m = mu[decl.id]
        return sc.validate()

    # deploy: also solve the target state, ramp the prism cables
    target = example3("target", nu=None, gravity=gravity, dt=dt)
    mu_target = {d.id: d.rest_length_m for d in target.cables}
    for decl in sc.cables:
        idx = int(decl.id[1:])
        if idx <= 9:
            decl.rest_length_m = None
            decl.actuation = ActuationSpec(initial_m=mu[decl.id],
                                           target_m=mu_target[decl.id],
                                           duration_s=float(t_deploy))
        else:
            decl.rest_length_m = mu[decl.id]
    return sc.validate()


def _solved_rest_lengths(sc: Scenario) -> dict:
    """Inverse statics with the published fixed subset, as a name map."""
    compiled = compile_scenario(sc)
    result = inverse_rest_lengths(compiled.topology, compiled.forces,
                                  compiled.topology.q0, fixed=E3_FIXED_REST)
    return {c.name: float(m) for c, m in zip(compiled.forces.cables,
                                             result.mu)}
