"""Assembling rigid members into a constrained system.

Members are wired together by sharing global nodes (torqueless joints at
basic points) or by extrinsic point-coincidence constraints.  The global
coordinate vector stacks every node (m slots each) followed by every
member-owned base vector block.  Boundary conditions split the coordinates
into a prescribed part, driven by known functions of time, and a free part
solved by the statics and dynamics layers.  Selection between member and
system coordinates is implemented with index arrays, never with explicit
selection matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from tensekit.members import LocalPoint, MemberTemplate, constraint_pair as _constraint_pair

__all__ = [
    "SystemBuilder",
    "SystemTopology",
    "AssembledMember",
    "nullspace",
]

_RANK_TOL = 1e-10

Motion = Callable[[float], tuple]


@dataclass
class _NodeDecl:
    position: np.ndarray
    prescribed: bool = False
    motion: Motion | None = None
    is_anchor: bool = False
    owners: list = field(default_factory=list)  # (member_name, point slot)


@dataclass
class _MemberDecl:
    name: str
    template: MemberTemplate
    node_ids: tuple
    vectors: np.ndarray  # initial global base vector blocks, (nvec, m)


@dataclass
class _JointDecl:
    member_a: str
    point_a: LocalPoint
    member_b: str
    point_b: LocalPoint


class SystemBuilder:
    """Incremental construction of a :class:`SystemTopology`."""

    def __init__(self, dim: int):
        if dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        self.dim = dim
        self._nodes: list[_NodeDecl] = []
        self._members: dict[str, _MemberDecl] = {}
        self._joints: list[_JointDecl] = []

    def add_node(self, position) -> int:
        """Register a global node at its initial position; returns its id."""
        pos = np.asarray(position, dtype=float)
        if pos.shape != (self.dim,):
            raise ValueError(f"node position must have dimension {self.dim}")
        self._nodes.append(_NodeDecl(pos))
        return len(self._nodes) - 1

    def add_anchor(self, position, motion: Motion | None = None) -> int:
        """Prescribed ground point owned by no member (cable anchors)."""
        nid = self.add_node(position)
        decl = self._nodes[nid]
        decl.prescribed = True
        decl.motion = motion
        decl.is_anchor = True
        return nid

    def prescribe(self, node_id: int, motion: Motion | None = None):
        """Prescribe a node's coordinates.

        ``motion(t)`` must return position, velocity and acceleration arrays;
        ``None`` holds the node at its initial position.
        """
        decl = self._nodes[node_id]
        decl.prescribed = True
        decl.motion = motion

    def add_member(self, name: str, template: MemberTemplate,
                   nodes: Sequence[int], vectors=None, rotation=None) -> str:
        """Attach a member whose basic points live at the given global nodes.

        Initial base vector blocks come either from ``vectors`` (explicit
        global values) or from rotating the template's local vectors by
        ``rotation``.  The resulting member coordinates must satisfy the
        intrinsic rigidity constraints.
        """
        if name in self._members:
            raise ValueError(f"duplicate member name {name!r}")
        if template.dim != self.dim:
            raise ValueError(
                f"member {name!r} has dimension {template.dim}, system is {self.dim}D")
        ct = template.coord_type
        nodes = tuple(int(n) for n in nodes)
        if len(nodes) != ct.npoints:
            raise ValueError(
                f"member {name!r} (tag {ct.tag!r}) needs {ct.npoints} nodes, "
                f"got {len(nodes)}")
        if len(set(nodes)) != len(nodes):
            raise ValueError(f"member {name!r} assigns the same node twice")
        for n in nodes:
            if not 0 <= n < len(self._nodes):
                raise ValueError(f"member {name!r} references unknown node {n}")
            if self._nodes[n].is_anchor:
                raise ValueError(f"member {name!r} may not use anchor node {n}")

        nvec = ct.nblocks - ct.npoints
        if vectors is not None:
            vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
            if vecs.shape != (nvec, self.dim):
                raise ValueError(
                    f"member {name!r} needs {nvec} base vector blocks")
        elif nvec:
            R = np.eye(self.dim) if rotation is None else np.asarray(rotation, float)
            vecs = template.local_vectors @ R.T
        else:
            vecs = np.zeros((0, self.dim))

        decl = _MemberDecl(name, template, nodes, vecs)
        q_I = self._member_coords(decl)
        res = template.constraints(q_I)
        scale = max(np.abs(template.reference_products).max(), 1.0)
        if np.abs(res).max() > 1e-8 * scale:
            raise ValueError(
                f"member {name!r}: node placement violates rigidity "
                f"(residual {np.abs(res).max():.3e})")
        for slot, n in enumerate(nodes):
            self._nodes[n].owners.append((name, slot))
        self._members[name] = decl
        return name

    def add_joint(self, member_a: str, point_a, member_b: str, point_b):
        """Pin (2D) or ball (3D) joint forcing two material points to coincide."""
        ja = self._resolve_point(member_a, point_a)
        jb = self._resolve_point(member_b, point_b)
        self._joints.append(_JointDecl(member_a, ja, member_b, jb))

    def _resolve_point(self, member: str, point) -> LocalPoint:
        if member not in self._members:
            raise ValueError(f"unknown member {member!r}")
        if isinstance(point, LocalPoint):
            return point
        return self._members[member].template.local_coeffs(point)

    def _member_coords(self, decl: _MemberDecl) -> np.ndarray:
        q = np.empty(decl.template.ncoords)
        ct = decl.template.coord_type
        for i, n in enumerate(decl.node_ids):
            q[ct.block(i)] = self._nodes[n].position
        for k in range(len(decl.vectors)):
            q[ct.block(ct.npoints + k)] = decl.vectors[k]
        return q

    def assemble(self) -> "SystemTopology":
        if not self._members:
            raise ValueError("cannot assemble an empty system")
        return SystemTopology(self.dim, self._nodes, self._members,
                              self._joints)


@dataclass
class AssembledMember:
    """A member bound to the global coordinate layout."""

    name: str
    template: MemberTemplate
    node_ids: tuple
    sel: np.ndarray          # global index of each member coordinate
    free_local: np.ndarray   # member-coordinate positions that are free
    free_global: np.ndarray  # free-space column of each free member coordinate

    @property
    def is_fully_prescribed(self) -> bool:
        return self.free_local.size == 0


class _IntrinsicEntry:
    def __init__(self, member: AssembledMember, rows: np.ndarray, offset: int):
        self.member = member
        self.rows = rows          # kept constraint indices within the member
        self.offset = offset      # first row in the global residual
        self.size = rows.size
        out_rows = np.arange(offset, offset + self.size)
        self.jac_ix = np.ix_(out_rows, member.free_global)
        self.jac_loc = np.ix_(rows, member.free_local)
        self.jac_full_ix = np.ix_(out_rows, member.sel)


class _ExtrinsicEntry:
    def __init__(self, ma: AssembledMember, Ca, mb: AssembledMember, Cb, offset):
        self.ma, self.Ca = ma, Ca
        self.mb, self.Cb = mb, Cb
        self.offset = offset
        self.size = Ca.shape[0]
        out_rows = np.arange(offset, offset + self.size)
        self.jac_ix_a = np.ix_(out_rows, ma.free_global)
        self.jac_ix_b = np.ix_(out_rows, mb.free_global)
        self.Ca_free = Ca[:, ma.free_local]
        self.Cb_free = Cb[:, mb.free_local]
        self.jac_full_a = np.ix_(out_rows, ma.sel)
        self.jac_full_b = np.ix_(out_rows, mb.sel)


class SystemTopology:
    """Immutable assembled system: members, numbering, constraints, masses."""

    def __init__(self, dim, nodes, members, joints):
        self.dim = dim
        self._nodes = nodes
        self.node_positions = np.array([n.position for n in nodes])
        self.anchor_ids = tuple(i for i, n in enumerate(nodes) if n.is_anchor)

        # ---- global layout: node slots first, then member vector blocks ----
        self.n_nodes = len(nodes)
        self.node_slot = {i: np.arange(i * dim, (i + 1) * dim)
                          for i in range(self.n_nodes)}
        next_slot = self.n_nodes * dim
        self.members: list[AssembledMember] = []
        self._member_index: dict[str, int] = {}
        vec0 = {}
        for name, decl in members.items():
            ct = decl.template.coord_type
            nvec = ct.nblocks - ct.npoints
            vec0[name] = next_slot
            next_slot += nvec * dim
        self.n = next_slot

        prescribed_mask = np.zeros(self.n, dtype=bool)
        for i, nd in enumerate(nodes):
            if nd.prescribed:
                prescribed_mask[self.node_slot[i]] = True

        self.free_idx = np.flatnonzero(~prescribed_mask)
        self.presc_idx = np.flatnonzero(prescribed_mask)
        self.n_free = self.free_idx.size
        self.n_presc = self.presc_idx.size
        free_pos = np.full(self.n, -1, dtype=int)
        free_pos[self.free_idx] = np.arange(self.n_free)
        self._free_pos = free_pos

        q0 = np.zeros(self.n)
        for name, decl in members.items():
            ct = decl.template.coord_type
            sel = np.empty(decl.template.ncoords, dtype=int)
            for i, nid in enumerate(decl.node_ids):
                sel[ct.block(i)] = self.node_slot[nid]
            base = vec0[name]
            nvec = ct.nblocks - ct.npoints
            sel[ct.npoints * dim:] = np.arange(base, base + nvec * dim)
            fl = np.flatnonzero(~prescribed_mask[sel])
            member = AssembledMember(name, decl.template, decl.node_ids, sel,
                                     fl, free_pos[sel[fl]])
            self._member_index[name] = len(self.members)
            self.members.append(member)
            for i, nid in enumerate(decl.node_ids):
                q0[self.node_slot[nid]] = nodes[nid].position
            for k in range(len(decl.vectors)):
                q0[sel[ct.block(ct.npoints + k)]] = decl.vectors[k]
        for i, nd in enumerate(nodes):
            q0[self.node_slot[i]] = nd.position
        self.q0 = q0

        # ---- prescribed motion table ----
        cursor = {int(g): k for k, g in enumerate(self.presc_idx)}
        self._motions = []
        self._static_presc = np.zeros(self.n_presc)
        self._has_moving_boundary = False
        for i, nd in enumerate(nodes):
            if nd.prescribed:
                rows = np.array([cursor[int(s)] for s in self.node_slot[i]])
                self._static_presc[rows] = nd.position
                if nd.motion is not None:
                    self._motions.append((rows, nd.motion))
                    self._has_moving_boundary = True

        # ---- constraints (drop rows touching no free coordinate) ----
        self._intrinsic: list[_IntrinsicEntry] = []
        self._extrinsic: list[_ExtrinsicEntry] = []
        offset = 0
        for member in self.members:
            rows = self._kept_rows(member, prescribed_mask)
            if rows.size:
                self._intrinsic.append(_IntrinsicEntry(member, rows, offset))
                offset += rows.size
        self.n_dropped = sum(m.template.nconstraints for m in self.members) \
            - offset
        for joint in joints:
            ma = self.members[self._member_index[joint.member_a]]
            mb = self.members[self._member_index[joint.member_b]]
            Ca = ma.template.point_transform(joint.point_a)
            Cb = mb.template.point_transform(joint.point_b)
            support_free = (np.any(Ca[:, ma.free_local] != 0)
                            or np.any(Cb[:, mb.free_local] != 0))
            if support_free:
                self._extrinsic.append(_ExtrinsicEntry(ma, Ca, mb, Cb, offset))
                offset += dim
            else:
                self.n_dropped += dim
        self.n_constraints = offset

        # ---- constant mass matrices ----
        M = np.zeros((self.n, self.n))
        for member in self.members:
            M[np.ix_(member.sel, member.sel)] += member.template.mass_matrix
        self.mass_matrix = M
        self.mass_free = M[np.ix_(self.free_idx, self.free_idx)]
        self.mass_free_full = M[self.free_idx, :]
        self.mass_coupling = M[np.ix_(self.free_idx, self.presc_idx)]
        for arr in (self.mass_matrix, self.mass_free, self.mass_free_full,
                    self.mass_coupling, self.q0):
            arr.flags.writeable = False

    def _kept_rows(self, member: AssembledMember, prescribed_mask) -> np.ndarray:
        """Intrinsic rows that involve at least one free coordinate.

        The support of constraint (a, b) in native coordinates is the set of
        columns of the conversion matrix feeding the standard blocks a and b,
        which is independent of q.
        """
        tpl = member.template
        ct = tpl.coord_type
        Y = tpl.conversion
        keep = []
        free_in_member = ~prescribed_mask[member.sel]
        for k in range(tpl.nconstraints):
            a, b = _constraint_pair(ct, k)
            rows = np.r_[np.arange(ct.ncoords)[ct.block(a)],
                         np.arange(ct.ncoords)[ct.block(b)]]
            support = np.any(Y[rows] != 0, axis=0)
            if np.any(support & free_in_member):
                keep.append(k)
        return np.asarray(keep, dtype=int)

    # -- member lookup -------------------------------------------------------

    def member(self, name: str) -> AssembledMember:
        return self.members[self._member_index[name]]

    def member_names(self):
        return [m.name for m in self.members]

    # -- coordinate bookkeeping ------------------------------------------------

    def split(self, q):
        q = np.asarray(q)
        return q[self.presc_idx], q[self.free_idx]

    def free(self, q):
        return np.asarray(q)[self.free_idx]

    def compose(self, q_free, q_presc) -> np.ndarray:
        q = np.empty(self.n)
        q[self.free_idx] = q_free
        q[self.presc_idx] = q_presc
        return q

    def boundary_state(self, t: float):
        """Prescribed positions, velocities and accelerations at time t."""
        pos = self._static_presc.copy()
        vel = np.zeros(self.n_presc)
        acc = np.zeros(self.n_presc)
        for rows, motion in self._motions:
            p, v, a = motion(t)
            pos[rows] = p
            vel[rows] = v
            acc[rows] = a
        return pos, vel, acc

    def full_coords(self, q_free, t: float) -> np.ndarray:
        pos, _, _ = self.boundary_state(t)
        return self.compose(q_free, pos)

    # -- constraints -------------------------------------------------------------

    def constraint_residual(self, q) -> np.ndarray:
        res = np.empty(self.n_constraints)
        for e in self._intrinsic:
            res[e.offset:e.offset + e.size] = \
                e.member.template.constraints(q[e.member.sel])[e.rows]
        for e in self._extrinsic:
            res[e.offset:e.offset + e.size] = \
                e.Ca @ q[e.ma.sel] - e.Cb @ q[e.mb.sel]
        return res

    def constraint_jacobian(self, q) -> np.ndarray:
        """Jacobian of the retained constraints w.r.t. the free coordinates."""
        A = np.zeros((self.n_constraints, self.n_free))
        for e in self._intrinsic:
            member = e.member
            J = member.template.constraint_jacobian(q[member.sel])
            A[e.jac_ix] = J[e.jac_loc]
        for e in self._extrinsic:
            A[e.jac_ix_a] += e.Ca_free
            A[e.jac_ix_b] -= e.Cb_free
        return A

    def constraint_residual_and_jacobian(self, q):
        return self.constraint_residual(q), self.constraint_jacobian(q)

    def constraint_jacobian_full(self, q) -> np.ndarray:
        """Jacobian w.r.t. all coordinates (used for velocity consistency checks)."""
        A = np.zeros((self.n_constraints, self.n))
        for e in self._intrinsic:
            member = e.member
            J = member.template.constraint_jacobian(q[member.sel])
            A[e.jac_full_ix] += J[e.rows]
        for e in self._extrinsic:
            A[e.jac_full_a] += e.Ca
            A[e.jac_full_b] -= e.Cb
        return A

    def geometric_stiffness(self, lam) -> np.ndarray:
        """Assembles d(A^T lam)/dq_free from the constant constraint Hessians."""
        K = np.zeros((self.n_free, self.n_free))
        lam = np.asarray(lam)
        for e in self._intrinsic:
            member = e.member
            ix = np.ix_(member.free_local, member.free_local)
            gx = np.ix_(member.free_global, member.free_global)
            for j, k in enumerate(e.rows):
                K[gx] += lam[e.offset + j] * member.template.intrinsic_hessian(k)[ix]
        # extrinsic constraints are linear: zero Hessian
        return K

    # -- derived quantities -----------------------------------------------------

    def nullspace(self, q=None, jacobian=None) -> np.ndarray:
        A = self.constraint_jacobian(self.q0 if q is None else q) \
            if jacobian is None else jacobian
        return nullspace(A)

    def dof(self, q=None) -> int:
        A = self.constraint_jacobian(self.q0 if q is None else q)
        if A.size == 0:
            return self.n_free
        return self.n_free - np.linalg.matrix_rank(A, tol=_RANK_TOL * _spectral(A))

    def project_to_constraints(self, q, tol: float = 1e-12,
                               max_iter: int = 20) -> np.ndarray:
        """Minimum-norm correction of the free coordinates onto Phi = 0.

        Gauss-Newton with the pseudoinverse step; prescribed coordinates are
        left untouched.  Useful to clean up perturbed configurations (for
        example modal offsets) before starting a simulation.
        """
        q = np.asarray(q, float).copy()
        for _ in range(max_iter):
            phi = self.constraint_residual(q)
            if not phi.size or np.abs(phi).max() <= tol:
                return q
            A = self.constraint_jacobian(q)
            step, *_ = np.linalg.lstsq(A, -phi, rcond=None)
            q[self.free_idx] += step
        raise RuntimeError(
            f"constraint projection did not converge "
            f"(|Phi|_inf = {np.abs(phi).max():.3e})")

    def point_matrix(self, member_name: str, point) -> np.ndarray:
        """Global m x n matrix picking a material point's position: r = P q."""
        member = self.member(member_name)
        if not isinstance(point, LocalPoint):
            point = member.template.local_coeffs(point)
        C = member.template.point_transform(point)
        P = np.zeros((self.dim, self.n))
        P[:, member.sel] = C
        return P

    def anchor_matrix(self, anchor_id: int) -> np.ndarray:
        if anchor_id not in self.anchor_ids:
            raise ValueError(f"node {anchor_id} is not an anchor")
        P = np.zeros((self.dim, self.n))
        P[np.arange(self.dim), self.node_slot[anchor_id]] = 1.0
        return P


def _spectral(A):
    return np.linalg.norm(A, 2) if A.size else 0.0


def nullspace(A: np.ndarray, rank_tol: float = _RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the nullspace of A via singular value decomposition."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        n = A.shape[1] if A.ndim == 2 else 0
        return np.eye(n)
    u, s, vh = np.linalg.svd(A)
    cutoff = rank_tol * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    return vh[rank:].T.copy()
