"""Rigid members (bodies and bars) described by natural coordinates.

A rigid member is parametrized by basic points fixed on the member and by
base vectors attached to it, all expressed in the global frame.  Depending
on how many of the slots are points versus vectors, the coordinate vector
of one member comes in several interchangeable flavors ("tags"):

* 3D rigid body (12 coordinates): ``ruvw``, ``rrvw``, ``rrrw``, ``rrrr``
* 2D rigid body (6 coordinates):  ``ruv``, ``rrv``, ``rrr``
* rigid bar, 2D or 3D (2m coords): ``ru``, ``rr``

Non-standard tags convert to the standard one (``ruvw``/``ruv``/``ru``) by a
constant matrix, so every derived quantity (point transforms, constraints,
mass matrices) is built once for the standard form and mapped through that
conversion.  Rigidity is enforced by quadratic constraints that freeze the
dot products of the base vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CoordType",
    "LocalPoint",
    "MemberTemplate",
    "bar_template",
    "body_template",
    "conversion_matrix",
    "to_standard",
    "point_transform",
    "local_coeffs",
    "intrinsic_constraints",
    "intrinsic_jacobian",
    "mass_matrix",
    "placed_coords",
    "rigid_velocity",
]

BODY_3D_TAGS = ("ruvw", "rrvw", "rrrw", "rrrr")
BODY_2D_TAGS = ("ruv", "rrv", "rrr")
BAR_TAGS = ("ru", "rr")
ALL_TAGS = BODY_3D_TAGS + BODY_2D_TAGS + BAR_TAGS

# Number of leading blocks of the native coordinate vector that are basic
# points (the remaining blocks are base vectors).
_NPOINTS = {
    "ruvw": 1, "rrvw": 2, "rrrw": 3, "rrrr": 4,
    "ruv": 1, "rrv": 2, "rrr": 3,
    "ru": 1, "rr": 2,
}

# Small per-block conversion matrices: q_std = (S otimes I_m) q_native.
_CONVERSION_BLOCKS = {
    "ruvw": np.eye(4),
    "rrvw": np.array([[1., 0, 0, 0], [-1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]),
    "rrrw": np.array([[1., 0, 0, 0], [-1, 1, 0, 0], [-1, 0, 1, 0], [0, 0, 0, 1]]),
    "rrrr": np.array([[1., 0, 0, 0], [-1, 1, 0, 0], [-1, 0, 1, 0], [-1, 0, 0, 1]]),
    "ruv": np.eye(3),
    "rrv": np.array([[1., 0, 0], [-1, 1, 0], [0, 0, 1]]),
    "rrr": np.array([[1., 0, 0], [-1, 1, 0], [-1, 0, 1]]),
    "ru": np.eye(2),
    "rr": np.array([[1., 0], [-1, 1]]),
}

# Intrinsic constraints as dot products between standard base vectors,
# indexed 1=u, 2=v, 3=w.  The order follows the constraint stacks used for
# 3D bodies, 2D bodies and bars.
_CONSTRAINT_PAIRS = {
    3: [(1, 1), (2, 2), (3, 3), (2, 3), (1, 3), (1, 2)],
    2: [(1, 1), (2, 2), (1, 2)],
    1: [(1, 1)],
}

_PAIR_LABELS = {(1, 1): "u.u", (2, 2): "v.v", (3, 3): "w.w",
                (2, 3): "v.w", (1, 3): "u.w", (1, 2): "u.v"}

_DET_TOL = 1e-10
_PINV_CUTOFF = 1e-12


@dataclass(frozen=True)
class CoordType:
    """Coordinate flavor of one rigid member: tag plus spatial dimension."""

    tag: str
    dim: int

    def __post_init__(self):
        if self.tag not in ALL_TAGS:
            raise ValueError(f"unknown coordinate tag {self.tag!r}")
        if self.dim not in (2, 3):
            raise ValueError(f"spatial dimension must be 2 or 3, got {self.dim}")
        if self.tag in BODY_3D_TAGS and self.dim != 3:
            raise ValueError(f"tag {self.tag!r} requires dim=3")
        if self.tag in BODY_2D_TAGS and self.dim != 2:
            raise ValueError(f"tag {self.tag!r} requires dim=2")

    @property
    def is_bar(self) -> bool:
        return self.tag in BAR_TAGS

    @property
    def nblocks(self) -> int:
        """Number of m-sized blocks in the coordinate vector (1 + base vectors)."""
        return 1 + self.nvectors

    @property
    def nvectors(self) -> int:
        """Number of base vectors of the standard form (3, 2 or 1)."""
        if self.tag in BODY_3D_TAGS:
            return 3
        if self.tag in BODY_2D_TAGS:
            return 2
        return 1

    @property
    def npoints(self) -> int:
        """Number of basic points in the native tag."""
        return _NPOINTS[self.tag]

    @property
    def ncoords(self) -> int:
        return self.nblocks * self.dim

    @property
    def nconstraints(self) -> int:
        return len(_CONSTRAINT_PAIRS[self.nvectors])

    @property
    def dof(self) -> int:
        return self.ncoords - self.nconstraints

    def block(self, i: int) -> slice:
        """Slice of the i-th m-sized block of the coordinate vector."""
        return slice(i * self.dim, (i + 1) * self.dim)


def conversion_matrix(coord_type: CoordType) -> np.ndarray:
    """Constant matrix Y mapping native coordinates to the standard tag."""
    return np.kron(_CONVERSION_BLOCKS[coord_type.tag], np.eye(coord_type.dim))


def constraint_pair(coord_type: CoordType, k: int) -> tuple:
    """Standard block indices (1=u, 2=v, 3=w) of the k-th intrinsic constraint."""
    return _CONSTRAINT_PAIRS[coord_type.nvectors][k]


def to_standard(q, coord_type: CoordType) -> np.ndarray:
    """Convert a native coordinate vector to the standard tag (Y q)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (coord_type.ncoords,):
        raise ValueError(
            f"expected coordinate vector of length {coord_type.ncoords}, "
            f"got shape {q.shape}")
    if coord_type.tag in ("ruvw", "ruv", "ru"):
        return q.copy()
    return conversion_matrix(coord_type) @ q


@dataclass(frozen=True)
class LocalPoint:
    """A material point fixed on a member, as affine coefficients c.

    The global position is r = r_i + X c where X stacks the member's base
    vectors, so ``coeffs`` has one entry per base vector of the standard
    form (3 for 3D bodies, 2 for 2D bodies, 1 for bars).
    """

    coeffs: tuple

    def __init__(self, coeffs):
        arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if arr.ndim != 1:
            raise ValueError("local point coefficients must be a flat vector")
        object.__setattr__(self, "coeffs", tuple(arr.tolist()))

    def as_array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=float)


def _pinv(x: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse with a relative singular value cutoff."""
    return np.linalg.pinv(x, rcond=_PINV_CUTOFF)


class MemberTemplate:
    """Immutable description of one rigid member in its local frame.

    The local frame has its origin at the mass center and, for bodies, its
    axes along the principal axes of inertia; for bars the local x axis is
    the longitudinal one.  ``local_points`` are the basic points of the
    native tag, ``local_vectors`` the native base vector blocks, both in the
    local frame.  ``inertia`` is the principal inertia data:

    * 3D body: the three principal moments of inertia (or a diagonal 3x3),
    * 2D body: the polar moment of inertia I_z,
    * bar: the axial second moment of mass (m L^2 / 12 for a uniform bar).

    For 2D bodies the split of I_z between the two in-plane directions does
    not influence the constrained motion (only the traced value enters the
    kinetic energy of rigid velocities), so it is taken even internally;
    Lagrange multiplier values do depend on that internal choice.
    """

    def __init__(self, coord_type: CoordType, mass: float, local_points,
                 local_vectors=None, inertia=None, name: str | None = None):
        self.coord_type = coord_type
        self.name = name
        m = coord_type.dim
        self.mass = float(mass)
        if not self.mass > 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")

        pts = np.atleast_2d(np.asarray(local_points, dtype=float))
        if pts.shape != (coord_type.npoints, m):
            raise ValueError(
                f"tag {coord_type.tag!r} needs {coord_type.npoints} local "
                f"points of dimension {m}, got shape {pts.shape}")
        nvec_native = coord_type.nblocks - coord_type.npoints
        if nvec_native:
            vecs = np.atleast_2d(np.asarray(local_vectors, dtype=float))
            if vecs.shape != (nvec_native, m):
                raise ValueError(
                    f"tag {coord_type.tag!r} needs {nvec_native} local base "
                    f"vectors of dimension {m}, got shape {vecs.shape}")
        else:
            if local_vectors is not None and len(np.atleast_2d(local_vectors)):
                raise ValueError(f"tag {coord_type.tag!r} takes no base vectors")
            vecs = np.zeros((0, m))
        self.local_points = pts
        self.local_vectors = vecs

        # Standard-form base matrix Xbar: k-th standard vector is either the
        # difference of native points or a native vector block.
        cols = []
        for k in range(1, coord_type.nvectors + 1):
            if k + 1 <= coord_type.npoints:
                cols.append(pts[k] - pts[0])
            else:
                cols.append(vecs[k + 1 - coord_type.npoints - 1])
        self.base_matrix = np.column_stack(cols)
        self._validate_base()

        self.base_pinv = _pinv(self.base_matrix)
        self.jbar = self._build_jbar(inertia)
        self.conversion = conversion_matrix(coord_type)

        pairs = _CONSTRAINT_PAIRS[coord_type.nvectors]
        self.reference_products = np.array(
            [self.base_matrix[:, a - 1] @ self.base_matrix[:, b - 1]
             for a, b in pairs])
        self.constraint_labels = tuple(_PAIR_LABELS[p] for p in pairs)
        self._pair_a = np.array([a for a, _ in pairs])
        self._pair_b = np.array([b for _, b in pairs])
        self._is_std = coord_type.tag in ("ruvw", "ruv", "ru")
        # plain ints and index caches for the evaluation hot path
        self._m = coord_type.dim
        self._nb = coord_type.nblocks
        self._nc = len(pairs)
        self._ncoords = coord_type.ncoords
        self._jac_rows = np.arange(self._nc)

        self.center_coeffs = -self.base_pinv @ pts[0]
        self.mass_matrix_std = self._build_mass_matrix_std()
        Y = self.conversion
        self.mass_matrix = Y.T @ self.mass_matrix_std @ Y
        self._hessians = self._build_hessians()

        for arr in (self.local_points, self.local_vectors, self.base_matrix,
                    self.base_pinv, self.jbar, self.conversion,
                    self.reference_products, self.center_coeffs,
                    self.mass_matrix_std, self.mass_matrix):
            arr.flags.writeable = False

    # -- construction helpers -------------------------------------------------

    def _validate_base(self):
        X = self.base_matrix
        scale = max(np.linalg.norm(X, axis=0).max(), 0.0)
        if self.coord_type.is_bar:
            if scale <= 1e-12:
                raise ValueError("bar base vector has (near) zero length")
            return
        # Bodies: square X, reject coplanar / colinear base vectors.
        det = np.linalg.det(X)
        if abs(det) < _DET_TOL * scale ** self.coord_type.dim:
            kind = "coplanar" if self.coord_type.dim == 3 else "colinear"
            raise ValueError(f"base vectors are {kind} (|det X| = {abs(det):.3e})")

    def _build_jbar(self, inertia) -> np.ndarray:
        m = self.coord_type.dim
        if inertia is None:
            raise ValueError("inertia data is required")
        if self.coord_type.is_bar:
            second = float(np.asarray(inertia))
            if second < 0.0:
                raise ValueError("axial second moment must be nonnegative")
            jbar = np.zeros((m, m))
            jbar[0, 0] = second
            return jbar
        if m == 2:
            iz = float(np.asarray(inertia))
            if iz < 0.0:
                raise ValueError("polar moment of inertia must be nonnegative")
            return np.diag([iz / 2.0, iz / 2.0])
        arr = np.asarray(inertia, dtype=float)
        if arr.shape == (3, 3):
            off = arr - np.diag(np.diag(arr))
            if np.abs(off).max() > 1e-12 * max(np.abs(arr).max(), 1.0):
                raise ValueError(
                    "3D inertia must be expressed in the principal axes "
                    "(off-diagonal terms found)")
            arr = np.diag(arr)
        if arr.shape != (3,):
            raise ValueError("3D inertia takes three principal moments")
        if np.any(arr < 0.0):
            raise ValueError("principal moments of inertia must be nonnegative")
        jbar = 0.5 * arr.sum() * np.eye(3) - np.diag(arr)
        if np.any(np.diag(jbar) < -1e-12 * max(arr.max(), 1.0)):
            raise ValueError(
                "principal moments violate the triangle inequality; the "
                "inertia matrix is not realizable")
        return np.clip(jbar, 0.0, None) if np.any(np.diag(jbar) < 0) else jbar

    def _build_mass_matrix_std(self) -> np.ndarray:
        mI = self.mass
        ri = self.local_points[0]
        Xp = self.base_pinv
        b = -mI * (Xp @ ri)
        D = Xp @ (self.jbar + mI * np.outer(ri, ri)) @ Xp.T
        D = 0.5 * (D + D.T)
        p = self.coord_type.nvectors
        small = np.empty((1 + p, 1 + p))
        small[0, 0] = mI
        small[0, 1:] = b
        small[1:, 0] = b
        small[1:, 1:] = D
        return np.kron(small, np.eye(self.coord_type.dim))

    def _build_hessians(self):
        """Constant Hessians of each intrinsic constraint, native coordinates."""
        ct = self.coord_type
        out = []
        for a, b in _CONSTRAINT_PAIRS[ct.nvectors]:
            H = np.zeros((ct.ncoords, ct.ncoords))
            sa, sb = ct.block(a), ct.block(b)
            eye = np.eye(ct.dim)
            H[sa, sb] += eye
            H[sb, sa] += eye
            Hn = self.conversion.T @ H @ self.conversion
            Hn.flags.writeable = False
            out.append(Hn)
        return tuple(out)

    # -- queries ---------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.coord_type.dim

    @property
    def ncoords(self) -> int:
        return self.coord_type.ncoords

    @property
    def nconstraints(self) -> int:
        return self.coord_type.nconstraints

    def intrinsic_hessian(self, k: int) -> np.ndarray:
        """Constant Hessian of the k-th intrinsic constraint (native tag)."""
        return self._hessians[k]

    def local_coeffs(self, local_position) -> LocalPoint:
        """Affine coefficients of a point given in the member's local frame."""
        r = np.asarray(local_position, dtype=float)
        if r.shape != (self.dim,):
            raise ValueError(f"local position must have dimension {self.dim}")
        return LocalPoint(self.base_pinv @ (r - self.local_points[0]))

    def point_transform(self, point: LocalPoint) -> np.ndarray:
        """Constant matrix C with r = C q for the member's native coordinates."""
        c = point.as_array()
        if c.shape != (self.coord_type.nvectors,):
            raise ValueError(
                f"local point needs {self.coord_type.nvectors} coefficients, "
                f"got {c.shape[0]}")
        c_std = np.kron(np.concatenate(([1.0], c)), np.eye(self.dim))
        return c_std @ self.conversion

    def center_transform(self) -> np.ndarray:
        """Point transform of the mass center."""
        return self.point_transform(LocalPoint(self.center_coeffs))

    def constraints(self, q) -> np.ndarray:
        """Residual of the intrinsic rigidity constraints at native q."""
        qs = np.asarray(q, dtype=float) if self._is_std else self.conversion @ q
        B = qs.reshape(self._nb, self._m)
        return np.einsum("ij,ij->i", B[self._pair_a], B[self._pair_b]) \
            - self.reference_products

    def constraint_jacobian(self, q) -> np.ndarray:
        """Jacobian of the intrinsic constraints with respect to native q."""
        qs = np.asarray(q, dtype=float) if self._is_std else self.conversion @ q
        B = qs.reshape(self._nb, self._m)
        J = np.zeros((self._nc, self._nb, self._m))
        J[self._jac_rows, self._pair_a] += B[self._pair_b]
        J[self._jac_rows, self._pair_b] += B[self._pair_a]
        J = J.reshape(self._nc, self._ncoords)
        if self._is_std:
            return J
        return J @ self.conversion

    def placed_coords(self, rotation=None, translation=None) -> np.ndarray:
        """Native coordinates of the member placed rigidly in the global frame.

        ``rotation`` maps local to global directions (defaults to identity);
        ``translation`` is the global position of the local origin, i.e. of
        the mass center.
        """
        m = self.dim
        R = np.eye(m) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.zeros(m) if translation is None else np.asarray(translation, dtype=float)
        if R.shape != (m, m):
            raise ValueError(f"rotation must be {m}x{m}")
        q = np.empty(self.ncoords)
        ct = self.coord_type
        for i in range(ct.npoints):
            q[ct.block(i)] = R @ self.local_points[i] + t
        for k in range(ct.nblocks - ct.npoints):
            q[ct.block(ct.npoints + k)] = R @ self.local_vectors[k]
        return q

    def rigid_velocity(self, q, v_center, omega) -> np.ndarray:
        """Native velocity of a rigid motion: mass-center velocity plus spin."""
        ct = self.coord_type
        q = np.asarray(q, dtype=float)
        v = np.asarray(v_center, dtype=float)
        rg = self.center_transform() @ q
        qd = np.empty(self.ncoords)
        for i in range(ct.npoints):
            p = q[ct.block(i)]
            qd[ct.block(i)] = v + _omega_cross(omega, p - rg)
        for k in range(ct.nblocks - ct.npoints):
            w = q[ct.block(ct.npoints + k)]
            qd[ct.block(ct.npoints + k)] = _omega_cross(omega, w)
        return qd


def _omega_cross(omega, vec):
    vec = np.asarray(vec, dtype=float)
    if vec.shape == (2,):
        w = float(np.asarray(omega))
        return w * np.array([-vec[1], vec[0]])
    return np.cross(np.asarray(omega, dtype=float), vec)


# -- module-level operation forms ---------------------------------------------

def point_transform(template: MemberTemplate, point: LocalPoint) -> np.ndarray:
    return template.point_transform(point)


def local_coeffs(template: MemberTemplate, local_position) -> LocalPoint:
    return template.local_coeffs(local_position)


def intrinsic_constraints(template: MemberTemplate, q) -> np.ndarray:
    return template.constraints(q)


def intrinsic_jacobian(template: MemberTemplate, q) -> np.ndarray:
    return template.constraint_jacobian(q)


def mass_matrix(template: MemberTemplate) -> np.ndarray:
    return template.mass_matrix


def placed_coords(template: MemberTemplate, rotation=None, translation=None):
    return template.placed_coords(rotation, translation)


def rigid_velocity(template: MemberTemplate, q, v_center, omega):
    return template.rigid_velocity(q, v_center, omega)


# -- convenience constructors ---------------------------------------------------

def bar_template(dim: int, mass: float, length: float, second_moment=None,
                 tag: str = "rr", name: str | None = None) -> MemberTemplate:
    """Uniform-density rigid bar with endpoints at -L/2 and +L/2 on local x.

    ``second_moment`` is the axial second moment of mass about the center;
    the uniform value m L^2 / 12 is used when omitted.
    """
    length = float(length)
    if length <= 0.0:
        raise ValueError("bar length must be positive")
    if second_moment is None:
        second_moment = mass * length ** 2 / 12.0
    ct = CoordType(tag, dim)
    if not ct.is_bar:
        raise ValueError(f"{tag!r} is not a bar tag")
    half = 0.5 * length
    if ct.npoints == 2:
        pts = [[-half] + [0.0] * (dim - 1), [half] + [0.0] * (dim - 1)]
        vecs = None
    else:
        pts = [[-half] + [0.0] * (dim - 1)]
        vecs = [[length] + [0.0] * (dim - 1)]
    return MemberTemplate(ct, mass, pts, vecs, inertia=second_moment, name=name)


def body_template(tag: str, mass: float, local_points, local_vectors=None,
                  inertia=None, name: str | None = None) -> MemberTemplate:
    """Rigid body template; the spatial dimension follows from the tag."""
    dim = 3 if tag in BODY_3D_TAGS else 2
    ct = CoordType(tag, dim)
    if ct.is_bar:
        raise ValueError("use bar_template for bar tags")
    return MemberTemplate(ct, mass, local_points, local_vectors,
                          inertia=inertia, name=name)
