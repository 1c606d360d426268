import numpy as np
import pytest
from scipy.integrate import quad

from tensekit.members import (
    BAR_TAGS,
    BODY_2D_TAGS,
    BODY_3D_TAGS,
    CoordType,
    LocalPoint,
    bar_template,
    body_template,
    conversion_matrix,
    to_standard,
)


def rotation_2d(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def random_rotation_3d(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_body_3d(rng, tag="ruvw"):
    pts = rng.uniform(-0.5, 0.5, size=(CoordType(tag, 3).npoints, 3))
    nvec = 4 - len(pts)
    while True:
        vecs = rng.uniform(-1.0, 1.0, size=(nvec, 3)) if nvec else None
        try:
            moments = rng.uniform(0.5, 1.0, size=3)
            # scale one moment up so the triangle inequality holds comfortably
            moments[2] = moments[0] + moments[1] * rng.uniform(0.2, 0.9)
            return body_template(tag, rng.uniform(0.5, 3.0), pts, vecs,
                                 inertia=moments)
        except ValueError:
            pts = rng.uniform(-0.5, 0.5, size=(len(pts), 3))


class TestCoordType:
    def test_table_of_polymorphism(self):
        assert all(CoordType(t, 3).ncoords == 12 for t in BODY_3D_TAGS)
        assert all(CoordType(t, 2).ncoords == 6 for t in BODY_2D_TAGS)
        assert all(CoordType(t, 3).ncoords == 6 for t in BAR_TAGS)
        assert all(CoordType(t, 2).ncoords == 4 for t in BAR_TAGS)
        assert CoordType("ruvw", 3).dof == 6
        assert CoordType("rrr", 2).dof == 3
        assert CoordType("rr", 3).dof == 5
        assert CoordType("ru", 2).dof == 3

    def test_body_tags_fix_dimension(self):
        with pytest.raises(ValueError):
            CoordType("ruvw", 2)
        with pytest.raises(ValueError):
            CoordType("rrv", 3)
        CoordType("rr", 2), CoordType("rr", 3)  # bars allow both


class TestConversion:
    def test_rr_2d(self):
        Y = conversion_matrix(CoordType("rr", 2))
        expected = np.kron([[1, 0], [-1, 1]], np.eye(2))
        assert np.array_equal(Y, expected)

    def test_ruvw_identity(self):
        assert np.array_equal(conversion_matrix(CoordType("ruvw", 3)), np.eye(12))

    def test_rrrr_blocks(self):
        S = np.array([[1, 0, 0, 0], [-1, 1, 0, 0], [-1, 0, 1, 0], [-1, 0, 0, 1]])
        assert np.array_equal(conversion_matrix(CoordType("rrrr", 3)),
                              np.kron(S, np.eye(3)))

    def test_to_standard_rr(self):
        q = np.array([0.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(to_standard(q, CoordType("rr", 2)),
                                   [0, 0, 1, 0])

    def test_to_standard_rrr(self):
        q = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 1.0])
        np.testing.assert_allclose(to_standard(q, CoordType("rrr", 2)),
                                   [0, 0, 1, 0, 0, 1])

    def test_to_standard_rrvw(self):
        q = np.concatenate([[1, 1, 1], [2, 1, 1], [0, 1, 0], [0, 0, 1]])
        np.testing.assert_allclose(
            to_standard(q, CoordType("rrvw", 3)),
            np.concatenate([[1, 1, 1], [1, 0, 0], [0, 1, 0], [0, 0, 1]]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            to_standard(np.zeros(5), CoordType("rr", 3))


class TestPointTransform:
    def test_zero_coeffs_select_first_point(self):
        tpl = bar_template(3, 1.0, 2.0, tag="ru")
        C = tpl.point_transform(LocalPoint([0.0]))
        q = np.array([1.0, 2, 3, 4, 5, 6])
        np.testing.assert_allclose(C @ q, [1, 2, 3])

    def test_bar_midpoint(self):
        tpl = bar_template(3, 1.0, 2.0, tag="ru")
        C = tpl.point_transform(LocalPoint([0.5]))
        q = np.concatenate([[0, 0, 0], [2, 0, 0]])
        np.testing.assert_allclose(C @ q, [1, 0, 0])

    def test_affine_combination_2d(self):
        tpl = body_template("ruv", 1.0, [[0.0, 0.0]], [[1, 0], [0, 1]],
                            inertia=0.1)
        C = tpl.point_transform(LocalPoint([2.0, 3.0]))
        q = np.concatenate([[1, 0], [1, 0], [0, 1]])
        np.testing.assert_allclose(C @ q, [3, 3])

    def test_constant_in_q(self):
        rng = np.random.default_rng(0)
        tpl = random_body_3d(rng, "rrrw")
        pt = LocalPoint(rng.uniform(-1, 1, 3))
        C = tpl.point_transform(pt)
        # recompute and compare: the matrix never depends on q
        assert np.array_equal(C, tpl.point_transform(pt))

    def test_nonstandard_tag_consistency(self):
        # the same material point maps to the same global position under
        # every tag once the conversion matrix is folded in
        rng = np.random.default_rng(1)
        R = random_rotation_3d(rng)
        t = rng.uniform(-1, 1, 3)
        local = rng.uniform(-0.3, 0.3, 3)
        positions = []
        for tag in BODY_3D_TAGS:
            tpl = random_tetra(tag)
            q = tpl.placed_coords(R, t)
            c = tpl.local_coeffs(local)
            positions.append(tpl.point_transform(c) @ q)
        for p in positions[1:]:
            np.testing.assert_allclose(p, positions[0], atol=1e-12)


def random_tetra(tag):
    """A fixed tetrahedral body expressed in any of the 3D tags."""
    verts = np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
    verts -= verts.mean(axis=0)
    ct = CoordType(tag, 3)
    pts = verts[: ct.npoints]
    vecs = [verts[k] - verts[0] for k in range(ct.npoints, 4)]
    return body_template(tag, 1.0, pts, vecs if vecs else None,
                         inertia=[0.3, 0.3, 0.4])


class TestLocalCoeffs:
    def test_first_point_is_zero(self):
        tpl = random_tetra("rrvw")
        c = tpl.local_coeffs(tpl.local_points[0])
        np.testing.assert_allclose(c.as_array(), np.zeros(3), atol=1e-14)

    def test_bar_opposite_end(self):
        tpl = bar_template(3, 1.0, 1.0)
        c = tpl.local_coeffs([0.5, 0.0, 0.0])
        np.testing.assert_allclose(c.as_array(), [1.0])

    def test_identity_base_2d(self):
        tpl = body_template("ruv", 1.0, [[0.0, 0.0]], [[1, 0], [0, 1]],
                            inertia=0.1)
        c = tpl.local_coeffs([0.3, 0.7])
        np.testing.assert_allclose(c.as_array(), [0.3, 0.7])

    def test_round_trip_through_point_transform(self):
        rng = np.random.default_rng(2)
        tpl = random_body_3d(rng, "rrrr")
        R = random_rotation_3d(rng)
        t = rng.uniform(-1, 1, 3)
        q = tpl.placed_coords(R, t)
        local = rng.uniform(-0.4, 0.4, 3)
        c = tpl.local_coeffs(local)
        np.testing.assert_allclose(tpl.point_transform(c) @ q, R @ local + t,
                                   atol=1e-12)


class TestIntrinsicConstraints:
    @pytest.mark.parametrize("tag", BODY_3D_TAGS + BODY_2D_TAGS + BAR_TAGS)
    def test_rigid_placement_gives_zero(self, tag):
        rng = np.random.default_rng(hash(tag) % 2**32)
        if tag in BODY_3D_TAGS:
            tpl = random_body_3d(rng, tag)
            R = random_rotation_3d(rng)
        elif tag in BODY_2D_TAGS:
            tpl = isosceles_triangle(tag)
            R = rotation_2d(rng.uniform(0, 2 * np.pi))
        else:
            tpl = bar_template(3, 1.0, 0.7, tag=tag)
            R = random_rotation_3d(rng)
        q = tpl.placed_coords(R, rng.uniform(-1, 1, tpl.dim))
        assert np.abs(tpl.constraints(q)).max() < 1e-12

    def test_stretched_bar(self):
        tpl = bar_template(3, 1.0, 1.0, tag="ru")
        q = np.concatenate([[0, 0, 0], [2, 0, 0]])
        np.testing.assert_allclose(tpl.constraints(q), [3.0])

    def test_sheared_2d_body(self):
        tpl = body_template("ruv", 1.0, [[0.0, 0.0]], [[1, 0], [0, 1]],
                            inertia=0.1)
        q = np.concatenate([[0, 0], [1, 0], [1, 1]])
        np.testing.assert_allclose(tpl.constraints(q), [0.0, 1.0, 1.0])

    def test_conversion_commutes_with_constraints(self):
        # evaluating in the native tag equals evaluating the standard form
        for tag in BODY_3D_TAGS:
            tpl = random_tetra(tag)
            rng = np.random.default_rng(5)
            q = rng.uniform(-1, 1, tpl.ncoords)
            std_tpl = random_tetra("ruvw")
            np.testing.assert_allclose(
                tpl.constraints(q),
                std_tpl.constraints(to_standard(q, tpl.coord_type)),
                atol=1e-13)


class TestIntrinsicJacobian:
    def test_bar_row(self):
        tpl = bar_template(3, 1.0, 1.0, tag="ru")
        q = np.concatenate([[0, 0, 0], [1, 0, 0]])
        np.testing.assert_allclose(tpl.constraint_jacobian(q),
                                   [[0, 0, 0, 2, 0, 0]])

    def test_bilinear_rows_2d(self):
        tpl = body_template("ruv", 1.0, [[0.0, 0.0]], [[1, 0], [0, 1]],
                            inertia=0.1)
        u, v = np.array([0.8, 0.1]), np.array([-0.2, 1.1])
        q = np.concatenate([[0.5, 0.5], u, v])
        J = tpl.constraint_jacobian(q)
        np.testing.assert_allclose(J[2], np.concatenate([[0, 0], v, u]))

    @pytest.mark.parametrize("tag", BODY_3D_TAGS + BODY_2D_TAGS + BAR_TAGS)
    def test_matches_finite_differences(self, tag):
        rng = np.random.default_rng(abs(hash("fd" + tag)) % 2**32)
        if tag in BODY_3D_TAGS:
            tpl = random_body_3d(rng, tag)
        elif tag in BODY_2D_TAGS:
            tpl = isosceles_triangle(tag)
        else:
            tpl = bar_template(2, 1.0, 0.4, tag=tag)
        q = rng.uniform(-1, 1, tpl.ncoords)
        J = tpl.constraint_jacobian(q)
        h = 1e-6
        fd = np.empty_like(J)
        for i in range(tpl.ncoords):
            e = np.zeros(tpl.ncoords)
            e[i] = h
            fd[:, i] = (tpl.constraints(q + e) - tpl.constraints(q - e)) / (2 * h)
        scale = max(np.abs(J).max(), 1.0)
        assert np.abs(J - fd).max() / scale < 1e-7

    def test_constraint_hessians_reproduce_jacobian(self):
        # Phi is quadratic: grad(q) = grad(0) + H q exactly
        tpl = random_tetra("rrrw")
        rng = np.random.default_rng(7)
        q = rng.uniform(-1, 1, tpl.ncoords)
        J0 = tpl.constraint_jacobian(np.zeros(tpl.ncoords))
        J = tpl.constraint_jacobian(q)
        for k in range(tpl.nconstraints):
            np.testing.assert_allclose(J[k], J0[k] + tpl.intrinsic_hessian(k) @ q,
                                       atol=1e-12)


def isosceles_triangle(tag="ruv", mass=0.1271425597, height=0.05):
    """Isosceles right triangular plate, hypotenuse 2*height, apex up.

    Local frame at the centroid; vertices are the two hypotenuse corners and
    the apex.  Basic points are taken from the vertex list in order.
    """
    h = height
    verts = np.array([[-h, -h / 3], [h, -h / 3], [0.0, 2 * h / 3]])
    iz = mass * (8 * h * h) / 36.0
    ct = CoordType(tag, 2)
    pts = verts[: ct.npoints]
    vecs = [verts[k] - verts[0] for k in range(ct.npoints, 3)]
    return body_template(tag, mass, pts, vecs if vecs else None, inertia=iz)


class TestMassMatrix:
    def bar_quadrature_oracle(self, mass, length, tag):
        """Mass matrix from direct quadrature of rho C(x)^T C(x) along the bar."""
        ct = CoordType(tag, 3)
        rho = mass / length
        Y = conversion_matrix(ct)

        def small_entry(i, j):
            def f(x):
                c = (x + length / 2) / length  # affine coefficient at station x
                row = np.array([1.0, c])
                return rho * row[i] * row[j]
            val, _ = quad(f, -length / 2, length / 2, epsabs=1e-14, epsrel=1e-13)
            return val

        small = np.array([[small_entry(i, j) for j in range(2)] for i in range(2)])
        return Y.T @ np.kron(small, np.eye(3)) @ Y

    def test_uniform_bar_ru(self):
        tpl = bar_template(3, 1.0, 1.0, tag="ru")
        oracle = self.bar_quadrature_oracle(1.0, 1.0, "ru")
        np.testing.assert_allclose(tpl.mass_matrix, oracle, atol=1e-12)
        np.testing.assert_allclose(
            tpl.mass_matrix, np.kron([[1.0, 0.5], [0.5, 1.0 / 3.0]], np.eye(3)),
            atol=1e-12)

    def test_uniform_bar_rr(self):
        tpl = bar_template(3, 1.0, 1.0, tag="rr")
        oracle = self.bar_quadrature_oracle(1.0, 1.0, "rr")
        np.testing.assert_allclose(tpl.mass_matrix, oracle, atol=1e-12)
        np.testing.assert_allclose(
            tpl.mass_matrix, np.kron(np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0,
                                     np.eye(3)),
            atol=1e-12)

    def test_rr_is_congruent_to_ru(self):
        ru = bar_template(3, 2.5, 0.7, tag="ru")
        rr = bar_template(3, 2.5, 0.7, tag="rr")
        Y = conversion_matrix(CoordType("rr", 3))
        np.testing.assert_allclose(rr.mass_matrix, Y.T @ ru.mass_matrix @ Y,
                                   atol=1e-14)

    def test_2d_centered_identity_base(self):
        iz = 0.2
        tpl = body_template("ruv", 3.0, [[0.0, 0.0]], [[1, 0], [0, 1]],
                            inertia=iz)
        expected = np.kron(np.diag([3.0, iz / 2, iz / 2]), np.eye(2))
        np.testing.assert_allclose(tpl.mass_matrix, expected, atol=1e-14)

    def test_exact_symmetry_and_psd(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            tpl = random_body_3d(rng, "rrvw")
            M = tpl.mass_matrix
            assert np.array_equal(M, M.T)
            assert np.linalg.eigvalsh(M).min() > -1e-12

    @pytest.mark.parametrize("case", ["3d_body", "2d_body", "bar3", "bar2"])
    def test_kinetic_energy_consistency(self, case):
        rng = np.random.default_rng(abs(hash(case)) % 2**32)
        for _ in range(20):
            if case == "3d_body":
                tpl = random_body_3d(rng, "rrrw")
                R = random_rotation_3d(rng)
                omega = rng.uniform(-2, 2, 3)
                inertia_global = R @ _principal_inertia(tpl) @ R.T
                spin = 0.5 * omega @ inertia_global @ omega
            elif case == "2d_body":
                tpl = isosceles_triangle("rrv")
                R = rotation_2d(rng.uniform(0, 2 * np.pi))
                omega = rng.uniform(-2, 2)
                spin = 0.5 * np.trace(tpl.jbar) * omega ** 2
            elif case == "bar3":
                tpl = bar_template(3, 1.3, 0.8, tag="rr")
                R = random_rotation_3d(rng)
                omega = rng.uniform(-2, 2, 3)
                # spin energy about the axis is not representable; project out
                axis = R @ np.array([1.0, 0, 0])
                w_perp = omega - (omega @ axis) * axis
                spin = 0.5 * tpl.jbar[0, 0] * (w_perp @ w_perp)
                omega = w_perp
            else:
                tpl = bar_template(2, 0.4, 1.1, tag="ru")
                R = rotation_2d(rng.uniform(0, 2 * np.pi))
                omega = rng.uniform(-2, 2)
                spin = 0.5 * tpl.jbar[0, 0] * omega ** 2
            v = rng.uniform(-1, 1, tpl.dim)
            q = tpl.placed_coords(R, rng.uniform(-1, 1, tpl.dim))
            qd = tpl.rigid_velocity(q, v, omega)
            T = 0.5 * qd @ tpl.mass_matrix @ qd
            T_ref = 0.5 * tpl.mass * (v @ v) + spin
            assert abs(T - T_ref) <= 1e-10 * max(abs(T_ref), 1e-12)


def _principal_inertia(tpl):
    # invert jbar = tr(I)/2 eye - I  =>  I = tr(jbar) eye - jbar
    return np.trace(tpl.jbar) * np.eye(3) - tpl.jbar


class TestTemplateValidation:
    def test_negative_mass(self):
        with pytest.raises(ValueError):
            bar_template(3, -1.0, 1.0)

    def test_zero_length_bar(self):
        with pytest.raises(ValueError):
            bar_template(3, 1.0, 0.0)

    def test_coplanar_base_vectors(self):
        with pytest.raises(ValueError):
            body_template("ruvw", 1.0, [[0.0, 0, 0]],
                          [[1, 0, 0], [0, 1, 0], [1, 1, 0]],
                          inertia=[0.1, 0.1, 0.1])

    def test_colinear_base_vectors_2d(self):
        with pytest.raises(ValueError):
            body_template("ruv", 1.0, [[0.0, 0]], [[1, 0], [2, 0]], inertia=0.1)

    def test_off_diagonal_inertia_rejected(self):
        with pytest.raises(ValueError):
            body_template("ruvw", 1.0, [[0.0, 0, 0]],
                          [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
                          inertia=[[0.1, 0.05, 0], [0.05, 0.1, 0], [0, 0, 0.1]])

    def test_triangle_inequality(self):
        with pytest.raises(ValueError):
            body_template("ruvw", 1.0, [[0.0, 0, 0]],
                          [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
                          inertia=[1.0, 0.1, 0.1])

    def test_templates_are_frozen(self):
        tpl = bar_template(3, 1.0, 1.0)
        with pytest.raises(ValueError):
            tpl.mass_matrix[0, 0] = 5.0
