"""Shared model builders for the test suite."""

import numpy as np

from tensekit.assembly import SystemBuilder
from tensekit.forces import ForceModel, LoadSet
from tensekit.members import LocalPoint, bar_template, body_template

# double pendulum parameters (bar plus triangular plate)
BAR_MASS = 0.026934977798
BAR_LENGTH = 0.07071067811865477
TRI_MASS = 0.1271425597
TRI_HEIGHT = 0.05
TRI_INERTIA = 7.063475538888889e-5
GRAVITY = 9.8


def rot2(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def triangle_template(tag="ruv", apex_first=False, mass=TRI_MASS,
                      height=TRI_HEIGHT, inertia=TRI_INERTIA):
    """Isosceles right triangular plate, local frame at the centroid.

    Vertices: hypotenuse corners at (-h, -h/3) and (h, -h/3), apex at
    (0, 2h/3).  With ``apex_first`` the apex becomes the first basic point,
    handy when the apex is the joint.
    """
    h = height
    verts = np.array([[-h, -h / 3], [h, -h / 3], [0.0, 2 * h / 3]])
    if apex_first:
        verts = verts[[2, 0, 1]]
    npts = {"ruv": 1, "rrv": 2, "rrr": 3}[tag]
    vecs = [verts[k] - verts[0] for k in range(npts, 3)]
    return body_template(tag, mass, verts[:npts], vecs if vecs else None,
                         inertia=inertia)


THETA1_0 = 1.2  # rich but resolvable at the reference timestep
THETA2_0 = 0.0


def build_double_pendulum(theta1=THETA1_0, theta2=THETA2_0, gravity=GRAVITY):
    """Bar pinned at the origin, triangular plate pinned at the bar tip.

    Angles are measured from the downward vertical; theta2 orients the line
    from the apex (the pin) to the plate centroid.  In the template the
    centroid sits straight below the apex, so the placement rotation equals
    theta2.
    """
    l1 = BAR_LENGTH
    pivot = np.zeros(2)
    tip = pivot + l1 * np.array([np.sin(theta1), -np.cos(theta1)])

    b = SystemBuilder(2)
    n_pivot = b.add_node(pivot)
    n_tip = b.add_node(tip)
    b.prescribe(n_pivot)
    b.add_member("bar", bar_template(2, BAR_MASS, BAR_LENGTH), [n_pivot, n_tip])
    b.add_member("plate", triangle_template("ruv", apex_first=True), [n_tip],
                 rotation=rot2(theta2))
    topo = b.assemble()
    fm = ForceModel(topo, loads=LoadSet(gravity=[0.0, -gravity]))
    return topo, fm


def pendulum_angles(topo, q):
    """The two pendulum angles, from the downward vertical."""
    pivot = q[topo.node_slot[0]]
    tip = q[topo.node_slot[1]]
    plate = topo.member("plate")
    center = topo.point_matrix("plate", LocalPoint(
        plate.template.center_coeffs)) @ q
    theta1 = np.arctan2(tip[0] - pivot[0], -(tip[1] - pivot[1]))
    theta2 = np.arctan2(center[0] - tip[0], -(center[1] - tip[1]))
    return theta1, theta2


def double_pendulum_oracle(theta1, theta2, t_eval, gravity=GRAVITY,
                           max_step=1e-5):
    """Minimal two-angle formulation integrated by an adaptive 5th order method."""
    from scipy.integrate import solve_ivp

    l1, rho = BAR_LENGTH, 2 * TRI_HEIGHT / 3
    m1, m2 = BAR_MASS, TRI_MASS
    A = m1 * l1 ** 2 / 3 + m2 * l1 ** 2
    B = TRI_INERTIA + m2 * rho ** 2
    a = m2 * l1 * rho
    G1 = (m1 * l1 / 2 + m2 * l1) * gravity
    G2 = m2 * gravity * rho

    def rhs(_t, y):
        th1, th2, w1, w2 = y
        cd, sd = np.cos(th1 - th2), np.sin(th1 - th2)
        Mloc = np.array([[A, a * cd], [a * cd, B]])
        rhs_vec = np.array([-a * sd * w2 ** 2 - G1 * np.sin(th1),
                            a * sd * w1 ** 2 - G2 * np.sin(th2)])
        acc = np.linalg.solve(Mloc, rhs_vec)
        return [w1, w2, acc[0], acc[1]]

    sol = solve_ivp(rhs, (0.0, t_eval[-1]), [theta1, theta2, 0.0, 0.0],
                    t_eval=t_eval, max_step=max_step, rtol=1e-10, atol=1e-12)
    return sol.y[0], sol.y[1]


def build_bar_pendulum(length=0.1, mass=0.026934977798, gravity=GRAVITY):
    """Single uniform bar pinned at the origin, hanging straight down."""
    b = SystemBuilder(2)
    n_pivot = b.add_node([0.0, 0.0])
    n_tip = b.add_node([0.0, -length])
    b.prescribe(n_pivot)
    b.add_member("bar", bar_template(2, mass, length), [n_pivot, n_tip])
    topo = b.assemble()
    fm = ForceModel(topo, loads=LoadSet(gravity=[0.0, -gravity]))
    return topo, fm
