import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planarcontact import model as rb
from planarcontact.model import RobotModel


def fd(f, q, h=1e-6):
    """Central difference of f with respect to each coordinate of q (last axis)."""
    cols = []
    for k in range(q.size):
        e = np.zeros_like(q)
        e[k] = h
        cols.append((np.asarray(f(q + e)) - np.asarray(f(q - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def kinetic_oracle(model, q, qdot):
    """Sum of link kinetic energies from finite-difference COM velocities."""
    v = fd(lambda x: rb.com_positions(model, x), q) @ qdot  # (n, 2)
    omega = np.cumsum(qdot)
    return 0.5 * np.sum(model.masses * np.sum(v**2, axis=1)) + 0.5 * np.sum(model.inertias * omega**2)


def test_joint_origins_straight_arm(arm):
    origins = rb.joint_origins(arm, np.zeros(4))
    np.testing.assert_allclose(origins[:, 0], [0, 0.5, 1.0, 1.5, 2.0])
    np.testing.assert_allclose(origins[:, 1], 0.0)


def test_mass_matrix_matches_kinetic_energy(odd_arm, rng):
    for _ in range(20):
        q = rng.uniform(-np.pi, np.pi, 4)
        qd = rng.normal(size=4)
        assert rb.kinetic_energy(odd_arm, q, qd) == pytest.approx(
            kinetic_oracle(odd_arm, q, qd), rel=1e-8)


def test_mass_matrix_symmetric_positive(odd_arm, rng):
    for _ in range(20):
        M = rb.mass_matrix(odd_arm, rng.uniform(-3, 3, 4))
        np.testing.assert_allclose(M, M.T, atol=1e-15)
        assert np.all(np.linalg.eigvalsh(M) > 0)


def test_single_link_inertia():
    m = RobotModel([0.5], [0.08], [2.0], [0.1], [0.25])
    assert rb.mass_matrix(m, [0.3])[0, 0] == pytest.approx(0.1 + 2.0 * 0.25**2)


def test_mass_matrix_derivatives_match_finite_difference(odd_arm, rng):
    for _ in range(10):
        q = rng.uniform(-3, 3, 4)
        num = fd(lambda x: rb.mass_matrix(odd_arm, x), q)  # [i, j, k]
        ana = np.transpose(rb.mass_matrix_derivatives(odd_arm, q), (1, 2, 0))
        np.testing.assert_allclose(ana, num, atol=1e-8)


def test_coriolis_matches_lagrangian(odd_arm, rng):
    # C qdot = Mdot qdot - 1/2 d(qdot^T M qdot)/dq
    for _ in range(10):
        q = rng.uniform(-3, 3, 4)
        qd = rng.normal(size=4)
        Mdot = fd(lambda x: rb.mass_matrix(odd_arm, x), q) @ qd
        dT = fd(lambda x: qd @ rb.mass_matrix(odd_arm, x) @ qd, q)
        expected = Mdot @ qd - 0.5 * dT
        np.testing.assert_allclose(rb.coriolis_matrix(odd_arm, q, qd) @ qd, expected, atol=1e-7)


def test_mdot_minus_2c_is_skew(odd_arm, rng):
    q = rng.uniform(-3, 3, 4)
    qd = rng.normal(size=4)
    Mdot = np.tensordot(rb.mass_matrix_derivatives(odd_arm, q), qd, axes=(0, 0))
    S = Mdot - 2 * rb.coriolis_matrix(odd_arm, q, qd)
    np.testing.assert_allclose(S, -S.T, atol=1e-12)


def test_gravity_is_potential_gradient(odd_arm, rng):
    for _ in range(10):
        q = rng.uniform(-3, 3, 4)
        np.testing.assert_allclose(rb.gravity_vector(odd_arm, q),
                                   fd(lambda x: rb.potential_energy(odd_arm, x), q), atol=1e-7)


def test_gravity_zero_for_hanging_arm(arm):
    np.testing.assert_allclose(rb.gravity_vector(arm, [-np.pi / 2, 0, 0, 0]), 0.0, atol=1e-12)


def test_point_jacobian_matches_finite_difference(odd_arm, rng):
    for link in range(4):
        pt = rb.perimeter_point(odd_arm, link, rng.uniform(0, odd_arm.perimeter(link)))
        q = rng.uniform(-3, 3, 4)
        num = fd(lambda x: rb.world_point(odd_arm, x, pt)[0], q)
        np.testing.assert_allclose(rb.point_jacobian(odd_arm, q, pt), num, atol=1e-8)


def test_tip_jacobian_matches_finite_difference(odd_arm, rng):
    q = rng.uniform(-3, 3, 4)
    np.testing.assert_allclose(rb.tip_jacobian(odd_arm, q),
                               fd(lambda x: rb.end_effector(odd_arm, x), q), atol=1e-8)


def test_frame_jacobian_joint3(arm):
    q = np.array([0.1, 0.2, 0.3, 0.4])
    J = rb.frame_jacobian(arm, q, 3)
    np.testing.assert_array_equal(J[2], [1, 1, 1, 0])
    np.testing.assert_allclose(J[:2], fd(lambda x: rb.joint_origins(arm, x)[3], q), atol=1e-8)
    np.testing.assert_array_equal(rb.frame_jacobian(arm, q, 0), np.zeros((3, 4)))
    np.testing.assert_array_equal(rb.link_frame_jacobian(arm, q, 3)[2], [1, 1, 1, 1])
    with pytest.raises(IndexError):
        rb.frame_jacobian(arm, q, 4)


def test_perimeter_walk(arm):
    L, w = 0.5, 0.08
    cases = [
        (0.0, (0.0, -w / 2), (0, -1)),
        (0.2, (0.2, -w / 2), (0, -1)),
        (L, (L, -w / 2), (1, 0)),
        (L + 0.03, (L, -w / 2 + 0.03), (1, 0)),
        (L + w, (L, w / 2), (0, 1)),
        (L + w + 0.1, (L - 0.1, w / 2), (0, 1)),
        (2 * L + w + 0.02, (0.0, w / 2 - 0.02), (-1, 0)),
        (2 * (L + w), (0.0, -w / 2), (0, -1)),
        (-0.1, (0.02, w / 2), (0, 1)),
    ]
    for s, local, normal in cases:
        pt = rb.perimeter_point(arm, 2, s)
        np.testing.assert_allclose(pt.local, local, atol=1e-12)
        np.testing.assert_allclose(pt.outward_normal, normal)
    pt = rb.perimeter_point(arm, 0, 0.2)
    np.testing.assert_allclose(pt.tangent, [1, 0])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 3), st.floats(0, 1.16, allow_nan=False, exclude_max=True))
def test_boundary_round_trip(link, s):
    arm = RobotModel.uniform()
    pt = rb.perimeter_point(arm, link, s)
    back = rb.boundary_point_from_local(arm, link, pt.local)
    np.testing.assert_allclose(back.local, pt.local, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-np.pi, np.pi), min_size=4, max_size=4),
       st.integers(0, 3), st.floats(0, 1.15))
def test_world_local_round_trip(q, link, s):
    arm = RobotModel.uniform()
    pt = rb.perimeter_point(arm, link, s)
    p, n = rb.world_point(arm, q, pt)
    np.testing.assert_allclose(rb.world_to_local(arm, q, link, p), pt.local, atol=1e-12)
    assert np.linalg.norm(n) == pytest.approx(1.0)


def test_corners_are_perimeter_points(arm, rng):
    q = rng.uniform(-3, 3, 4)
    corners = rb.link_corners(arm, q, 1)
    for c, s in zip(corners, [0.0, 0.5, 0.58, 1.08]):
        np.testing.assert_allclose(c, rb.world_point(arm, q, rb.perimeter_point(arm, 1, s))[0],
                                   atol=1e-12)


@pytest.mark.parametrize("kwargs, match", [
    (dict(lengths=[0.5, -1]), "lengths"),
    (dict(masses=[1.0]), "masses"),
    (dict(com_offsets=[0.6, 0.2]), "com_offsets"),
    (dict(inertias=[0.0, 0.1]), "inertias"),
    (dict(joint_damping=-1.0), "joint_damping"),
])
def test_model_validation(kwargs, match):
    base = dict(lengths=[0.5, 0.5], widths=[0.08, 0.08], masses=[1, 1],
                inertias=[0.02, 0.02], com_offsets=[0.25, 0.25])
    base.update(kwargs)
    with pytest.raises(ValueError, match=match):
        RobotModel(**base)


def test_model_arrays_are_read_only(arm):
    with pytest.raises(ValueError):
        arm.lengths[0] = 3.0
