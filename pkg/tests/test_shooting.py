import numpy as np
import pytest
from hypothesis import given, strategies as st

from geonet import ball, shooting
from geonet.errors import DomainError, ShootingError
from geonet.metrics import BallMetric, SphereMetric

seeds = st.integers(0, 2 ** 32)


def unit(v):
    return v / np.linalg.norm(v)


def sphere_pair(seed, d=2):
    rng = np.random.default_rng(seed)
    x = unit(rng.standard_normal(d + 1))
    v = rng.standard_normal(d + 1)
    return x, unit(v - (v @ x) * x), rng


@given(seeds)
def test_flat_boundary_hit_matches_ray_formula(seed):
    rng = np.random.default_rng(seed)
    x = unit(rng.standard_normal(3)) * 0.5 * rng.uniform()
    w = rng.standard_normal(3)
    hit = shooting.hit_boundary(BallMetric(3), x, w)
    assert hit.length == pytest.approx(ball.L0(x, w), abs=1e-10)
    assert np.linalg.norm(hit.point) == pytest.approx(1.0, abs=1e-12)
    assert hit.margin > 0.1


def test_boundary_hit_rejects_far_junction(flat2):
    with pytest.raises(DomainError):
        shooting.hit_boundary(flat2, np.array([0.6, 0.0]), np.array([1.0, 0.0]))


def test_uniform_boundary_length_agrees_with_adaptive(conformal_ball):
    x = np.array([0.1, -0.15])
    w = unit(np.array([0.3, 1.0]))
    adaptive = shooting.hit_boundary(conformal_ball, x, w)
    u = w / np.sqrt(w @ conformal_ball.matrix(x) @ w)
    L, Y = shooting.boundary_length(conformal_ball, x, u, n_steps=64)
    assert L == pytest.approx(adaptive.length, abs=1e-9)
    assert np.linalg.norm(Y[-1, :2]) == pytest.approx(1.0, abs=1e-13)


def test_conformal_geodesic_has_unit_speed(conformal_ball):
    x = np.array([0.2, 0.1])
    u = np.array([0.0, 1.0]) / np.sqrt(conformal_ball.matrix(x)[1, 1])
    Y = shooting.ball_mesh(conformal_ball, x, u, 0.8, 64)
    speed = [t @ conformal_ball.matrix(g) @ t for g, t in zip(Y[:, :2], Y[:, 2:])]
    assert np.allclose(speed, 1.0, atol=1e-10)


def test_dense_output_interpolates_trajectory(round2):
    x, v, _ = sphere_pair(3)
    traj = shooting.shoot_constant_curvature(round2, x, v, np.zeros(3), 2.0)
    for s in (0.37, 1.1, 1.93):
        g, t = traj.at(s)
        assert np.allclose(g, np.cos(s) * x + np.sin(s) * v, atol=1e-9)
        assert np.allclose(t, -np.sin(s) * x + np.cos(s) * v, atol=1e-9)
    with pytest.raises(DomainError):
        traj.at(3.0)


@given(seeds, st.floats(0.05, 0.8))
def test_constant_curvature_circle_closes(seed, kappa):
    # a round-sphere curve of constant geodesic curvature kappa is a circle of
    # length 2 pi / sqrt(1 + kappa^2)
    x, v, rng = sphere_pair(seed)
    nu = np.cross(x, v)
    period = 2 * np.pi / np.sqrt(1 + kappa ** 2)
    traj = shooting.shoot_constant_curvature(SphereMetric(2), x, v, kappa * nu, period)
    assert np.allclose(traj.gamma[-1], x, atol=1e-8)
    assert np.allclose(np.linalg.norm(traj.curvature, axis=1), kappa, atol=1e-8)


@given(seeds)
def test_two_point_solve_round_sphere_near_antipode(seed):
    x, v, rng = sphere_pair(seed)
    m = SphereMetric(2)
    y = unit(-x + 0.1 * rng.standard_normal(3))
    sol = shooting.solve_two_point(m, x, v, y)
    assert sol.residual <= 1e-9
    assert np.allclose(sol.trajectory.gamma[-1], y, atol=1e-9)
    assert abs(sol.k @ x) < 1e-12 and abs(sol.k @ v) < 1e-12
    assert shooting.BRANCH[0] <= sol.length <= shooting.BRANCH[1]


def test_two_point_warm_start_converges(conformal_sphere):
    x, v, _ = sphere_pair(11)
    y = unit(-x + np.array([0.05, -0.02, 0.03]))
    cold = shooting.solve_two_point(conformal_sphere, x, v, y)
    y2 = unit(y + 1e-4 * np.array([1.0, 0.0, -1.0]))
    warm = shooting.solve_two_point(conformal_sphere, x, v, y2, guess=(cold.k, cold.length), jac=cold.jac)
    assert warm.iterations <= cold.iterations
    assert warm.residual <= 1e-9


def test_two_point_rejects_far_endpoint(round2):
    x, v, _ = sphere_pair(0)
    with pytest.raises(DomainError):
        shooting.solve_two_point(round2, x, v, x)


def test_shooting_differential_round_formula(round2):
    x, v, rng = sphere_pair(5)
    for _ in range(3):
        xi = rng.standard_normal(3)
        xi -= (xi @ x) * x
        exact = 2 * xi - 3 * (xi @ v) * v
        assert np.allclose(shooting.shooting_differential(round2, x, v, xi), exact, atol=1e-5)


def test_complement_basis_is_deterministic_and_orthonormal():
    x, v, _ = sphere_pair(2, d=4)
    B = shooting.complement_basis([x, v])
    assert B.shape == (3, 5)
    assert np.allclose(B @ B.T, np.eye(3), atol=1e-13)
    assert np.allclose(B @ np.array([x, v]).T, 0.0, atol=1e-13)
    assert np.array_equal(B, shooting.complement_basis([x, v]))


def test_escaping_geodesic_raises():
    # a flat ray of length 5 leaves the radius-2 safety ball
    m = BallMetric(2)
    with pytest.raises(ShootingError):
        shooting.shoot_geodesic(m, np.zeros(2), np.array([1.0, 0.0]), 5.0, safety_radius=2.0)
