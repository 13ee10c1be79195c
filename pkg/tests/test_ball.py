import numpy as np
import pytest
from hypothesis import given, strategies as st

from geonet import ball
from geonet.errors import DomainError
from geonet.metrics import BallMetric
from geonet.stiefel import chart, random_point, tangent_basis

seeds = st.integers(0, 2 ** 32)


def junction(rng, d, radius=0.45):
    x = rng.standard_normal(d)
    return x / np.linalg.norm(x) * radius * rng.uniform()


@given(seeds, st.sampled_from([2, 3, 4]))
def test_flat_directions_are_balanced(seed, d):
    e = random_point(d, 2, seed)
    u = ball.directions_flat(e)
    assert np.allclose(u.sum(axis=0), 0.0, atol=1e-14)
    assert np.allclose(u @ u.T, 1.5 * np.eye(3) - 0.5, atol=1e-14)


@given(seeds)
def test_F0_matches_sum_of_ray_lengths(seed):
    rng = np.random.default_rng(seed)
    e = random_point(3, 2, seed)
    x = junction(rng, 3)
    direct = sum(ball.L0(x, u) for u in ball.directions_flat(e))
    assert ball.F0(x, e) == pytest.approx(direct, abs=1e-13)


@given(seeds)
def test_F0_gradient_matches_differences(seed):
    rng = np.random.default_rng(seed)
    e = random_point(3, 2, seed)
    x = junction(rng, 3)
    h = 1e-6
    fd = [(ball.F0(x + h * b, e) - ball.F0(x - h * b, e)) / (2 * h) for b in np.eye(3)]
    assert np.allclose(ball.F0_grad_x(x, e), fd, atol=1e-8)


@given(seeds)
def test_F0_radially_decreasing_and_at_most_three(seed):
    rng = np.random.default_rng(seed)
    e = random_point(2, 2, seed)
    x = junction(rng, 2, 0.9)
    assert ball.F0_radial_derivative(x, e) <= 0.0
    assert ball.F0(x, e) <= 3.0


def test_F0_boundary_values():
    e = random_point(2, 2, 0)
    for u in ball.directions_flat(e):
        assert ball.F0(u, e, closed=True) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        ball.F0(np.array([1.0, 0.0]), e)


def test_hessian_origin_along_first_frame_vector():
    e = random_point(3, 2, 4)
    assert ball.F0_hessian_origin(e, e[0]) == pytest.approx(-1.5)
    normal = np.cross(e[0], e[1])
    assert ball.F0_hessian_origin(e, normal) == pytest.approx(-3.0)


@given(seeds)
def test_pipeline_matches_closed_form_at_flat_metric(seed):
    rng = np.random.default_rng(seed)
    e = random_point(2, 2, seed)
    x = junction(rng, 2)
    assert ball.F_g(BallMetric(2), ball.TriodParam(x, e)) == pytest.approx(ball.F0(x, e), abs=1e-9)


def test_triod_param_validation():
    e = random_point(3, 2, 0)
    with pytest.raises(DomainError):
        ball.TriodParam(np.array([0.5, 0.0, 0.0]), e)
    with pytest.raises(DomainError):
        ball.TriodParam(np.zeros(2), e)
    with pytest.raises(DomainError):
        ball.TriodParam(np.zeros(3), random_point(3, 3, 0))


def test_grad_F_g_flat_matches_closed_form():
    rng = np.random.default_rng(1)
    e = random_point(2, 2, 1)
    x = junction(rng, 2)
    gx, ge = ball.grad_F_g(BallMetric(2), ball.TriodParam(x, e))
    assert np.allclose(gx, ball.F0_grad_x(x, e), atol=1e-8)
    h = 1e-6
    for B in tangent_basis(e):
        fd = (ball.F0(x, chart(e, [B], [h])) - ball.F0(x, chart(e, [B], [-h]))) / (2 * h)
        assert np.sum(ge * B) == pytest.approx(fd, abs=1e-8)


def test_inner_solve_perturbed_converges_fast(conformal_ball):
    e = random_point(2, 2, 3)
    res = ball.inner_solve_x(conformal_ball, e)
    assert res.grad_norm <= 1e-9
    assert res.iterations <= 10
    assert np.linalg.norm(res.junction) < 0.05


def test_flat_triod_verifies_and_perturbed_frame_does_not(flat2):
    e = random_point(2, 2, 0)
    tri = ball.build_triod(flat2, ball.TriodParam(np.zeros(2), e))
    rep = ball.verify_triod(flat2, tri)
    assert rep.passed, rep.residuals
    assert tri.total_length == pytest.approx(3.0, abs=1e-12)
    off = ball.build_triod(flat2, ball.TriodParam(np.array([0.1, 0.05]), e))
    bad = ball.verify_triod(flat2, off)
    assert not bad.passed and bad.residuals["orthogonality"] > 1e-3


def test_conformal_geodesics_pass_geodesic_residual(conformal_ball):
    e = random_point(2, 2, 2)
    tri = ball.build_triod(conformal_ball, ball.TriodParam(np.array([0.05, -0.1]), e))
    rep = ball.verify_triod(conformal_ball, tri)
    assert rep.residuals["geodesic"] < 1e-6
    assert rep.residuals["balance"] < 1e-12
    assert rep.residuals["angle"] < 1e-9
    assert rep.residuals["endpoint_radius"] < 1e-12


def test_fd_derivative_is_fourth_order():
    t = np.linspace(0.0, 1.0, 41)
    D = ball._fd_derivative(np.sin(t)[:, None], t[1] - t[0])
    assert np.abs(D[:, 0] - np.cos(t)).max() < 1e-6


def test_boundary_map_flat_origin_is_invertible(flat2):
    e = random_point(2, 2, 0)
    assert ball.boundary_map_sigma_min(flat2, ball.TriodParam(np.zeros(2), e)) > 0.1
