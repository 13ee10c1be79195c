import numpy as np
import pytest
from hypothesis import given, strategies as st

from geonet import ball
from geonet.errors import ConvergenceError
from geonet.search import (SearchOptions, _psb_update, fd_gradient, fd_hessian, fd_hessian_forward,
                           find_critical, inertia, inner_newton, schur_hessian)
from geonet.stiefel import random_point, tangent_basis

seeds = st.integers(0, 2 ** 32)


def quadratic(A, b):
    return lambda z: 0.5 * z @ A @ z + b @ z


@given(seeds)
def test_fd_derivatives_exact_on_quadratics(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((4, 4))
    A, b = M + M.T, rng.standard_normal(4)
    f = quadratic(A, b)
    assert np.allclose(fd_gradient(f, 4, 1e-3), b, atol=1e-9)
    assert np.allclose(fd_hessian(f, 4, 1e-3), A, atol=1e-6)
    assert np.allclose(fd_hessian_forward(f, 4, 1e-3), A, atol=1e-6)


@given(seeds)
def test_schur_complement_is_reduced_hessian(seed):
    # for a quadratic, minimising out the first block leaves C - B^T A^{-1} B
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((5, 5))
    H = M @ M.T + np.eye(5)
    S = schur_hessian(H, 2)
    z = rng.standard_normal(3)
    w = -np.linalg.solve(H[:2, :2], H[:2, 2:] @ z)
    full = np.concatenate([w, z])
    assert full @ H @ full == pytest.approx(z @ S @ z)


@given(seeds)
def test_psb_update_satisfies_secant_condition(seed):
    rng = np.random.default_rng(seed)
    p = random_point(3, 2, seed)
    B = tangent_basis(p)
    H = np.eye(3)
    s, g0, g1 = rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3)
    H1 = _psb_update(H, B, B, s, g0, g1)
    assert np.allclose(H1, H1.T)
    assert np.allclose(H1 @ s, g1 - g0)


def test_inertia_counts():
    assert inertia([-1.0, -1e-9, 2e-7, 3.0], 1e-6) == {"negative": 1, "zero": 2, "positive": 1}


class Bowl:
    """Toy functional: (x - c(e))^2 + (distance of e from a target frame) with a known critical point."""

    space = "ball"
    inner_dim = 2

    def __init__(self, target):
        self.target = target
        self.calls = 0

    def frame_dim(self):
        return 1

    def point(self, base, z):
        return np.asarray(base) + np.asarray(z)

    def evaluate(self, x, frame, warm=None):
        self.calls += 1
        c = 0.1 * frame[0]
        return float(np.sum((x - c) ** 2) + 1.0 - (frame[0] @ self.target) ** 2), None


def test_inner_newton_on_toy_bowl():
    fun = Bowl(np.array([1.0, 0.0]))
    frame = random_point(2, 2, 0)
    res = inner_newton(fun, frame, np.zeros(2), 1e-9, 20, 1e-4, 1e-5, 0.25, np.zeros(2))
    assert np.allclose(res.junction, 0.1 * frame[0], atol=1e-8)
    assert res.iterations <= 3


def test_find_critical_on_toy_bowl():
    fun = Bowl(np.array([1.0, 0.0]))
    frame = random_point(2, 2, 3)
    zero = np.zeros(2)
    cp = find_critical(fun, frame, SearchOptions(), lambda f: zero, lambda f: zero)
    assert cp.grad_norm <= 1e-8
    c = abs(cp.frame[0] @ fun.target)  # critical where e1 is parallel or orthogonal to the target
    assert min(abs(c - 1.0), c) < 1e-6


def test_find_critical_gives_up_cleanly():
    fun = Bowl(np.array([1.0, 0.0]))
    zero = np.zeros(2)
    with pytest.raises(ConvergenceError):
        find_critical(fun, random_point(2, 2, 3), SearchOptions(max_outer=0), lambda f: zero, lambda f: zero)


def test_ball_search_standard_metric_single_class(flat2):
    reports, count = ball.search_critical(flat2, SearchOptions(starts=4, seed=1))
    assert count == 1
    assert all(r.converged and r.verification.passed for r in reports)
    assert all(r.value == pytest.approx(3.0, abs=1e-9) for r in reports)


def test_ball_search_perturbed_finds_two_classes(conformal_ball):
    reports, count = ball.search_critical(conformal_ball, SearchOptions(starts=8, seed=0))
    good = [r for r in reports if r.converged and r.verification.passed]
    assert len(good) >= 6 and count >= 2
    for r in good:
        assert r.iterations["inner"] >= 1
        assert sum(r.inertia.values()) == 1
