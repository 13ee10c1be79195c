import numpy as np
import pytest
from hypothesis import given, strategies as st

from geonet.errors import DomainError
from geonet.metrics import (BallMetric, SphereMetric, christoffel, covariant_derivative_along,
                            gram_schmidt_g, metric_at, metric_from_spec)

from conftest import poly

coords = st.floats(-0.6, 0.6, allow_nan=False)


def fd_metric_derivative(m, x, h=1e-6):
    return np.stack([(m.matrix(x + h * e) - m.matrix(x - h * e)) / (2 * h) for e in np.eye(len(x))])


def christoffel_from_metric(m, x):
    """Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij), metric derivatives by differences."""
    dG = fd_metric_derivative(m, x)  # dG[l] = d_l g
    Ginv = np.linalg.inv(m.matrix(x))
    low = 0.5 * (np.einsum("ilj->lij", dG) + np.einsum("jli->lij", dG) - dG)
    return np.einsum("kl,lij->kij", Ginv, low)


def test_standard_metrics_are_identity():
    x = np.array([0.1, -0.2])
    assert np.array_equal(BallMetric(2).matrix(x), np.eye(2))
    assert np.allclose(BallMetric(2).christoffel(x), 0.0)
    assert SphereMetric(2).factor(np.array([0.0, 0.0, 1.0])) == 1.0


def test_conformal_christoffel_known_values():
    # f = x1 gives g = exp(2 eps x1) I with constant d phi = (eps, 0)
    m = BallMetric(2, "conformal", 0.01, poly((1.0, (1, 0))))
    gam = m.christoffel(np.zeros(2))
    assert gam[0, 0, 0] == pytest.approx(0.01)
    assert gam[0, 1, 1] == pytest.approx(-0.01)
    assert gam[1, 0, 1] == pytest.approx(0.01)


@given(st.lists(coords, min_size=3, max_size=3), st.sampled_from(["conformal", "bilinear"]))
def test_ball_christoffel_matches_metric_differences(xs, kind):
    x = np.array(xs) / max(1.0, np.linalg.norm(xs) / 0.9)
    if kind == "conformal":
        terms = poly((1.0, (1, 1, 1)), (-0.7, (2, 0, 1)), (0.4, (0, 2, 0)))
    else:
        terms = tuple({"coeff": c, "powers": p, "entry": e} for c, p, e in
                      [(1.0, [1, 0, 0], [0, 0]), (-0.5, [0, 1, 1], [0, 2]), (0.3, [2, 0, 0], [1, 2])])
    m = BallMetric(3, kind, 0.05, terms)
    assert np.allclose(m.christoffel(x), christoffel_from_metric(m, x), atol=1e-8)


@given(st.lists(coords, min_size=2, max_size=2))
def test_metric_symmetric_positive(xs):
    m = BallMetric(2, "bilinear", 0.05, ({"coeff": 1.0, "powers": [1, 1], "entry": [0, 1]},))
    G = m.matrix(np.array(xs))
    assert np.allclose(G, G.T)
    assert np.linalg.eigvalsh(G).min() > 0


def test_matrix_and_derivative_consistent(conformal_ball):
    x = np.array([0.2, -0.1])
    G, dG = conformal_ball.matrix_and_derivative(x)
    assert np.allclose(G, conformal_ball.matrix(x))
    assert np.allclose(dG, fd_metric_derivative(conformal_ball, x), atol=1e-9)


def test_sphere_conformal_gradient_is_tangent_and_correct(conformal_sphere):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(3)
    x /= np.linalg.norm(x)
    phi, gp = conformal_sphere.conformal(x)
    assert abs(gp @ x) < 1e-14
    t = rng.standard_normal(3)
    t -= (t @ x) * x
    h = 1e-6
    curve = lambda s: (x * np.cos(s * np.linalg.norm(t)) + t / np.linalg.norm(t) * np.sin(s * np.linalg.norm(t)))  # noqa: E731
    fd = (conformal_sphere.conformal(curve(h))[0] - conformal_sphere.conformal(curve(-h))[0]) / (2 * h)
    assert fd == pytest.approx(gp @ t, abs=1e-9)


def test_sphere_difference_tensor_symmetric(conformal_sphere):
    C = conformal_sphere.christoffel(np.array([0.0, 0.6, 0.8]))
    assert np.allclose(C, np.swapaxes(C, 1, 2))


def test_covariant_derivative_of_parallel_great_circle_tangent(round2):
    s = 0.3
    gamma = np.array([np.cos(s), np.sin(s), 0.0])
    dgamma = np.array([-np.sin(s), np.cos(s), 0.0])
    acc = -gamma  # ambient second derivative of a great circle
    assert np.allclose(covariant_derivative_along(round2, gamma, dgamma, dgamma, acc), 0.0)


def test_gram_schmidt_g_orthonormal(conformal_ball):
    x = np.array([0.1, 0.3])
    V = gram_schmidt_g(conformal_ball, x, [[1.0, 0.2], [0.3, 1.0]])
    vecs = getattr(V, "vectors", V)
    G = conformal_ball.matrix(x)
    assert np.allclose(vecs @ G @ vecs.T, np.eye(2), atol=1e-12)


@pytest.mark.parametrize("spec", [
    {"space": "ball", "dim": 1, "kind": "standard"},
    {"space": "torus", "dim": 2},
    {"space": "ball", "dim": 2, "kind": "conformal", "epsilon": 0.1, "poly": [{"coeff": 1, "powers": [4, 0]}]},
    {"space": "ball", "dim": 2, "kind": "bilinear", "epsilon": 0.1,
     "poly": [{"coeff": 1, "powers": [0, 0], "entry": [1, 0]}]},
    {"space": "ball", "dim": 2, "kind": "bilinear", "epsilon": 5.0,
     "poly": [{"coeff": -1, "powers": [0, 0], "entry": [0, 0]}]},
    {"space": "sphere", "dim": 2, "kind": "bilinear"},
    {"space": "ball", "dim": 2, "kind": "standard", "epsilon": -1.0},
])
def test_invalid_metric_specs_rejected(spec):
    with pytest.raises(DomainError):
        metric_from_spec(spec)


def test_spec_round_trip(conformal_ball, conformal_sphere):
    for m in (conformal_ball, conformal_sphere):
        again = metric_from_spec(m.to_spec())
        assert again.to_spec() == m.to_spec()


def test_point_checks(round2, flat2):
    with pytest.raises(DomainError):
        metric_at(round2, np.array([1.0, 1.0, 0.0]))
    with pytest.raises(DomainError):
        christoffel(flat2, np.array([1.5, 0.0]))
