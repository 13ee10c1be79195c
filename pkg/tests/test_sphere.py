import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geonet import sphere
from geonet.errors import DomainError
from geonet.metrics import SphereMetric
from geonet.stiefel import project_tangent, random_point, s3_distance

seeds = st.integers(0, 2 ** 32)


def antipodal(fr):
    return sphere.ThetaParam(fr, -fr[0])


def test_round_theta_has_three_half_great_circles(round2):
    fr = random_point(3, 3, 0)
    net = sphere.build_theta(round2, antipodal(fr))
    assert np.allclose(net.lengths, np.pi, atol=1e-9)
    assert np.abs(net.k0).max() < 1e-9
    assert sphere.verify_theta(round2, net).passed


@settings(max_examples=10)
@given(seeds)
def test_round_E_is_3pi_at_antipode(seed):
    fr = random_point(3, 3, seed)
    assert sphere.E_g(SphereMetric(2), antipodal(fr)) == pytest.approx(3 * np.pi, abs=1e-8)


def test_theta_param_validation():
    fr = random_point(3, 3, 0)
    with pytest.raises(DomainError):
        sphere.ThetaParam(fr, fr[0])
    with pytest.raises(DomainError):
        sphere.ThetaParam(fr, -2 * fr[0])
    with pytest.raises(DomainError):
        sphere.ThetaParam(random_point(3, 2, 0), -fr[0])


def test_phi_g_directions_tangent_and_balanced(conformal_sphere):
    fr = random_point(3, 3, 2)
    x, u, nu = sphere.phi_g(conformal_sphere, fr[0], fr[1], fr[2])
    G = conformal_sphere.matrix(x)
    assert np.allclose(u @ x, 0.0, atol=1e-14) and np.allclose(nu @ x, 0.0, atol=1e-14)
    assert np.allclose(np.einsum("ij,jk,ik->i", u, G, u), 1.0)
    assert np.allclose(u.sum(axis=0), 0.0, atol=1e-14)


def test_z_frame_complements_edge_plane():
    m = SphereMetric(3)
    fr = random_point(4, 3, 1)
    x, u, nu = sphere.phi_g(m, fr[0], fr[1], fr[2])
    Z = sphere.z_frame(m, x, u, nu)
    assert Z.shape == (1, 4)
    assert np.allclose(Z @ np.vstack([x, u, nu]).T, 0.0, atol=1e-13)


def test_sphere_chart_stays_on_sphere():
    x = random_point(3, 1, 0)[0]
    y = sphere.sphere_chart(x, np.array([0.1, -0.2]))
    assert np.linalg.norm(y) == pytest.approx(1.0)
    assert sphere.sphere_chart(x, np.zeros(2)) is x


def test_phi_vectors_match_closed_form(round2):
    fr = random_point(3, 3, 4)
    net = sphere.build_theta(round2, antipodal(fr))
    xi = project_tangent(fr, np.random.default_rng(4).standard_normal((3, 3)))
    Phi, coords = sphere.phi_vectors(round2, net, xi)
    assert np.allclose(Phi, sphere.phi_closed_form(fr, xi), atol=1e-5)
    assert coords.shape == (3, 1)


def test_phi_map_invertible_round():
    assert sphere.check_phi_invertibility(SphereMetric(2), antipodal(random_point(3, 3, 8))) > 0.1


def test_transported_frame_stays_normal(conformal_sphere):
    fr = random_point(3, 3, 5)
    y = sphere.sphere_chart(-fr[0], np.array([0.05, 0.02]))
    net = sphere.build_theta(conformal_sphere, sphere.ThetaParam(fr, y))
    tf = sphere.transported_frame(conformal_sphere, net, 0)
    W = tf.vectors[:, 0]
    fac = np.array([conformal_sphere.factor(g) for g in tf.trajectory.gamma])
    assert np.allclose(np.einsum("ij,ij->i", W, tf.trajectory.gamma), 0.0, atol=1e-9)
    assert np.allclose(fac * np.einsum("ij,ij->i", W, tf.trajectory.tau), 0.0, atol=1e-8)
    assert np.allclose(fac * np.einsum("ij,ij->i", W, W), 1.0, atol=1e-8)


def test_hessian_E0_is_nonpositive():
    rng = np.random.default_rng(0)
    fr = random_point(4, 3, 0)
    for _ in range(5):
        xi = project_tangent(fr, rng.standard_normal((4, 3)))
        w = rng.standard_normal(4)
        w -= (w @ fr[0]) * fr[0]
        assert sphere.hessian_E0(fr, xi, w) <= 0.0


def test_inner_solve_perturbed(conformal_sphere):
    fr = random_point(3, 3, 6)
    res = sphere.inner_solve_y(conformal_sphere, fr)
    assert res.grad_norm <= 1e-8
    assert np.linalg.norm(res.junction + fr[0]) < 0.1


def test_off_critical_network_fails_verification(conformal_sphere):
    fr = random_point(3, 3, 7)
    y = sphere.sphere_chart(-fr[0], np.array([0.1, -0.1]))
    rep = sphere.verify_theta(conformal_sphere, sphere.build_theta(conformal_sphere, sphere.ThetaParam(fr, y)))
    assert not rep.passed
    assert rep.residuals["curvature"] > 1e-3
    assert rep.residuals["angle_x"] < 1e-9 and rep.residuals["endpoint_mismatch"] < 1e-8


def test_swapped_description_is_the_same_network(round2):
    # valid for balanced networks; the round antipodal theta is one
    fr = random_point(3, 3, 9)
    net = sphere.build_theta(round2, antipodal(fr))
    frame_y, x = sphere.swapped_parameters(net)
    assert np.allclose(frame_y[0], -fr[0]) and np.allclose(x, fr[0])
    back = sphere.swapped_parameters(sphere.build_theta(round2, sphere.ThetaParam(frame_y, x)))[0]
    assert s3_distance(fr, back, round2) < 1e-8
