"""Theta-networks on the unit sphere: constant-curvature edges, the reduced functional E_g and its certification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from . import shooting
from .ball import junction_angles
from .errors import DomainError, GeonetError
from .results import VerificationReport
from .stiefel import FramePoint, balanced_directions, frame_from_directions, retract, tangent_basis

EPS_BALL = 0.3


def phi_g(metric, x, e1, e2):
    """(x, u, nu): balanced g(x)-unit triple in T_x S^d and its normals, from the frame (x, e1, e2)."""
    x = np.asarray(x, dtype=float)
    u, nu = balanced_directions(metric.matrix(x), np.asarray(e1, float), np.asarray(e2, float))
    return x, u, nu


def z_frame(metric, x, u, nu):
    """g-orthonormal basis (rows) of the complement of the plane span(u) in T_x S^d."""
    base = [x, u[0] / np.linalg.norm(u[0]), nu[0] / np.linalg.norm(nu[0])]
    Z = shooting.complement_basis(base)
    return Z / np.sqrt(metric.factor(x))


def sphere_chart(base, z):
    """y = (base + B z) / |base + B z| with B the deterministic tangent basis at ``base``."""
    base = np.asarray(base, dtype=float)
    z = np.asarray(z, dtype=float)
    if not np.any(z):
        return base
    B = shooting.complement_basis([base])
    p = base + z @ B
    return p / np.linalg.norm(p)


@dataclass(frozen=True, eq=False)
class ThetaParam:
    frame: FramePoint
    y: np.ndarray
    eps_ball: float = EPS_BALL

    def __post_init__(self):
        if self.frame.k != 3:
            raise DomainError("theta frames have three vectors (x, e1, e2)")
        y = np.asarray(self.y, dtype=float)
        if abs(np.linalg.norm(y) - 1.0) > 1e-10:
            raise DomainError("second junction must lie on the sphere")
        if np.linalg.norm(y + self.frame[0]) > self.eps_ball:
            raise DomainError(f"|y + x| = {np.linalg.norm(y + self.frame[0]):.3g} exceeds {self.eps_ball}")
        object.__setattr__(self, "y", y)

    @property
    def x(self):
        return self.frame[0]


@dataclass(frozen=True, eq=False)
class ThetaNetwork:
    param: ThetaParam
    edges: tuple
    u: np.ndarray
    nu: np.ndarray
    z: np.ndarray
    k0: np.ndarray
    kappas: np.ndarray  # (3, d-1): column 0 along nu_j, then along z_i
    lengths: np.ndarray

    @property
    def total_length(self):
        return float(np.sum(self.lengths))

    @property
    def junctions(self):
        return self.param.x, self.param.y


class SphereFunctional:
    """E_g on V_3(R^{d+1}) x S^d with per-edge warm starts for the two-point solves."""

    space = "sphere"

    def __init__(self, metric, n_steps=shooting.SPHERE_MESH, eps_ball=EPS_BALL, fd_step=1e-6,
                 max_iters=30):
        self.metric = metric
        self.n_steps = int(n_steps)
        self.eps_ball = float(eps_ball)
        self.fd_step = float(fd_step)
        self.max_iters = int(max_iters)
        self.dim = metric.dim
        self.inner_dim = metric.dim
        self.calls = 0

    def frame_dim(self):
        return 3 * self.dim - 3

    def point(self, base, z):
        return sphere_chart(base, z)

    def solve_edges(self, frame, y, warm=None):
        x, u, nu = phi_g(self.metric, frame[0], frame[1], frame[2])
        sols = []
        for j in range(3):
            w = None if warm is None else warm[j]
            try:
                sols.append(shooting.solve_two_point(
                    self.metric, x, u[j], y, self.eps_ball, self.n_steps, self.fd_step, self.max_iters,
                    guess=None if w is None else (w.k, w.length),
                    jac=None if w is None else w.jac))
            except GeonetError as exc:
                raise type(exc)(f"edge {j + 1}: {exc}") from exc
        return u, nu, sols

    def evaluate(self, y, frame, warm=None):
        self.calls += 1
        _, _, sols = self.solve_edges(frame, y, warm)
        return float(sum(s.length for s in sols)), sols


def build_theta(metric, param, n_steps=shooting.SPHERE_MESH, warm=None, fd_step=1e-6):
    fun = SphereFunctional(metric, n_steps, param.eps_ball, fd_step)
    u, nu, sols = fun.solve_edges(param.frame, param.y, warm)
    x = param.x
    Z = z_frame(metric, x, u, nu)
    G = metric.matrix(x)
    k0 = np.array([s.k for s in sols])
    kap = np.zeros((3, metric.dim - 1))
    for j in range(3):
        kap[j, 0] = k0[j] @ G @ nu[j]
        for i, zi in enumerate(Z):
            kap[j, i + 1] = k0[j] @ G @ zi
    return ThetaNetwork(param=param, edges=tuple(s.trajectory for s in sols), u=u, nu=nu, z=Z,
                        k0=k0, kappas=kap, lengths=np.array([s.length for s in sols]))


def E_g(metric, param, n_steps=shooting.SPHERE_MESH):
    return SphereFunctional(metric, n_steps, param.eps_ball).evaluate(param.y, param.frame)[0]


# ---------------------------------------------------------------- transported frames and Phi


@dataclass(frozen=True, eq=False)
class TransportedFrame:
    """nu_j(t) and z_i(t) along one edge, sampled on the edge grid: vectors[:, 0] is nu, then the z_i."""

    t: np.ndarray
    vectors: np.ndarray  # (N+1, d-1, d+1)
    kappas: np.ndarray
    trajectory: shooting.Trajectory


def transported_frame(metric, network, j, n_steps=None):
    """Carry (nu_j, z_1, ..., z_{d-2}) along edge j with nabla_tau W = -kappa tau."""
    edge = network.edges[j]
    n_steps = len(edge) - 1 if n_steps is None else n_steps
    W0 = [network.nu[j], *network.z]
    traj = shooting.shoot_constant_curvature(
        metric, network.param.x, network.u[j], network.k0[j], network.lengths[j], n_steps=n_steps,
        transport=W0, kappas=network.kappas[j])
    return TransportedFrame(t=traj.t, vectors=traj.transported, kappas=network.kappas[j].copy(),
                            trajectory=traj)


def phi_vectors(metric, network, xi, h=1e-5):
    """Phi_j for the variation of the frame along the Stiefel tangent ``xi`` (y held fixed).

    Returns (Phi (3, d+1) ambient vectors in T_x S^d, coordinates (3, d-1) on (nu_j, z_i)).
    """
    param = network.param
    xi = np.asarray(getattr(xi, "matrix", xi), dtype=float)
    n_steps = len(network.edges[0]) - 1
    fun = SphereFunctional(metric, n_steps, param.eps_ball)
    warm = fun.solve_edges(param.frame, param.y)[2]
    plus = fun.solve_edges(retract(param.frame, xi, h), param.y, warm)[2]
    minus = fun.solve_edges(retract(param.frame, xi, -h), param.y, warm)[2]
    n = metric.dim + 1
    Phi = np.zeros((3, n))
    coords = np.zeros((3, metric.dim - 1))
    t = np.linspace(0.0, 1.0, n_steps + 1)
    for j in range(3):
        X = (plus[j].nodes[:, :n] - minus[j].nodes[:, :n]) / (2 * h)
        tf = transported_frame(metric, network, j, n_steps)
        fac = np.array([metric.factor(g) for g in tf.trajectory.gamma])
        for m in range(metric.dim - 1):
            phi = fac * np.einsum("ij,ij->i", X, tf.vectors[:, m])
            coords[j, m] = simpson(phi, x=t)
            Phi[j] += coords[j, m] * tf.vectors[0, m]
    return Phi, coords


def phi_closed_form(frame, xi):
    """Round-metric Phi_j at y = -x: (2 (eta_j + <v,u_j> x) + (pi/2)(v - <v,u_j> u_j)) / pi."""
    P = frame.matrix
    xi = np.asarray(getattr(xi, "matrix", xi), dtype=float)
    x, e1, e2 = P[:, 0], P[:, 1], P[:, 2]
    v = xi[:, 0]
    c, s = -0.5, np.sqrt(3.0) / 2
    u = np.array([e1, c * e1 + s * e2, c * e1 - s * e2])
    eta = np.array([xi[:, 1], c * xi[:, 1] + s * xi[:, 2], c * xi[:, 1] - s * xi[:, 2]])
    out = np.zeros((3, len(x)))
    for j in range(3):
        a = v @ u[j]
        out[j] = (2 * (eta[j] + a * x) + 0.5 * np.pi * (v - a * u[j])) / np.pi
    return out


def phi_matrix(metric, network, h=1e-5):
    """Square matrix of xi -> Phi over the orthonormal tangent basis of V_3(R^{d+1})."""
    cols = [phi_vectors(metric, network, B, h)[1].ravel() for B in tangent_basis(network.param.frame)]
    return np.column_stack(cols)


def check_phi_invertibility(metric, param, h=1e-5):
    """Smallest singular value of the finite-difference Phi map at ``param``."""
    network = build_theta(metric, param)
    return float(np.linalg.svd(phi_matrix(metric, network, h), compute_uv=False).min())


def hessian_E0(frame, xi, w):
    """Round-metric second variation at y = -x: -(pi/4) sum_j |v + w - <v + w, u_j> u_j|^2."""
    P = frame.matrix
    xi = np.asarray(getattr(xi, "matrix", xi), dtype=float)
    e1, e2 = P[:, 1], P[:, 2]
    c, s = -0.5, np.sqrt(3.0) / 2
    u = np.array([e1, c * e1 + s * e2, c * e1 - s * e2])
    a = xi[:, 0] + np.asarray(w, dtype=float)
    return float(-0.25 * np.pi * sum(np.sum((a - (a @ uj) * uj) ** 2) for uj in u))


# ---------------------------------------------------------------- inner solve, search, certification


def inner_solve_y(metric, frame, y0=None, tol=1e-8, max_iters=20, jac_step=1e-4, grad_step=1e-5,
                  eps_ball=EPS_BALL, n_steps=shooting.SPHERE_MESH):
    """y_g(x, e): damped Newton on the tangential y-gradient of E_g from y0 (default -x)."""
    from .search import inner_newton

    fun = SphereFunctional(metric, n_steps, eps_ball)
    x = frame[0]
    start = -x if y0 is None else np.asarray(y0, dtype=float)
    return inner_newton(fun, frame, start, tol=tol, max_iters=max_iters, jac_step=jac_step,
                        grad_step=grad_step, trust=eps_ball, center=-x)


def search_critical_sphere(metric, opts, n_steps=shooting.SEARCH_MESH, eps_ball=EPS_BALL,
                           fd_step=1e-6, bvp_max_iters=30):
    """Multistart search for critical points of Psi_g(x, e) = E_g(x, e; y_g(x, e)) on V_3(R^{d+1})."""
    from .search import run_multistart

    fun = SphereFunctional(metric, n_steps, eps_ball, fd_step, bvp_max_iters)
    n = metric.dim + 1

    def make_network(y, frame):
        return build_theta(metric, ThetaParam(frame, y, eps_ball), n_steps, fd_step=fd_step)

    return run_multistart(
        fun, metric, opts, n, 3,
        center_of=lambda frame: -frame[0], start_of=lambda frame: -frame[0],
        make_network=make_network,
        verify=lambda net: verify_theta(metric, net, opts.verify_tol),
        junction_list=lambda net: [net.param.x.tolist(), net.param.y.tolist()],
        alternates=lambda net: [swapped_parameters(net)])


def swapped_parameters(network):
    """The same network described from its second junction: (frame at y, junction x).

    The incoming tangents at y form a balanced triple there, so the roles of x
    and y can be exchanged; the search may land on either description.
    """
    y = network.param.y
    f1, f2 = frame_from_directions(np.array([-e.tau[-1] for e in network.edges]))
    return FramePoint.from_vectors(y, f1, f2), network.param.x


def verify_theta(metric, network, tol=1e-5):
    x, y = network.junctions
    curv = 0.0
    ends = 0.0
    for e in network.edges:
        fac = np.array([metric.factor(g) for g in e.gamma])
        kn = np.sqrt(fac * np.einsum("ij,ij->i", e.curvature, e.curvature))
        curv = max(curv, float(kn.max()))
        ends = max(ends, float(np.abs(e.gamma[0] - x).max()), float(np.abs(e.gamma[-1] - y).max()))
    tx = np.array([e.tau[0] for e in network.edges])
    ty = np.array([-e.tau[-1] for e in network.edges])
    Gx, Gy = metric.matrix(x), metric.matrix(y)
    sx, sy = tx.sum(axis=0), ty.sum(axis=0)
    residuals = {
        "curvature": curv,
        "balance_x": float(np.sqrt(sx @ Gx @ sx)),
        "balance_y": float(np.sqrt(sy @ Gy @ sy)),
        "angle_x": junction_angles(Gx, tx),
        "angle_y": junction_angles(Gy, ty),
        "endpoint_mismatch": ends,
    }
    return VerificationReport.from_residuals(residuals, tol, metric.dim)
