"""Triods on the unit ball: closed-form flat oracles, the reduced functional F_g and its certification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import shooting
from .errors import DomainError, GeonetError
from .results import VerificationReport
from .stiefel import FramePoint, balanced_directions, chart, tangent_basis

SQ3 = np.sqrt(3.0) / 2
TRUST_RADIUS = 0.25


# ---------------------------------------------------------------- flat closed forms


def directions_flat(e):
    """(u1, u2, u3) as rows: e1, -e1/2 + (sqrt3/2) e2, -e1/2 - (sqrt3/2) e2."""
    e1, e2 = e[0], e[1]
    return np.array([e1, -0.5 * e1 + SQ3 * e2, -0.5 * e1 - SQ3 * e2])


def _proj_sq(x, u):
    """|P_u x|^2 for each row u."""
    x = np.asarray(x, dtype=float)
    return x @ x - (u @ x) ** 2


def L0(x, w):
    """Euclidean exit length of the ray x + t w from the unit ball."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    w = w / np.linalg.norm(w)
    return float(-(x @ w) + np.sqrt(1.0 - _proj_sq(x, w[None])[0]))


def _check_open_ball(x):
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) >= 1.0:
        raise DomainError(f"need |x| < 1, got |x|={np.linalg.norm(x):.6g}")
    return x


def F0(x, e, closed=False):
    """sum_j sqrt(1 - |P_j x|^2). ``closed=True`` admits boundary points |x| = 1."""
    x = np.asarray(x, dtype=float) if closed else _check_open_ball(x)
    if closed and np.linalg.norm(x) > 1.0 + 1e-12:
        raise DomainError(f"need |x| <= 1, got |x|={np.linalg.norm(x):.6g}")
    p = _proj_sq(x, directions_flat(e))
    return float(np.sum(np.sqrt(np.clip(1.0 - p, 0.0, None))))


def F0_grad_x(x, e):
    x = _check_open_ball(x)
    u = directions_flat(e)
    out = np.zeros_like(x)
    for uj in u:
        px = x - (uj @ x) * uj
        out -= px / np.sqrt(1.0 - px @ px)
    return out


def F0_radial_derivative(x, e):
    """d/ds F0(s x, e) at s = 1."""
    x = _check_open_ball(x)
    p = _proj_sq(x, directions_flat(e))
    return float(-np.sum(p / np.sqrt(1.0 - p)))


def F0_hessian_origin(e, v):
    """Quadratic form of the x-Hessian of F0 at the origin: -sum_j |P_j v|^2."""
    return float(-np.sum(_proj_sq(v, directions_flat(e))))


# ---------------------------------------------------------------- psi_g and triods


def psi_g(metric, x, e):
    """(x, u) with u the balanced g(x)-unit triple built from the frame e; also returns the normals."""
    x = np.asarray(x, dtype=float)
    u, nu = balanced_directions(metric.matrix(x), e[0], e[1])
    return x, u, nu


@dataclass(frozen=True, eq=False)
class TriodParam:
    x: np.ndarray
    frame: FramePoint

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if self.frame.k != 2:
            raise DomainError("triod frames have two vectors")
        if x.shape != (self.frame.n,):
            raise DomainError("junction and frame dimensions differ")
        if np.linalg.norm(x) >= 0.5:
            raise DomainError(f"junction must satisfy |x| < 1/2, got |x|={np.linalg.norm(x):.6g}")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True, eq=False)
class Triod:
    param: TriodParam
    edges: tuple
    u: np.ndarray
    nu: np.ndarray
    lengths: np.ndarray

    @property
    def junction(self):
        return self.param.x

    @property
    def total_length(self):
        return float(np.sum(self.lengths))

    @property
    def endpoints(self):
        return np.array([e.gamma[-1] for e in self.edges])


class BallFunctional:
    """F_g on B_{1/2} x V_2(R^d) evaluated on uniform meshes, with warm starts.

    ``evaluate`` returns the value and the per-edge lengths, which can be fed back as
    ``warm`` to evaluations at nearby parameters.
    """

    space = "ball"

    def __init__(self, metric, n_steps=shooting.BALL_MESH, rtol=shooting.RTOL, atol=shooting.ATOL):
        self.metric = metric
        self.n_steps = int(n_steps)
        self.rtol, self.atol = rtol, atol
        self.dim = metric.dim
        self.inner_dim = metric.dim
        self.calls = 0

    def frame_dim(self):
        return 2 * self.dim - 3

    def point(self, base, z):
        return np.asarray(base, dtype=float) + np.asarray(z, dtype=float)

    def edges(self, x, frame, warm=None):
        if np.linalg.norm(x) >= 0.5:
            raise DomainError(f"junction left B_1/2 (|x|={np.linalg.norm(x):.4g})")
        _, u, nu = psi_g(self.metric, x, frame)
        out = []
        for j in range(3):
            guess = None if warm is None else warm[j]
            out.append(shooting.boundary_length(self.metric, x, u[j], guess, self.n_steps,
                                                rtol=self.rtol, atol=self.atol))
        return u, nu, out

    def evaluate(self, x, frame, warm=None):
        self.calls += 1
        _, _, out = self.edges(x, frame, warm)
        lengths = np.array([L for L, _ in out])
        return float(lengths.sum()), lengths


def build_triod(metric, param, n_steps=shooting.BALL_MESH, warm=None):
    fun = BallFunctional(metric, n_steps)
    u, nu, out = fun.edges(param.x, param.frame, warm)
    d = metric.dim
    edges = tuple(shooting.mesh_trajectory(Y, L, d) for L, Y in out)
    return Triod(param=param, edges=edges, u=u, nu=nu,
                 lengths=np.array([L for L, _ in out]))


def F_g(metric, param, n_steps=shooting.BALL_MESH, warm=None):
    return BallFunctional(metric, n_steps).evaluate(param.x, param.frame, warm)[0]


def grad_F_g(metric, param, h_x=1e-5, h_e=1e-5, n_steps=shooting.BALL_MESH):
    """Central-difference gradient: (nabla_x F in R^d, Riemannian nabla_e F as an (d, 2) matrix)."""
    fun = BallFunctional(metric, n_steps)
    x, frame = param.x, param.frame
    _, warm = fun.evaluate(x, frame)
    gx = np.zeros(metric.dim)
    for i in range(metric.dim):
        dx = np.zeros(metric.dim)
        dx[i] = h_x
        gx[i] = (fun.evaluate(x + dx, frame, warm)[0] - fun.evaluate(x - dx, frame, warm)[0]) / (2 * h_x)
    basis = tangent_basis(frame)
    ge = np.zeros((metric.dim, 2))
    for B in basis:
        c = (fun.evaluate(x, chart(frame, [B], [h_e]), warm)[0]
             - fun.evaluate(x, chart(frame, [B], [-h_e]), warm)[0]) / (2 * h_e)
        ge += c * B
    return gx, ge


def inner_solve_x(metric, frame, x0=None, tol=1e-9, max_iters=20, jac_step=1e-4, grad_step=1e-5,
                  trust=TRUST_RADIUS, n_steps=shooting.BALL_MESH):
    """x_g(e): damped Newton on grad_x F_g(., e) from x0 (default 0) inside |x| <= trust."""
    from .search import inner_newton

    fun = BallFunctional(metric, n_steps)
    start = np.zeros(metric.dim) if x0 is None else np.asarray(x0, dtype=float)
    return inner_newton(fun, frame, start, tol=tol, max_iters=max_iters, jac_step=jac_step,
                        grad_step=grad_step, trust=trust, center=np.zeros(metric.dim))


# ---------------------------------------------------------------- certification


def _fd_derivative(samples, h):
    """Fourth-order finite-difference derivative along the first axis of uniform samples."""
    n = samples.shape[0]
    if n < 5:
        raise GeonetError("need at least 5 samples")
    D = np.empty_like(samples)
    D[2:-2] = (samples[:-4] - 8 * samples[1:-3] + 8 * samples[3:-1] - samples[4:]) / (12 * h)
    c0 = np.array([-25, 48, -36, 16, -3]) / (12 * h)
    c1 = np.array([-3, -10, 18, -6, 1]) / (12 * h)
    D[0] = np.tensordot(c0, samples[:5], axes=1)
    D[1] = np.tensordot(c1, samples[:5], axes=1)
    D[-1] = -np.tensordot(c0, samples[::-1][:5], axes=1)
    D[-2] = -np.tensordot(c1, samples[::-1][:5], axes=1)
    return D


def junction_angles(G, tangents):
    """Max |angle_g(t_i, t_j) - 2 pi / 3| over pairs."""
    worst = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            a, b = tangents[i], tangents[j]
            c = (a @ G @ b) / np.sqrt((a @ G @ a) * (b @ G @ b))
            worst = max(worst, abs(np.arccos(np.clip(c, -1.0, 1.0)) - 2 * np.pi / 3))
    return worst


def boundary_tangent_basis(q):
    """Euclidean-orthonormal basis (rows) of the tangent space of the unit sphere at q."""
    q = np.asarray(q, dtype=float)
    Q, _ = np.linalg.qr(np.column_stack([q, np.eye(len(q))]))
    return Q[:, 1:len(q)].T


def verify_triod(metric, triod, tol=1e-5):
    d = metric.dim
    geo = 0.0
    for edge in triod.edges:
        h = edge.t[1] - edge.t[0]
        dtau = _fd_derivative(edge.tau, h)
        for g, t, dt in zip(edge.gamma, edge.tau, dtau):
            acc = dt + np.einsum("kij,i,j->k", metric.christoffel(g), t, t)
            geo = max(geo, float(np.sqrt(acc @ metric.matrix(g) @ acc)))
    x = triod.junction
    Gx = metric.matrix(x)
    t0 = np.array([e.tau[0] for e in triod.edges])
    s = t0.sum(axis=0)
    balance = float(np.sqrt(s @ Gx @ s))
    ortho = 0.0
    start = 0.0
    for e in triod.edges:
        q, tq = e.gamma[-1], e.tau[-1]
        Gq = metric.matrix(q)
        start = max(start, float(np.abs(e.gamma[0] - x).max()))
        for t in boundary_tangent_basis(q):
            ortho = max(ortho, abs(float(tq @ Gq @ t)))
    radius = max(abs(float(np.linalg.norm(e.gamma[-1])) - 1.0) for e in triod.edges)
    residuals = {"geodesic": geo, "balance": balance, "orthogonality": ortho,
                 "angle": junction_angles(Gx, t0), "endpoint_radius": radius,
                 "start_mismatch": start}
    return VerificationReport.from_residuals(residuals, tol, d)


def boundary_map_matrix(metric, param, h=1e-5, n_steps=shooting.BALL_MESH):
    """Matrix of xi -> (dq_j . xi)_j over an orthonormal basis of T(B x V_2), in boundary-tangent coordinates."""
    fun = BallFunctional(metric, n_steps)
    x, frame = param.x, param.frame
    _, _, base = fun.edges(x, frame)
    warm = [L for L, _ in base]
    q0 = [Y[-1, :metric.dim] for _, Y in base]
    tb = [boundary_tangent_basis(q) for q in q0]
    d = metric.dim

    def ends(xx, fr):
        return [Y[-1, :d] for _, Y in fun.edges(xx, fr, warm)[2]]

    cols = []
    for i in range(d):
        dx = np.zeros(d)
        dx[i] = h
        qp, qm = ends(x + dx, frame), ends(x - dx, frame)
        cols.append(np.concatenate([tb[j] @ (qp[j] - qm[j]) / (2 * h) for j in range(3)]))
    for B in tangent_basis(frame):
        qp, qm = ends(x, chart(frame, [B], [h])), ends(x, chart(frame, [B], [-h]))
        cols.append(np.concatenate([tb[j] @ (qp[j] - qm[j]) / (2 * h) for j in range(3)]))
    return np.column_stack(cols)


def boundary_map_sigma_min(metric, param, h=1e-5):
    return float(np.linalg.svd(boundary_map_matrix(metric, param, h), compute_uv=False).min())


def search_critical(metric, opts, n_steps=shooting.BALL_MESH, rtol=shooting.RTOL, atol=shooting.ATOL):
    """Multistart critical-point search of Phi_g(e) = F_g(x_g(e), e) over V_2(R^d).

    Returns (reports, number of S3 classes). Failed starts are recorded in the reports.
    """
    from .search import run_multistart

    fun = BallFunctional(metric, n_steps, rtol, atol)
    d = metric.dim
    zero = np.zeros(d)

    def make_network(x, frame):
        return build_triod(metric, TriodParam(x, frame), n_steps)

    return run_multistart(
        fun, metric, opts, d, 2,
        center_of=lambda frame: zero, start_of=lambda frame: zero,
        make_network=make_network,
        verify=lambda tri: verify_triod(metric, tri, opts.verify_tol),
        junction_list=lambda tri: [tri.junction.tolist()])
