"""Closed-form checks at the standard metrics (epsilon = 0).

Each check samples seeded random data, runs the numerical pipeline and
compares against an exact formula; it returns an :class:`OracleResult`
holding the worst error seen.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import ball, shooting, sphere
from .metrics import BallMetric, SphereMetric
from .search import inertia, joint_hessian
from .stiefel import project_tangent, random_point, retract, tangent_basis


@dataclass(frozen=True)
class OracleResult:
    name: str
    error: float
    tol: float
    seconds: float
    passed: bool
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name:<28} err={self.error:.3e}  tol={self.tol:.0e}  {self.seconds:6.2f}s{extra}"


def _result(name, error, tol, t0, ok=True, detail=""):
    return OracleResult(name, float(error), tol, time.perf_counter() - t0,
                        bool(ok and error <= tol), detail)


def _ball_point(rng, d, radius):
    x = rng.standard_normal(d)
    return x / np.linalg.norm(x) * radius * rng.uniform() ** (1.0 / d)


def _tangent(rng, x):
    w = rng.standard_normal(x.shape[0])
    return w - (w @ x) * x


def _unit(v):
    return v / np.linalg.norm(v)


def boundary_hit(dim=2, samples=100, seed=0, tol=1e-10):
    """Numeric exit length from the unit ball against the straight-line formula."""
    t0 = time.perf_counter()
    rng = np.random.default_rng([seed, 1])
    m = BallMetric(dim)
    err = 0.0
    for _ in range(samples):
        x = _ball_point(rng, dim, 0.5)
        w = rng.standard_normal(dim)
        err = max(err, abs(shooting.hit_boundary(m, x, w).length - ball.L0(x, w)))
    return _result(f"boundary_hit[d={dim}]", err, tol, t0)


def f0_pipeline(dim=2, samples=100, seed=0, tol=1e-9):
    """Shooting pipeline F_g at the flat metric against the closed form F_0."""
    t0 = time.perf_counter()
    rng = np.random.default_rng([seed, 2])
    m = BallMetric(dim)
    err = 0.0
    for i in range(samples):
        e = random_point(dim, 2, [seed, 2, i])
        x = _ball_point(rng, dim, 0.499)
        err = max(err, abs(ball.F_g(m, ball.TriodParam(x, e)) - ball.F0(x, e)))
    e = random_point(dim, 2, [seed, 2, samples])
    origin = abs(ball.F_g(m, ball.TriodParam(np.zeros(dim), e)) - 3.0)
    # boundary: F_0 = sum_j |<u_j, x>| on |x| = 1, maximal (= 2) at x = +-u_j
    u = ball.directions_flat(e)
    at_u = max(abs(ball.F0(s * uj, e, closed=True) - 2.0) for uj in u for s in (1.0, -1.0))
    th = np.linspace(0.0, 2 * np.pi, 3601)
    circle = np.outer(np.cos(th), e[0]) + np.outer(np.sin(th), e[1])
    others = rng.standard_normal((500, dim))
    others /= np.linalg.norm(others, axis=1)[:, None]
    sup = max(ball.F0(p, e, closed=True) for p in np.vstack([circle, others]))
    over = max(0.0, sup - 2.0)
    detail = f"pipeline={err:.1e} origin={origin:.1e} at_u={at_u:.1e} sup-2={sup - 2:.1e}"
    return _result(f"f0_pipeline[d={dim}]", max(err, origin, at_u, over), tol, t0, detail=detail)


def ball_hessian(dim=2, samples=20, seed=0, tol=1e-4, h=1e-3):
    """Second difference of the pipeline at x = 0 against -sum_j |P_j v|^2; also v = e_1 gives -3/2."""
    t0 = time.perf_counter()
    rng = np.random.default_rng([seed, 3])
    m = BallMetric(dim)
    e = random_point(dim, 2, [seed, 3])
    fun = ball.BallFunctional(m)
    f0, warm = fun.evaluate(np.zeros(dim), e)

    def q(v):
        return (fun.evaluate(h * v, e, warm)[0] - 2 * f0 + fun.evaluate(-h * v, e, warm)[0]) / h ** 2

    err = 0.0
    for _ in range(samples):
        v = _unit(rng.standard_normal(dim))
        err = max(err, abs(q(v) - ball.F0_hessian_origin(e, v)))
    e1 = abs(q(e[0]) + 1.5)
    return _result(f"ball_hessian[d={dim}]", max(err, e1), tol, t0, detail=f"q(e1)+3/2={e1:.1e}")


def round_sphere(dim=2, seed=0, tol=1e-9):
    """Great circles reach the antipode at length pi; the two-point solver returns k = 0, L = pi."""
    t0 = time.perf_counter()
    rng = np.random.default_rng([seed, 4])
    m = SphereMetric(dim)
    x = _unit(rng.standard_normal(dim + 1))
    v = _unit(_tangent(rng, x))
    traj = shooting.shoot_constant_curvature(m, x, v, np.zeros(dim + 1), np.pi)
    hit = float(np.linalg.norm(traj.gamma[-1] + x))
    sol = shooting.solve_two_point(m, x, v, -x)
    k = float(np.linalg.norm(sol.k))
    dl = abs(sol.length - np.pi)
    return _result(f"round_sphere[d={dim}]", max(hit, k, dl), tol, t0,
                   detail=f"|gamma(pi)+x|={hit:.1e} |k|={k:.1e} |L-pi|={dl:.1e}")


def shooting_differential(dim=2, samples=20, seed=0, tol=1e-5):
    """Finite-difference d gamma(pi; 0) . xi against 2 xi - 3 <xi, v> v."""
    t0 = time.perf_counter()
    rng = np.random.default_rng([seed, 5])
    m = SphereMetric(dim)
    x = _unit(rng.standard_normal(dim + 1))
    v = _unit(_tangent(rng, x))
    err = 0.0
    for _ in range(samples):
        xi = _tangent(rng, x)
        exact = 2 * xi - 3 * (xi @ v) * v
        err = max(err, float(np.abs(shooting.shooting_differential(m, x, v, xi) - exact).max()))
    return _result(f"shooting_differential[d={dim}]", err, tol, t0)


def sphere_hessian(dim=2, samples=5, seed=0, tol_value=1e-8, tol=1e-3, cutoff=1e-6, h=1e-3):
    """E_0 = 3 pi at y = -x, its second variation formula, and nullity 3d - 3."""
    t0 = time.perf_counter()
    rng = np.random.default_rng([seed, 6])
    m = SphereMetric(dim)
    fr = random_point(dim + 1, 3, [seed, 6])
    x = fr[0]
    fun = sphere.SphereFunctional(m)
    e0, warm = fun.evaluate(-x, fr)
    value_err = abs(e0 - 3 * np.pi)
    err = 0.0
    for _ in range(samples):
        xi = project_tangent(fr, rng.standard_normal((dim + 1, 3)))
        w = _tangent(rng, x)

        def E(t):
            y = _unit(-x + t * w)
            return fun.evaluate(y, retract(fr, xi, t), warm)[0]

        fd = (E(h) - 2 * e0 + E(-h)) / h ** 2
        err = max(err, abs(fd - sphere.hessian_E0(fr, xi, w)))
    H = joint_hessian(fun, -x, fr, warm, tangent_basis(fr), 3e-4, e0)
    nul = inertia(np.linalg.eigvalsh(H), cutoff)["zero"]
    ok = value_err <= tol_value and nul == 3 * dim - 3
    detail = f"|E0-3pi|={value_err:.1e} nullity={nul} (expect {3 * dim - 3})"
    return _result(f"sphere_hessian[d={dim}]", err, tol, t0, ok=ok, detail=detail)


def phi_oracle(dim=2, samples=5, frames=20, seed=0, tol=1e-5, sigma_floor=0.1):
    """Finite-difference Phi_j against the round-metric formula; sigma_min of the Phi map."""
    t0 = time.perf_counter()
    rng = np.random.default_rng([seed, 7])
    m = SphereMetric(dim)
    err = 0.0
    fr = random_point(dim + 1, 3, [seed, 7])
    net = sphere.build_theta(m, sphere.ThetaParam(fr, -fr[0]))
    for _ in range(samples):
        xi = project_tangent(fr, rng.standard_normal((dim + 1, 3)))
        Phi, _ = sphere.phi_vectors(m, net, xi)
        err = max(err, float(np.abs(Phi - sphere.phi_closed_form(fr, xi)).max()))
    sig = min(sphere.check_phi_invertibility(m, sphere.ThetaParam(f, -f[0]))
              for f in (random_point(dim + 1, 3, [seed, 7, i]) for i in range(frames)))
    return _result(f"phi_oracle[d={dim}]", err, tol, t0, ok=sig >= sigma_floor,
                   detail=f"sigma_min={sig:.4f}")


SUITE = (boundary_hit, f0_pipeline, ball_hessian, round_sphere, shooting_differential,
         sphere_hessian, phi_oracle)


def run_suite(dims=(2, 3), seed=0):
    return [check(dim=d, seed=seed) for check in SUITE for d in dims]
