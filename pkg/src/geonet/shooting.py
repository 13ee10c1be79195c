"""Geodesic and constant-curvature shooting.

Two integration modes share the compiled Dormand-Prince kernel:

* adaptive (``rtol``/``atol``) with dense output, used for stand-alone
  trajectories and to locate the first boundary crossing;
* a fixed uniform mesh of ``n_steps`` steps over ``[0, L]``. Its nodes are a
  smooth function of the initial data and of ``L``, so reduced functionals
  built on it can be finite-differenced without step-selection noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ConvergenceError, DomainError, ShootingError, TransversalityError
from .metrics import check_point

RTOL = 1e-10
ATOL = 1e-12
MAX_STEPS = 20000
SAFETY_RADIUS = 2.0
BALL_HORIZON = 4.0
MIN_MARGIN = 0.1
BALL_MESH = 32
SPHERE_MESH = 80
SEARCH_MESH = 48  # sphere multistart: ~3e-9 length error, cheaper finite differences
BRANCH = (0.5 * np.pi, 1.5 * np.pi)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of a unit-speed curve; ``t`` is arclength.

    ``curvature`` is the Frenet-Serret curvature vector (sphere runs only) and
    ``transported`` holds fields carried along the curve, shape (N+1, m, n).
    """

    t: np.ndarray
    gamma: np.ndarray
    tau: np.ndarray
    curvature: np.ndarray | None = None
    transported: np.ndarray | None = None
    order: int = 4
    _steps: tuple | None = field(default=None, repr=False)

    @property
    def length(self):
        return float(self.t[-1])

    def __len__(self):
        return self.t.shape[0]

    def at(self, s):
        """State (gamma, tau) at arclength ``s`` from the dense output.

        Adaptive runs use the Dormand-Prince interpolant; uniform runs fall
        back to cubic Hermite interpolation on (gamma, tau).
        """
        s = float(s)
        if not (0.0 <= s <= self.length + 1e-14):
            raise DomainError(f"s={s} outside [0, {self.length}]")
        i = int(np.clip(np.searchsorted(self.t, s, side="right") - 1, 0, len(self.t) - 2))
        h = self.t[i + 1] - self.t[i]
        th = (s - self.t[i]) / h
        n = self.gamma.shape[1]
        if self._steps is not None:
            ys, Ks = self._steps
            y, _ = K.dense_eval(ys[i], Ks[i], h, th)
            return y[:n], y[n:2 * n]
        p0, p1 = self.gamma[i], self.gamma[i + 1]
        m0, m1 = self.tau[i] * h, self.tau[i + 1] * h
        h00 = 2 * th ** 3 - 3 * th ** 2 + 1
        h10 = th ** 3 - 2 * th ** 2 + th
        h01 = -2 * th ** 3 + 3 * th ** 2
        h11 = th ** 3 - th ** 2
        dh00 = (6 * th ** 2 - 6 * th) / h
        dh10 = (3 * th ** 2 - 4 * th + 1) / h
        dh01 = (-6 * th ** 2 + 6 * th) / h
        dh11 = (3 * th ** 2 - 2 * th) / h
        return (h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1,
                dh00 * p0 + dh10 * m0 + dh01 * p1 + dh11 * m1)

    def resample(self, n_points):
        """Positions at ``n_points`` equally spaced arclengths."""
        s = np.linspace(0.0, self.length, n_points)
        return s, np.array([self.at(si)[0] for si in s])


@dataclass(frozen=True, eq=False)
class BoundaryHit:
    length: float
    point: np.ndarray
    tangent: np.ndarray
    margin: float
    trajectory: Trajectory | None = None


def _status_error(status, what):
    msg = {2: "left the safety ball", 3: "step size collapsed", 4: "too many steps"}
    return ShootingError(f"{what}: {msg.get(status, f'status {status}')}")


def _unit_g(metric, x, w):
    w = np.asarray(w, dtype=float)
    nrm = np.sqrt(w @ metric.matrix(x) @ w)
    if not np.isfinite(nrm) or nrm == 0:
        raise DomainError("direction must be nonzero")
    return w / nrm


# ---------------------------------------------------------------- ball


def _ball_y0(metric, x, w):
    x = check_point(metric, x)
    return np.concatenate([x, _unit_g(metric, x, w)])


def shoot_geodesic(metric, x, w, horizon, rtol=RTOL, atol=ATOL, safety_radius=None):
    """Adaptive geodesic from x with initial direction w (normalised in g(x)) up to ``horizon``.

    With ``safety_radius`` set, leaving that Euclidean ball raises :class:`ShootingError`.
    """
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) > 0.5 + 1e-12:
        raise DomainError(f"junction must satisfy |x| <= 1/2, got |x|={np.linalg.norm(x):.6g}")
    y0 = _ball_y0(metric, x, w)
    radius = np.inf if safety_radius is None else float(safety_radius)
    status, ts, ys, Ks = K.integrate_adaptive(
        metric.kernel_params(), y0, float(horizon), rtol, atol, MAX_STEPS, 0,
        np.isfinite(radius), radius if np.isfinite(radius) else 1e300)
    if status == 1:
        # the ball event is only armed to enforce the safety radius; keep going
        status, ts, ys, Ks = K.integrate_adaptive(
            metric.kernel_params(), y0, float(horizon), rtol, atol, MAX_STEPS, 0,
            False, 1e300)
        if np.isfinite(radius) and np.max(np.linalg.norm(ys[:, :metric.dim], axis=1)) > radius:
            raise ShootingError("geodesic left the safety ball")
    if status != 0:
        raise _status_error(status, "shoot_geodesic")
    d = metric.dim
    return Trajectory(t=ts.copy(), gamma=ys[:, :d].copy(), tau=ys[:, d:].copy(), order=4,
                      _steps=(ys.copy(), Ks.copy()))


def hit_boundary(metric, x, w, rtol=RTOL, atol=ATOL, keep_trajectory=False):
    """First crossing of |gamma| = 1 for the unit-speed geodesic from x along w.

    The crossing is bracketed on accepted steps and polished by Newton on the
    dense output until |S| <= 1e-12 with S = (|gamma|^2 - 1) / 2.
    """
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) > 0.5 + 1e-12:
        raise DomainError(f"junction must satisfy |x| <= 1/2, got |x|={np.linalg.norm(x):.6g}")
    d = metric.dim
    y0 = _ball_y0(metric, x, w)
    status, ts, ys, Ks = K.integrate_adaptive(
        metric.kernel_params(), y0, BALL_HORIZON, rtol, atol, MAX_STEPS, 0,
        True, SAFETY_RADIUS)
    if status == 0:
        raise ShootingError("no boundary crossing before the safety horizon")
    if status != 1:
        raise _status_error(status, "hit_boundary")
    i = len(ts) - 2
    h = ts[i + 1] - ts[i]
    # secant start inside the bracket, then Newton on the interpolant
    r0 = 0.5 * (ys[i, :d] @ ys[i, :d] - 1.0)
    r1 = 0.5 * (ys[i + 1, :d] @ ys[i + 1, :d] - 1.0)
    th = float(np.clip(r0 / (r0 - r1), 0.0, 1.0)) if r1 != r0 else 1.0
    for _ in range(50):
        y, dy = K.dense_eval(ys[i], Ks[i], h, th)
        S = 0.5 * (y[:d] @ y[:d] - 1.0)
        dS = y[:d] @ dy[:d]  # dS/dt
        if dS <= 0:
            raise TransversalityError("boundary crossing is not transversal")
        step = S / (dS * h)
        th = float(np.clip(th - step, 0.0, 1.0))
        if abs(S) <= 1e-14 or abs(step) <= 1e-15:
            break
    y, dy = K.dense_eval(ys[i], Ks[i], h, th)
    S = 0.5 * (y[:d] @ y[:d] - 1.0)
    if abs(S) > 1e-12:
        raise ShootingError(f"boundary Newton stalled at |S|={abs(S):.3g}")
    L = ts[i] + th * h
    q, tau = y[:d], y[d:]
    margin = float(q @ tau)
    if margin < MIN_MARGIN:
        raise TransversalityError(f"transversality margin {margin:.3g} < {MIN_MARGIN}")
    traj = None
    if keep_trajectory:
        tt = np.append(ts[:i + 1], L)
        yy = np.vstack([ys[:i + 1], y])
        traj = Trajectory(t=tt, gamma=yy[:, :d].copy(), tau=yy[:, d:].copy(), order=4)
    return BoundaryHit(length=float(L), point=q.copy(), tangent=tau.copy(), margin=margin,
                       trajectory=traj)


def ball_mesh(metric, x, u, length, n_steps=BALL_MESH, params=None):
    """Uniform-mesh nodes (n_steps+1, 2d) of the geodesic from x with g-unit velocity u."""
    prm = metric.kernel_params() if params is None else params
    y0 = np.concatenate([np.asarray(x, dtype=float), np.asarray(u, dtype=float)])
    return K.integrate_uniform(prm, y0, float(length), int(n_steps), 0)


def boundary_length(metric, x, u, guess=None, n_steps=BALL_MESH, tol=1e-15, max_iters=12, rtol=RTOL,
                    atol=ATOL):
    """Exit length of the uniform-mesh geodesic from x along the g-unit vector u.

    Newton on S(L) = (|gamma_N(L)|^2 - 1) / 2 with S'(L) ~ <gamma, tau>, seeded by
    ``guess`` or by :func:`hit_boundary`. The result is smooth in (x, u).
    Returns (L, nodes).
    """
    if guess is None:
        guess = hit_boundary(metric, x, u, rtol, atol).length
    prm = metric.kernel_params()
    d = metric.dim
    L = float(guess)
    best = None
    for _ in range(max_iters):
        Y = ball_mesh(metric, x, u, L, n_steps, prm)
        q, tau = Y[-1, :d], Y[-1, d:]
        S = 0.5 * (q @ q - 1.0)
        dS = q @ tau
        if dS < MIN_MARGIN:
            raise TransversalityError(f"transversality margin {dS:.3g} < {MIN_MARGIN}")
        if best is not None and abs(S) >= abs(best[0]) and abs(best[0]) <= 1e-13:
            return best[1], best[2]
        best = (S, L, Y)
        if abs(S) <= tol:
            return L, Y
        L = L - S / dS
        if not (0.0 < L < BALL_HORIZON):
            raise ShootingError(f"boundary Newton left the admissible range (L={L:.3g})")
    if abs(best[0]) <= 1e-12:
        return best[1], best[2]
    raise ConvergenceError("boundary length Newton did not converge", abs(best[0]), max_iters)


def mesh_trajectory(Y, length, d, curvature=False, transported=0):
    """Wrap uniform-mesh nodes as a :class:`Trajectory`."""
    n = Y.shape[0] - 1
    t = np.linspace(0.0, length, n + 1)
    k = Y[:, 2 * d:3 * d].copy() if curvature else None
    W = None
    if transported:
        W = Y[:, 3 * d:(3 + transported) * d].reshape(n + 1, transported, d).copy()
    return Trajectory(t=t, gamma=Y[:, :d].copy(), tau=Y[:, d:2 * d].copy(), curvature=k,
                      transported=W, order=3)


# ---------------------------------------------------------------- sphere


def _sphere_state(metric, x, v, k0, extra=()):
    x = check_point(metric, x)
    v = np.asarray(v, dtype=float)
    if abs(v @ x) > 1e-9:
        raise DomainError("initial direction is not tangent to the sphere")
    tau = _unit_g(metric, x, v)
    k0 = np.zeros_like(x) if k0 is None else np.asarray(k0, dtype=float)
    if abs(k0 @ x) > 1e-9:
        raise DomainError("curvature vector is not tangent to the sphere")
    if abs(k0 @ metric.matrix(x) @ tau) > 1e-9 * max(1.0, np.linalg.norm(k0)):
        raise DomainError("curvature vector is not g-orthogonal to the direction")
    return np.concatenate([x, tau, k0, *[np.asarray(w, dtype=float) for w in extra]])


def sphere_mesh(metric, y0, length, n_steps=SPHERE_MESH, kappas=None, params=None):
    prm = metric.kernel_params(kappas) if params is None else params
    return K.integrate_uniform(prm, y0, float(length), int(n_steps), metric.dim + 1)


def check_sphere_invariants(metric, traj, factor=10.0):
    """Maximum drift of the Frenet-Serret invariants; raises beyond ``factor`` x tolerance."""
    fac = np.array([metric.factor(g) for g in traj.gamma])
    speed = np.abs(fac * np.einsum("ij,ij->i", traj.tau, traj.tau) - 1.0).max()
    radius = np.abs(np.linalg.norm(traj.gamma, axis=1) - 1.0).max()
    ortho = np.abs(fac * np.einsum("ij,ij->i", traj.tau, traj.curvature)).max()
    kn = np.sqrt(fac * np.einsum("ij,ij->i", traj.curvature, traj.curvature))
    drift = {"unit_speed": float(speed), "radius": float(radius), "k_tau": float(ortho),
             "k_norm": float(kn.max() - kn.min())}
    limits = {"unit_speed": 1e-8, "radius": 1e-9, "k_tau": 1e-8, "k_norm": 1e-7}
    for key, lim in limits.items():
        if drift[key] > factor * lim:
            raise ShootingError(f"invariant drift {key}={drift[key]:.3g} exceeds {factor * lim:.3g}")
    return drift


def shoot_constant_curvature(metric, x, v, k0, horizon, n_steps=None, rtol=RTOL, atol=ATOL,
                             transport=(), kappas=None, check=True):
    """Integrate nabla_tau tau = k, nabla_tau k = -|k|^2 tau from (x, v, k0) over arclength ``horizon``.

    ``n_steps=None`` selects the adaptive integrator; otherwise a uniform mesh.
    Optional ``transport`` vectors W_m are carried with nabla_tau W_m = -kappas[m] tau.
    """
    transport = list(transport)
    if kappas is None:
        kappas = np.zeros(len(transport))
    kappas = np.asarray(kappas, dtype=float)
    if kappas.shape != (len(transport),):
        raise DomainError("need one kappa per transported vector")
    y0 = _sphere_state(metric, x, v, k0, transport)
    n = metric.dim + 1
    prm = metric.kernel_params(kappas)
    if n_steps is None:
        status, ts, ys, Ks = K.integrate_adaptive(
            prm, y0, float(horizon), rtol, atol, MAX_STEPS, n, False, 1e300)
        if status != 0:
            raise _status_error(status, "shoot_constant_curvature")
        traj = Trajectory(t=ts.copy(), gamma=ys[:, :n].copy(), tau=ys[:, n:2 * n].copy(),
                          curvature=ys[:, 2 * n:3 * n].copy(),
                          transported=(ys[:, 3 * n:].reshape(len(ts), len(transport), n).copy()
                                       if transport else None),
                          order=4, _steps=(ys.copy(), Ks.copy()))
    else:
        Y = sphere_mesh(metric, y0, horizon, n_steps, params=prm)
        traj = mesh_trajectory(Y, float(horizon), n, curvature=True, transported=len(transport))
    if check:
        check_sphere_invariants(metric, traj)
    return traj


def complement_basis(vectors):
    """Deterministic Euclidean-orthonormal basis (rows) of the complement of orthonormal ``vectors``.

    Greedy Gram-Schmidt over the coordinate axes, taking the axis with the
    largest remaining component first (ties broken by index).
    """
    Q = [np.asarray(v, dtype=float) for v in vectors]
    n = Q[0].shape[0]
    out = []
    axes = np.eye(n)
    for _ in range(n - len(Q)):
        best, best_nrm = None, -1.0
        for a in axes:
            r = a.copy()
            for _ in range(2):
                for q in Q:
                    r = r - (q @ r) * q
            nrm = np.linalg.norm(r)
            if nrm > best_nrm + 1e-12:
                best, best_nrm = r, nrm
        b = best / best_nrm
        Q.append(b)
        out.append(b)
    return np.array(out).reshape(len(out), n)


def normal_basis(x, v):
    """Basis (rows) of x^perp intersected with v^perp."""
    x = np.asarray(x, dtype=float)
    vh = v - (v @ x) * x
    return complement_basis([x, vh / np.linalg.norm(vh)])


@dataclass(frozen=True, eq=False)
class TwoPointSolution:
    k: np.ndarray
    length: float
    trajectory: Trajectory
    residual: float
    iterations: int
    nodes: np.ndarray = field(repr=False, default=None)
    jac: tuple | None = field(repr=False, default=None)

    def __iter__(self):
        return iter((self.k, self.length, self.trajectory))


def _two_point_residual(metric, x, tau, basis, z, y, n_steps, prm):
    n = x.shape[0]
    k0 = z[:-1] @ basis
    y0 = np.concatenate([x, tau, k0])
    Y = K.integrate_uniform(prm, y0, float(z[-1]), n_steps, n)
    return Y[-1, :n] - y, Y


def solve_two_point(metric, x, v, y, eps_ball=0.3, n_steps=SPHERE_MESH, fd_step=1e-6,
                    max_iters=30, tol=1e-9, guess=None, jac=None):
    """Constant-curvature curve from x with direction v ending at y.

    Unknowns are (k0, L) with k0 in v^perp of T_x S^d; damped Gauss-Newton on
    the ambient residual gamma(L) - y, forward-difference Jacobian. ``guess``
    is an optional (k0, L) pair and ``jac`` a Jacobian from a nearby solve
    (chord reuse; refreshed when contraction is poor).
    """
    x = check_point(metric, x)
    y = check_point(metric, y)
    if np.linalg.norm(y + x) > eps_ball:
        raise DomainError(f"|y + x| = {np.linalg.norm(y + x):.3g} exceeds eps_ball={eps_ball}")
    tau = _unit_g(metric, x, np.asarray(v, dtype=float))
    n = x.shape[0]
    basis = normal_basis(x, tau)
    prm = metric.kernel_params()
    if guess is None:
        z = np.zeros(n - 1)
        z[-1] = np.pi
    else:
        z = np.append(basis @ np.asarray(guess[0], dtype=float), float(guess[1]))
    r, Y = _two_point_residual(metric, x, tau, basis, z, y, n_steps, prm)
    rn = np.linalg.norm(r)

    def fresh_jacobian(z, r):
        J = np.empty((n, n - 1))
        for i in range(n - 1):
            zp = z.copy()
            zp[i] += fd_step
            J[:, i] = (_two_point_residual(metric, x, tau, basis, zp, y, n_steps, prm)[0] - r) / fd_step
        return J

    J = None
    if jac is not None:
        Jk, JL = jac
        J = np.column_stack([Jk @ basis.T, JL]) if n > 2 else JL[:, None]
    it = 0
    refreshed = False
    while it < max_iters:
        if rn <= 1e-15:
            break
        if J is None:
            J = fresh_jacobian(z, r)
            refreshed = True
        dz = np.linalg.lstsq(J, -r, rcond=None)[0]
        lam = 1.0
        accepted = False
        for _ in range(12):
            zt = z + lam * dz
            rt, Yt = _two_point_residual(metric, x, tau, basis, zt, y, n_steps, prm)
            rtn = np.linalg.norm(rt)
            if rtn < rn:
                accepted = True
                break
            lam *= 0.5
        it += 1
        if not accepted:
            if not refreshed:
                J = None  # stale chord Jacobian; rebuild and retry
                continue
            break
        ratio = rtn / rn
        z, r, Y, rn = zt, rt, Yt, rtn
        if not (BRANCH[0] <= z[-1] <= BRANCH[1]):
            raise ShootingError(f"two-point length {z[-1]:.4g} left the branch [pi/2, 3pi/2]")
        if rn <= tol and ratio > 0.5:
            break  # converged; further steps only chase roundoff
        if ratio > 0.25 and not refreshed:
            J = None
        refreshed = False
    if rn > tol:
        raise ConvergenceError(f"two-point solve did not converge (|r|={rn:.3g})", rn, it)
    if not (BRANCH[0] <= z[-1] <= BRANCH[1]):
        raise ShootingError(f"two-point length {z[-1]:.4g} left the branch [pi/2, 3pi/2]")
    if J is None:
        J = fresh_jacobian(z, r)
    k0 = z[:-1] @ basis
    traj = mesh_trajectory(Y, float(z[-1]), n, curvature=True)
    return TwoPointSolution(k=k0, length=float(z[-1]), trajectory=traj, residual=float(rn),
                            iterations=it, nodes=Y, jac=(J[:, :-1] @ basis, J[:, -1].copy()))


def shooting_differential(metric, x, v, xi, s=np.pi, h=1e-5, n_steps=SPHERE_MESH):
    """Central difference of (s, k0) -> gamma(s; k0) at k0 = 0 along xi in T_x S^d.

    The parametrisation is T_x S^d = R v + v^perp with the point s v + k0.
    """
    x = check_point(metric, x)
    tau = _unit_g(metric, x, v)
    xi = np.asarray(xi, dtype=float)
    a = xi @ metric.matrix(x) @ tau
    kdir = xi - a * tau
    prm = metric.kernel_params()

    def end(t):
        y0 = np.concatenate([x, tau, t * kdir])
        return sphere_mesh(metric, y0, s + t * a, n_steps, params=prm)[-1, :x.shape[0]]

    return (end(h) - end(-h)) / (2 * h)
