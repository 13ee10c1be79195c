"""Finite-difference critical-point search for reduced functionals.

A *functional* object (see :class:`geonet.ball.BallFunctional` and
:class:`geonet.sphere.SphereFunctional`) exposes

* ``inner_dim`` and ``frame_dim()``;
* ``point(base, z)``: chart of the junction variable around ``base``;
* ``evaluate(junction, frame, warm)`` -> ``(value, warm_state)``.

The junction variable is solved first by Newton (the well-conditioned
direction), then the reduced function of the frame is driven to a critical
point by a Levenberg-Marquardt trust-region iteration on |grad|^2, which
finds saddles as well as extrema.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, GeonetError
from .results import SolveReport
from .stiefel import chart, random_point, s3_distance, s3_canonicalize, tangent_basis

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchOptions:
    starts: int = 64
    seed: int = 0
    grad_tol: float = 1e-8
    max_outer: int = 40
    polish_steps: int = 2
    inner_tol: float = 1e-9
    inner_max_iters: int = 20
    inner_jac_step: float = 1e-4
    grad_step: float = 1e-5
    frame_step: float = 1e-5
    hessian_step: float = 3e-4
    inertia_cutoff: float = 1e-6
    dedup_tol: float = 1e-6
    verify_tol: float = 1e-5
    trust: float = 0.25
    max_step: float = 0.5
    min_radius: float = 1e-8
    stall_window: int = 8
    stall_factor: float = 0.8


# ---------------------------------------------------------------- finite differences


def fd_gradient(f, n, h, f0=None):
    g = np.empty(n)
    for i in range(n):
        z = np.zeros(n)
        z[i] = h
        g[i] = (f(z) - f(-z)) / (2 * h)
    return g


def fd_hessian(f, n, h, f0=None):
    """Symmetric Hessian from function values (2 n^2 evaluations)."""
    if f0 is None:
        f0 = f(np.zeros(n))
    H = np.empty((n, n))
    E = np.eye(n) * h
    for i in range(n):
        H[i, i] = (f(E[i]) - 2 * f0 + f(-E[i])) / h ** 2
        for j in range(i):
            v = (f(E[i] + E[j]) - f(E[i] - E[j]) - f(-E[i] + E[j]) + f(-E[i] - E[j])) / (4 * h * h)
            H[i, j] = H[j, i] = v
    return H


def fd_hessian_forward(f, n, h, f0=None):
    """One-sided Hessian, first-order accurate, from n (n + 3) / 2 evaluations."""
    if f0 is None:
        f0 = f(np.zeros(n))
    E = np.eye(n) * h
    fi = np.array([f(E[i]) for i in range(n)])
    H = np.empty((n, n))
    for i in range(n):
        H[i, i] = (f(2 * E[i]) - 2 * fi[i] + f0) / h ** 2
        for j in range(i):
            H[i, j] = H[j, i] = (f(E[i] + E[j]) - fi[i] - fi[j] + f0) / h ** 2
    return H


def inertia(eigs, cutoff):
    eigs = np.asarray(eigs)
    return {"negative": int(np.sum(eigs < -cutoff)), "zero": int(np.sum(np.abs(eigs) <= cutoff)),
            "positive": int(np.sum(eigs > cutoff))}


# ---------------------------------------------------------------- inner solve


@dataclass
class InnerResult:
    junction: np.ndarray
    grad: np.ndarray
    iterations: int
    value: float
    warm: object
    jac: np.ndarray | None = None

    @property
    def grad_norm(self):
        return float(np.linalg.norm(self.grad))


def _inner_objective(fun, base, frame, warm):
    return lambda z: fun.evaluate(fun.point(base, z), frame, warm)[0]


def inner_newton(fun, frame, start, tol, max_iters, jac_step, grad_step, trust, center, jac=None):
    """Damped Newton on the junction gradient of ``fun`` at fixed ``frame``.

    The Jacobian is a finite-difference Hessian in the junction chart, reused
    while the residual contracts well. Iterates must stay within ``trust`` of
    ``center``.
    """
    n = fun.inner_dim
    x = np.asarray(start, dtype=float)
    value, warm = fun.evaluate(x, frame)
    g = fd_gradient(_inner_objective(fun, x, frame, warm), n, grad_step)
    J = jac
    it = 0
    while np.linalg.norm(g) > tol:
        if it >= max_iters:
            raise ConvergenceError(f"inner Newton: no convergence in {max_iters} iterations",
                                   float(np.linalg.norm(g)), it)
        fresh = J is None
        if fresh:
            J = fd_hessian(_inner_objective(fun, x, frame, warm), n, jac_step, value)
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            raise ConvergenceError("inner Newton: singular Jacobian", float(np.linalg.norm(g)), it) from None
        lam = 1.0
        accepted = False
        for _ in range(10):
            xt = fun.point(x, lam * step)
            if np.linalg.norm(xt - center) > trust:
                lam *= 0.5
                continue
            try:
                vt, wt = fun.evaluate(xt, frame, warm)
            except GeonetError:
                lam *= 0.5
                continue
            gt = fd_gradient(_inner_objective(fun, xt, frame, wt), n, grad_step)
            if np.linalg.norm(gt) < np.linalg.norm(g):
                accepted = True
                break
            lam *= 0.5
        it += 1
        if not accepted:
            if not fresh:
                J = None
                continue
            if np.linalg.norm(fun.point(x, step) - center) > trust:
                raise ConvergenceError("inner Newton left the trust region", float(np.linalg.norm(g)), it)
            raise ConvergenceError("inner Newton: damping failed", float(np.linalg.norm(g)), it)
        ratio = np.linalg.norm(gt) / np.linalg.norm(g)
        x, g, value, warm = xt, gt, vt, wt
        if ratio > 0.2:
            J = None
    return InnerResult(junction=x, grad=g, iterations=it, value=value, warm=warm, jac=J)


# ---------------------------------------------------------------- reduced derivatives


def frame_gradient(fun, junction, frame, warm, basis, h):
    f = lambda c: fun.evaluate(junction, chart(frame, basis, c), warm)[0]  # noqa: E731
    return fd_gradient(f, len(basis), h)


def joint_hessian(fun, junction, frame, warm, basis, h, value, central=True):
    """Hessian in (junction chart, frame chart) coordinates."""
    m = fun.inner_dim

    def f(w):
        return fun.evaluate(fun.point(junction, w[:m]), chart(frame, basis, w[m:]), warm)[0]

    return (fd_hessian if central else fd_hessian_forward)(f, m + len(basis), h, value)


def schur_hessian(H, m):
    """Hessian of the reduced function: C - B^T A^{-1} B for H = [[A, B], [B^T, C]]."""
    A, B, C = H[:m, :m], H[:m, m:], H[m:, m:]
    S = C - B.T @ np.linalg.solve(A, B)
    return 0.5 * (S + S.T)


# ---------------------------------------------------------------- outer search


@dataclass
class CriticalPoint:
    frame: object
    junction: np.ndarray
    value: float
    grad_norm: float
    hessian: np.ndarray
    eigenvalues: np.ndarray
    iterations: dict = field(default_factory=dict)


class _Reduced:
    """Reduced function of the frame with the inner solve folded in, plus warm-start state."""

    def __init__(self, fun, opts, center_of, start_of):
        self.fun, self.opts = fun, opts
        self.center_of, self.start_of = center_of, start_of
        self.inner_iters = 0
        self.jac = None

    def solve(self, frame, junction=None):
        start = self.start_of(frame) if junction is None else junction
        res = inner_newton(self.fun, frame, start, self.opts.inner_tol, self.opts.inner_max_iters,
                           self.opts.inner_jac_step, self.opts.grad_step, self.opts.trust,
                           self.center_of(frame), jac=self.jac)
        self.inner_iters += res.iterations
        self.jac = res.jac
        basis = tangent_basis(frame)
        g = frame_gradient(self.fun, res.junction, frame, res.warm, basis, self.opts.frame_step)
        return res, basis, g

    def hessian(self, frame, res, basis, central=True):
        H = joint_hessian(self.fun, res.junction, frame, res.warm, basis, self.opts.hessian_step,
                          res.value, central)
        m = self.fun.inner_dim
        self.jac = H[:m, :m].copy()
        return schur_hessian(H, m)


def _psb_update(H, old, new, step, g_old, g_new):
    """Transport H to the new basis and apply the Powell symmetric Broyden secant update."""
    M = np.array([[np.sum(b * a) for a in old] for b in new])
    H = M @ H @ M.T
    s = M @ step
    r = (g_new - M @ g_old) - H @ s
    ss = float(s @ s)
    if ss == 0.0:
        return H
    H = H + (np.outer(r, s) + np.outer(s, r)) / ss - (r @ s) * np.outer(s, s) / ss ** 2
    return 0.5 * (H + H.T)


def find_critical(fun, frame, opts, center_of, start_of):
    """Levenberg-Marquardt trust-region search for a critical point of the reduced function.

    The finite-difference Hessian is carried across accepted steps by secant
    updates and rebuilt only when a stale model fails. The model uses one-sided differences, while the reported eigenvalues come
    from a fresh central-difference Hessian at the final point.
    """
    red = _Reduced(fun, opts, center_of, start_of)
    res, basis, g = red.solve(frame)
    mu, radius = 0.0, opts.max_step
    polish = 0
    outer = 0
    hessians = 0
    history = []
    Hs, fresh = None, False
    while True:
        gn = float(np.linalg.norm(g))
        if gn <= opts.grad_tol and polish >= opts.polish_steps or gn <= 1e-3 * opts.grad_tol:
            break
        if outer >= opts.max_outer:
            raise ConvergenceError(f"outer search: no convergence in {opts.max_outer} iterations", gn, outer)
        history.append(gn)
        w = opts.stall_window
        if len(history) > w and gn > opts.grad_tol and gn > opts.stall_factor * history[-1 - w]:
            raise ConvergenceError(f"outer search stagnated at |grad| = {gn:.3g}", gn, outer)
        outer += 1
        if Hs is None:
            Hs, fresh = red.hessian(frame, res, basis, central=False), True
            hessians += 1
        n = len(g)
        step = np.linalg.solve(Hs.T @ Hs + mu * np.eye(n), -Hs.T @ g)
        sn = np.linalg.norm(step)
        if sn > radius:
            step *= radius / sn
        if sn < 1e-14:
            break
        pred = gn ** 2 - float(np.linalg.norm(g + Hs @ step)) ** 2
        trial = chart(frame, basis, step)
        try:
            tres, tbasis, tg = red.solve(trial, res.junction)
            actual = gn ** 2 - float(np.linalg.norm(tg)) ** 2
        except GeonetError:
            actual = -np.inf
        rho = actual / pred if pred > 0 else (1.0 if actual > 0 else -1.0)
        log.debug("outer %d |g|=%.3e rho=%.3f radius=%.3e mu=%.2e fresh=%s", outer, gn, rho, radius, mu, fresh)
        if rho > 0.1:
            was_converged = gn <= opts.grad_tol
            Hs, fresh = _psb_update(Hs, basis, tbasis, step, g, tg), False
            frame, res, basis, g = trial, tres, tbasis, tg
            if was_converged:
                polish += 1
            mu = mu / 4 if rho > 0.5 else mu
            if rho > 0.75:
                radius = min(2 * radius, opts.max_step)
        elif not fresh:
            Hs = None  # retry the same step with an up-to-date model
        else:
            if gn <= opts.grad_tol:
                break  # gradient already at the noise floor
            if radius < opts.min_radius:
                raise ConvergenceError(f"outer search stalled at |grad| = {gn:.3g}", gn, outer)
            scale = float(np.linalg.norm(Hs, 2)) ** 2
            mu = max(4 * mu, 1e-6 * scale, 1e-16)
            radius /= 4
    Hs = red.hessian(frame, res, basis)
    hessians += 1
    eigs = np.linalg.eigvalsh(Hs)
    return CriticalPoint(frame=frame, junction=res.junction, value=float(res.value),
                         grad_norm=float(np.linalg.norm(g)), hessian=Hs, eigenvalues=eigs,
                         iterations={"outer": outer, "inner": red.inner_iters, "polish": polish,
                                     "hessians": hessians})


# ---------------------------------------------------------------- multistart


def start_frames(n, k, count, seed):
    """Seeded multistart frames; alternates det signs when V_k(R^n) is disconnected (k == n)."""
    frames = []
    for i in range(count):
        p = random_point(n, k, [int(seed), i])
        if k == n:
            want = 1 if i % 2 == 0 else -1
            if p.component() != want:
                M = p.matrix.copy()
                M[:, -1] *= -1
                p = type(p)(M)
        frames.append(p)
    return frames


def dedup(reports, metric, opts, frame_dim):
    """Assign S3 class ids to converged reports.

    Reports are ordered by (value, canonical frame) first. Two points share a
    class when their S3 orbits come within ``dedup_tol``, trying every
    alternative parametrisation of the same network; points lying on a
    degenerate critical manifold (full nullity) share a class by value.
    """
    conv = [r for r in reports if r.converged]
    conv.sort(key=lambda r: (round(r.value, 9), tuple(np.ravel(r.frame))))
    classes = []  # (representative report, frame point, junction)
    for r in conv:
        reps = r._representations
        degenerate = r.inertia["zero"] == frame_dim
        found = None
        for cid, (rep, rfp, rjx) in enumerate(classes):
            if abs(rep.value - r.value) > max(1e-6, opts.dedup_tol):
                continue
            if degenerate and rep.inertia["zero"] == frame_dim:
                found = cid
                break
            if min(s3_distance(rfp, fp, metric, rjx, jx) for fp, jx in reps) <= opts.dedup_tol:
                found = cid
                break
        if found is None:
            classes.append((r, *reps[0]))
            found = len(classes) - 1
        r.class_id = found
    return len(classes)


def run_multistart(fun, metric, opts, n, k, center_of, start_of, make_network, verify,
                   junction_list, alternates=None):
    """Run ``opts.starts`` searches and return (reports, class_count).

    ``alternates(network)`` lists further (frame, junction) parametrisations of
    the same network, used when assigning classes.
    """
    reports = []
    for i, frame in enumerate(start_frames(n, k, opts.starts, opts.seed)):
        seed = [int(opts.seed), i]
        try:
            cp = find_critical(fun, frame, opts, center_of, start_of)
        except GeonetError as exc:
            log.info("start %d failed: %s", i, exc)
            reports.append(SolveReport(start=i, seed=seed, status="failed", message=str(exc)))
            continue
        if cp.grad_norm > opts.grad_tol:
            reports.append(SolveReport(start=i, seed=seed, status="failed",
                                       message=f"gradient stalled at {cp.grad_norm:.3g}",
                                       value=cp.value, grad_norm=cp.grad_norm,
                                       iterations=cp.iterations))
            continue
        junction = cp.junction
        canon = s3_canonicalize(cp.frame, metric, junction)
        try:
            network = make_network(junction, canon)
            ver = verify(network)
        except GeonetError as exc:
            reports.append(SolveReport(start=i, seed=seed, status="failed",
                                       message=f"network rebuild failed: {exc}"))
            continue
        rep = SolveReport(start=i, seed=seed, status="converged", value=cp.value,
                          grad_norm=cp.grad_norm, frame=canon.rows(),
                          junctions=junction_list(network),
                          inertia=inertia(cp.eigenvalues, opts.inertia_cutoff),
                          eigenvalues=[float(v) for v in cp.eigenvalues],
                          iterations=cp.iterations, component=frame.component(),
                          verification=ver, network=network)
        rep._representations = [(canon, junction)] + (list(alternates(network)) if alternates else [])
        reports.append(rep)
    count = dedup(reports, metric, opts, fun.frame_dim())
    return reports, count
