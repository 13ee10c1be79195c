"""Compiled inner loops: metric evaluation, ODE right-hand sides, Dormand-Prince.

Everything here is numba-jitted and works on plain arrays. The public
modules wrap these kernels; nothing outside the package should import them.

Polynomials are stored as term arrays ``coeff (T,)``, ``powers (T, n)`` and,
for matrix-valued polynomials, ``entries (T, 2)`` giving the (i, j) slot of
each term.

Every right-hand side takes the same parameter tuple
``(kind, eps, coeff, powers, entries, kappas, work)`` and :func:`rhs`
dispatches on ``kind``. Keeping one signature (instead of passing jitted
functions around) lets numba cache every kernel on disk.
"""

import numpy as np
from numba import njit

BALL_STANDARD = 0
BALL_CONFORMAL = 1
BALL_BILINEAR = 2
SPHERE_CONFORMAL = 3

# Dormand-Prince 5(4) tableau with the free 4th-order dense output.
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = np.zeros((7, 7))
A[1, :1] = [1 / 5]
A[2, :2] = [3 / 40, 9 / 40]
A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
B = A[6].copy()
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


# ---------------------------------------------------------------- polynomials

@njit(cache=True)
def poly_eval_into(coeff, powers, x, grad):
    """Value of a scalar polynomial at ``x``; its gradient is written to ``grad``."""
    n = x.shape[0]
    val = 0.0
    for l in range(n):
        grad[l] = 0.0
    for t in range(coeff.shape[0]):
        c = coeff[t]
        mono = c
        nz = 0
        for i in range(n):
            p = powers[t, i]
            if p > 0:
                nz += 1
                xi = x[i]
                for _ in range(p):
                    mono *= xi
        val += mono
        if nz == 0:
            continue
        for l in range(n):
            p = powers[t, l]
            if p == 0:
                continue
            term = c * p
            for i in range(n):
                q = powers[t, i] - (1 if i == l else 0)
                xi = x[i]
                for _ in range(q):
                    term *= xi
            grad[l] += term
    return val


@njit(cache=True)
def poly_eval(coeff, powers, x):
    grad = np.empty(x.shape[0])
    val = poly_eval_into(coeff, powers, x, grad)
    return val, grad


@njit(cache=True)
def ball_metric(kind, eps, coeff, powers, entries, x):
    """G(x) and dG[l, i, j] = d_l G_ij for a ball metric."""
    d = x.shape[0]
    G = np.eye(d)
    dG = np.zeros((d, d, d))
    if kind == BALL_CONFORMAL:
        f, gf = poly_eval(coeff, powers, x)
        s = np.exp(2.0 * eps * f)
        for i in range(d):
            G[i, i] = s
        for l in range(d):
            for i in range(d):
                dG[l, i, i] = 2.0 * eps * gf[l] * s
    elif kind == BALL_BILINEAR:
        for t in range(coeff.shape[0]):
            i = entries[t, 0]
            j = entries[t, 1]
            c = eps * coeff[t]
            mono = 1.0
            for a in range(d):
                if powers[t, a] > 0:
                    mono *= x[a] ** powers[t, a]
            G[i, j] += c * mono
            if i != j:
                G[j, i] += c * mono
            for l in range(d):
                p = powers[t, l]
                if p == 0:
                    continue
                term = c * p
                for a in range(d):
                    q = powers[t, a] - (1 if a == l else 0)
                    if q > 0:
                        term *= x[a] ** q
                dG[l, i, j] += term
                if i != j:
                    dG[l, j, i] += term
    return G, dG


@njit(cache=True)
def ball_christoffel(kind, eps, coeff, powers, entries, x):
    """Gamma[k, i, j] from exact metric derivatives."""
    d = x.shape[0]
    G, dG = ball_metric(kind, eps, coeff, powers, entries, x)
    lower = np.zeros((d, d, d))
    for l in range(d):
        for i in range(d):
            for j in range(d):
                lower[l, i, j] = 0.5 * (dG[i, j, l] + dG[j, i, l] - dG[l, i, j])
    Ginv = np.linalg.inv(G)
    gam = np.zeros((d, d, d))
    for k in range(d):
        for l in range(d):
            gkl = Ginv[k, l]
            if gkl == 0.0:
                continue
            for i in range(d):
                for j in range(d):
                    gam[k, i, j] += gkl * lower[l, i, j]
    return gam


# ---------------------------------------------------------------- sphere

@njit(cache=True)
def sphere_conformal_into(eps, coeff, powers, x, gf, gphi):
    """phi = eps * f(x / |x|); writes its round-sphere gradient to ``gphi``."""
    n = x.shape[0]
    r = 0.0
    for i in range(n):
        r += x[i] * x[i]
    r = np.sqrt(r)
    for i in range(n):
        gphi[i] = x[i] / r
    f = poly_eval_into(coeff, powers, gphi, gf)
    radial = 0.0
    for i in range(n):
        radial += gphi[i] * gf[i]
    for i in range(n):
        gphi[i] = eps * (gf[i] - radial * gphi[i]) / r
    return eps * f


@njit(cache=True)
def sphere_conformal(eps, coeff, powers, x):
    gf = np.empty(x.shape[0])
    gphi = np.empty(x.shape[0])
    phi = sphere_conformal_into(eps, coeff, powers, x, gf, gphi)
    return phi, gphi


@njit(cache=True)
def _correct(y, out, n, a, o, gphi, sign_scale, tau_coef):
    """out[o:o+n] = tau_coef * tau - sign_scale * (nabla^g_tau W - W') for W = y[a:a+n].

    The conformal round connection gives
    nabla_tau W - W' = <tau,W> gamma + dphi(tau) W + dphi(W) tau - <tau,W> grad phi.
    """
    tw = 0.0
    pt = 0.0
    pw = 0.0
    for i in range(n):
        tw += y[n + i] * y[a + i]
        pt += gphi[i] * y[n + i]
        pw += gphi[i] * y[a + i]
    for i in range(n):
        corr = tw * y[i] + pt * y[a + i] + pw * y[n + i] - tw * gphi[i]
        out[o + i] += tau_coef * y[n + i] - sign_scale * corr


# ---------------------------------------------------------------- right-hand sides

@njit(cache=True)
def ball_rhs(y, prm, out):
    kind, eps, coeff, powers, entries, _, work2 = prm
    work = work2[0]
    d = y.shape[0] // 2
    for i in range(d):
        out[i] = y[d + i]
        out[d + i] = 0.0
    if kind == BALL_STANDARD or eps == 0.0:
        return
    if kind == BALL_CONFORMAL:
        gf = work
        poly_eval_into(coeff, powers, y[:d], gf)
        vv = 0.0
        gv = 0.0
        for i in range(d):
            vv += y[d + i] * y[d + i]
            gv += gf[i] * y[d + i]
        for k in range(d):
            out[d + k] = -eps * (2.0 * y[d + k] * gv - vv * gf[k])
        return
    G, dG = ball_metric(kind, eps, coeff, powers, entries, y[:d])
    rhs = np.zeros(d)
    for l in range(d):
        s = 0.0
        for i in range(d):
            for j in range(d):
                s += y[d + i] * y[d + j] * (dG[i, j, l] - 0.5 * dG[l, i, j])
        rhs[l] = -s
    acc = np.linalg.solve(G, rhs)
    for k in range(d):
        out[d + k] = acc[k]


@njit(cache=True)
def sphere_rhs(y, prm, out):
    """Frenet-Serret system in ambient coordinates plus transported vectors.

    State is [gamma, tau, k, W_1, ..., W_m]; W_i obeys nabla_tau W_i = -kappa_i tau.
    """
    _, eps, coeff, powers, _, kappas, work = prm
    n = powers.shape[1]
    gf = work[0]
    gphi = work[1]
    phi = sphere_conformal_into(eps, coeff, powers, y[:n], gf, gphi)
    kk = 0.0
    for i in range(n):
        out[i] = y[n + i]
        out[n + i] = y[2 * n + i]
        out[2 * n + i] = 0.0
        kk += y[2 * n + i] * y[2 * n + i]
    kk *= np.exp(2.0 * phi)
    # tau' = k - corr(tau)
    _correct(y, out, n, n, n, gphi, 1.0, 0.0)
    # k' = -|k|_g^2 tau - corr(k)
    _correct(y, out, n, 2 * n, 2 * n, gphi, 1.0, -kk)
    for m in range(kappas.shape[0]):
        a = (3 + m) * n
        for i in range(n):
            out[a + i] = 0.0
        _correct(y, out, n, a, a, gphi, 1.0, -kappas[m])


@njit(cache=True)
def rhs(y, prm, out):
    if prm[0] == SPHERE_CONFORMAL:
        sphere_rhs(y, prm, out)
    else:
        ball_rhs(y, prm, out)


@njit(cache=True)
def sphere_project(y, n):
    """Put gamma back on the unit sphere and the vectors back in its tangent plane."""
    r = 0.0
    for i in range(n):
        r += y[i] * y[i]
    r = np.sqrt(r)
    for i in range(n):
        y[i] /= r
    nv = y.shape[0] // n
    for b in range(1, nv):
        a = b * n
        s = 0.0
        for i in range(n):
            s += y[a + i] * y[i]
        for i in range(n):
            y[a + i] -= s * y[i]


# ---------------------------------------------------------------- Dormand-Prince

@njit(cache=True)
def dopri_step(prm, y, h, K, ytmp, y_new, err):
    """One DP5 step. K[0] must hold f(y); fills K[1:], y_new and err."""
    n = y.shape[0]
    for s in range(1, 7):
        for i in range(n):
            acc = 0.0
            for j in range(s):
                acc += A[s, j] * K[j, i]
            ytmp[i] = y[i] + h * acc
        rhs(ytmp, prm, K[s])
    for i in range(n):
        acc = 0.0
        e = 0.0
        for j in range(7):
            acc += B[j] * K[j, i]
            e += E[j] * K[j, i]
        y_new[i] = y[i] + h * acc
        err[i] = h * e


@njit(cache=True)
def integrate_uniform(prm, y0, length, n_steps, project_n):
    """Uniform-mesh DP5 over [0, length]; returns nodes (n_steps+1, dim).

    With a fixed step count the result is a smooth function of the initial
    data and of ``length``, which keeps finite differences of it clean.
    ``project_n > 0`` enables sphere projection after each step.
    """
    dim = y0.shape[0]
    Y = np.empty((n_steps + 1, dim))
    K = np.empty((7, dim))
    ytmp = np.empty(dim)
    err = np.empty(dim)
    Y[0] = y0
    h = length / n_steps
    rhs(Y[0], prm, K[0])
    for i in range(n_steps):
        dopri_step(prm, Y[i], h, K, ytmp, Y[i + 1], err)
        if project_n > 0:
            sphere_project(Y[i + 1], project_n)
            rhs(Y[i + 1], prm, K[0])
        else:
            K[0] = K[6]
    return Y


@njit(cache=True)
def _err_norm(err, y, y_new, rtol, atol):
    s = 0.0
    n = y.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
        s += (err[i] / sc) ** 2
    return np.sqrt(s / n)


@njit(cache=True)
def integrate_adaptive(prm, y0, t_end, rtol, atol, max_steps, project_n, ball_event, safety_radius):
    """Adaptive DP5 with step history for dense output.

    Returns (status, ts, ys, Ks) where Ks[i] holds the stages of step i.
    status: 0 reached t_end, 1 ball exit event inside the last step,
    2 left the safety radius, 3 step-size collapse, 4 too many steps.
    With ``ball_event`` the run stops at the first accepted step whose end
    point has |x| >= 1 (the position is the first half of the state).
    """
    dim = y0.shape[0]
    ts = np.empty(max_steps + 1)
    ys = np.empty((max_steps + 1, dim))
    Ks = np.empty((max_steps, 7, dim))
    K = np.empty((7, dim))
    ytmp = np.empty(dim)
    y_new = np.empty(dim)
    err = np.empty(dim)
    y = y0.copy()
    t = 0.0
    ts[0] = 0.0
    ys[0] = y
    rhs(y, prm, K[0])
    f = K[0].copy()
    # initial step from the usual two-evaluation heuristic
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f / scale) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    f1 = np.empty(dim)
    rhs(y + h0 * f, prm, f1)
    d2 = np.sqrt(np.mean(((f1 - f) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100 * h0, h1, t_end)
    npos = dim // 2
    nsteps = 0
    while nsteps < max_steps:
        if t + h > t_end:
            h = t_end - t
        if h < 1e-14 * max(1.0, abs(t)):
            return 3, ts[:nsteps + 1], ys[:nsteps + 1], Ks[:nsteps]
        dopri_step(prm, y, h, K, ytmp, y_new, err)
        en = _err_norm(err, y, y_new, rtol, atol)
        if en <= 1.0:
            Ks[nsteps] = K
            if project_n > 0:
                sphere_project(y_new, project_n)
                rhs(y_new, prm, K[0])
            else:
                K[0] = K[6]
            t = t + h
            y[:] = y_new
            nsteps += 1
            ts[nsteps] = t
            ys[nsteps] = y
            if ball_event:
                r2 = 0.0
                for i in range(npos):
                    r2 += y[i] * y[i]
                if r2 >= 1.0:
                    return 1, ts[:nsteps + 1], ys[:nsteps + 1], Ks[:nsteps]
                if r2 > safety_radius * safety_radius:
                    return 2, ts[:nsteps + 1], ys[:nsteps + 1], Ks[:nsteps]
            if t >= t_end:
                return 0, ts[:nsteps + 1], ys[:nsteps + 1], Ks[:nsteps]
            fac = 5.0 if en == 0.0 else min(5.0, 0.9 * en ** -0.2)
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * en ** -0.2)
    return 4, ts[:nsteps + 1], ys[:nsteps + 1], Ks[:nsteps]


@njit(cache=True)
def dense_eval(y_old, K, h, theta):
    """DP5 dense output inside one step and its derivative in the step variable."""
    n = y_old.shape[0]
    Q = np.zeros((n, 4))
    for i in range(7):
        for p in range(4):
            if P[i, p] != 0.0:
                Q[:, p] += K[i] * P[i, p]
    y = y_old.copy()
    dy = np.zeros(n)
    th = 1.0
    for p in range(4):
        y += h * Q[:, p] * th * theta
        dy += Q[:, p] * (p + 1) * th
        th *= theta
    return y, dy
