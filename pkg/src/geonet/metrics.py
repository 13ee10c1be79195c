"""Riemannian metrics near the standard ones on the unit ball and the unit sphere.

Two families are supported, both with exact (polynomial) derivatives:

* :class:`BallMetric` on B^d: ``G(x) = I + eps * H(x)`` with a symmetric
  polynomial matrix ``H`` ("bilinear"), or ``G(x) = exp(2 eps f(x)) I`` with a
  polynomial ``f`` ("conformal").
* :class:`SphereMetric` on S^d in R^{d+1}: ``g = exp(2 phi) g0`` with
  ``phi(x) = eps * f(x / |x|)``.

Metrics are immutable; every function here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import _kernels as K
from .errors import DomainError

SPHERE_TOL = 1e-10
KINDS = ("standard", "conformal", "bilinear")


def _term_arrays(terms, nvar, with_entries):
    coeff = np.array([float(t["coeff"]) for t in terms], dtype=float)
    powers = np.zeros((len(terms), nvar), dtype=np.int64)
    entries = np.zeros((len(terms), 2), dtype=np.int64)
    for r, t in enumerate(terms):
        p = list(t["powers"])
        if len(p) != nvar or any(int(q) != q or q < 0 for q in p):
            raise DomainError(f"term {r}: powers must be {nvar} non-negative ints, got {p}")
        powers[r] = p
        if with_entries:
            i, j = t["entry"]
            if not (0 <= i <= j < nvar):
                raise DomainError(f"term {r}: entry {t['entry']} is not in the upper triangle")
            entries[r] = (i, j)
    return coeff, powers, entries


def _ball_samples(d, n=512):
    """Deterministic Halton points in the closed unit ball (origin included)."""
    pts = qmc.Halton(d, scramble=False).random(n * 2 ** (d + 1))
    pts = 2.0 * pts - 1.0
    pts = pts[np.einsum("ij,ij->i", pts, pts) <= 1.0]
    return pts[:n]


@dataclass(frozen=True, eq=False)
class BallMetric:
    dim: int
    kind: str = "standard"
    epsilon: float = 0.0
    terms: tuple = ()
    _arrays: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim < 2:
            raise DomainError(f"dimension must be >= 2, got {self.dim}")
        if self.kind not in KINDS:
            raise DomainError(f"unknown metric kind {self.kind!r}")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise DomainError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        terms = tuple(dict(t) for t in self.terms)
        if self.kind == "conformal":
            degree = max((sum(t["powers"]) for t in terms), default=0)
            if degree > 3:
                raise DomainError(f"conformal exponent must have degree <= 3, got {degree}")
        coeff, powers, entries = _term_arrays(terms, self.dim, self.kind == "bilinear")
        object.__setattr__(self, "terms", terms)
        code = {"standard": K.BALL_STANDARD, "conformal": K.BALL_CONFORMAL,
                "bilinear": K.BALL_BILINEAR}[self.kind]
        object.__setattr__(self, "_arrays", (code, float(self.epsilon), coeff, powers, entries))
        if self.kind == "bilinear" and self.epsilon > 0:
            for x in _ball_samples(self.dim):
                try:
                    np.linalg.cholesky(self.matrix(x))
                except np.linalg.LinAlgError:
                    raise DomainError(f"metric is not positive definite at x={x.tolist()}") from None

    space = "ball"

    @property
    def ambient_dim(self):
        return self.dim

    def kernel_params(self):
        """Argument tuple for the compiled geodesic right-hand side."""
        return self._arrays + (np.zeros(0), np.empty((2, self.dim)))

    def matrix(self, x):
        code, eps, coeff, powers, entries = self._arrays
        G, _ = K.ball_metric(code, eps, coeff, powers, entries, np.asarray(x, dtype=float))
        return G

    def matrix_and_derivative(self, x):
        code, eps, coeff, powers, entries = self._arrays
        return K.ball_metric(code, eps, coeff, powers, entries, np.asarray(x, dtype=float))

    def christoffel(self, x):
        code, eps, coeff, powers, entries = self._arrays
        return K.ball_christoffel(code, eps, coeff, powers, entries, np.asarray(x, dtype=float))

    def to_spec(self):
        return {"space": "ball", "dim": self.dim, "kind": self.kind,
                "epsilon": self.epsilon, "poly": [dict(t) for t in self.terms]}


@dataclass(frozen=True, eq=False)
class SphereMetric:
    """Conformal metric exp(2 eps f(x/|x|)) g0 on the unit sphere S^dim."""

    dim: int
    kind: str = "standard"
    epsilon: float = 0.0
    terms: tuple = ()
    _arrays: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim < 2:
            raise DomainError(f"dimension must be >= 2, got {self.dim}")
        if self.kind not in ("standard", "conformal"):
            raise DomainError(f"sphere metrics are standard or conformal, got {self.kind!r}")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise DomainError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        terms = tuple(dict(t) for t in self.terms)
        degree = max((sum(t["powers"]) for t in terms), default=0)
        if degree > 3:
            raise DomainError(f"conformal exponent must have degree <= 3, got {degree}")
        coeff, powers, _ = _term_arrays(terms, self.dim + 1, False)
        eps = float(self.epsilon) if self.kind == "conformal" else 0.0
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_arrays", (eps, coeff, powers))

    space = "sphere"

    @property
    def ambient_dim(self):
        return self.dim + 1

    def kernel_params(self, kappas=None):
        eps, coeff, powers = self._arrays
        kap = np.zeros(0) if kappas is None else np.asarray(kappas, dtype=float)
        return (K.SPHERE_CONFORMAL, eps, coeff, powers, np.zeros((0, 2), dtype=np.int64), kap,
                np.empty((2, self.dim + 1)))

    def conformal(self, x):
        """(phi(x), round gradient of phi at x)."""
        eps, coeff, powers = self._arrays
        return K.sphere_conformal(eps, coeff, powers, np.asarray(x, dtype=float))

    def factor(self, x):
        """exp(2 phi(x)), the ratio g / g0."""
        return float(np.exp(2.0 * self.conformal(x)[0]))

    def matrix(self, x):
        x = np.asarray(x, dtype=float)
        return self.factor(x) * np.eye(self.dim + 1)

    def christoffel(self, x):
        """Difference tensor C with nabla^g_X Y = nabla^0_X Y + C(X, Y), ambient coordinates.

        C^k_ij = d_i phi delta_kj + d_j phi delta_ki - delta_ij grad0(phi)^k.
        """
        _, gp = self.conformal(x)
        n = self.dim + 1
        eye = np.eye(n)
        return (np.einsum("i,kj->kij", gp, eye) + np.einsum("j,ki->kij", gp, eye)
                - np.einsum("ij,k->kij", eye, gp))

    def to_spec(self):
        return {"space": "sphere", "dim": self.dim, "kind": self.kind,
                "epsilon": self.epsilon, "poly": [dict(t) for t in self.terms]}


def metric_from_spec(spec):
    """Build a metric from the JSON sub-schema ``{"space", "dim", "kind", "epsilon", "poly"}``."""
    space = spec.get("space")
    cls = {"ball": BallMetric, "sphere": SphereMetric}.get(space)
    if cls is None:
        raise DomainError(f"space must be 'ball' or 'sphere', got {space!r}")
    return cls(dim=int(spec["dim"]), kind=spec.get("kind", "standard"),
               epsilon=float(spec.get("epsilon", 0.0)), terms=tuple(spec.get("poly", ())))


def check_point(metric, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (metric.ambient_dim,):
        raise DomainError(f"point has shape {x.shape}, expected ({metric.ambient_dim},)")
    r = np.linalg.norm(x)
    if metric.space == "ball" and r > 1.0 + 1e-12:
        raise DomainError(f"x={x.tolist()} violates |x| <= 1 (|x|={r:.3g})")
    if metric.space == "sphere" and abs(r - 1.0) > SPHERE_TOL:
        raise DomainError(f"x={x.tolist()} violates |x| = 1 (||x|-1|={abs(r - 1):.3g})")
    return x


def metric_at(metric, x):
    """g(x) as a matrix on ambient coordinates (restrict to T_x S^d on the sphere)."""
    return metric.matrix(check_point(metric, x))


def christoffel(metric, x):
    """Gamma^k_ij on the ball; the conformal difference tensor on the sphere."""
    x = check_point(metric, x)
    gam = metric.christoffel(x)
    if not np.all(np.isfinite(gam)):
        raise DomainError(f"metric is singular at x={x.tolist()}")
    return gam


def inner(metric, x, a, b):
    return float(np.asarray(a) @ metric.matrix(x) @ np.asarray(b))


def norm(metric, x, a):
    return float(np.sqrt(inner(metric, x, a, a)))


def covariant_derivative_along(metric, gamma, dgamma, W, dW):
    """nabla_{gamma'} W at one sample of a curve, from (gamma, gamma', W, W')."""
    gamma, dgamma, W, dW = (np.asarray(a, dtype=float) for a in (gamma, dgamma, W, dW))
    if metric.space == "ball":
        return dW + np.einsum("kij,i,j->k", metric.christoffel(gamma), dgamma, W)
    check_point(metric, gamma)
    _, gp = metric.conformal(gamma)
    tw = dgamma @ W
    return dW + tw * gamma + (gp @ dgamma) * W + (gp @ W) * dgamma - tw * gp


@dataclass(frozen=True, eq=False)
class TangentFrame:
    base: np.ndarray
    vectors: np.ndarray  # (k, n), one vector per row
    metric: object
    orthonormal: bool = False

    def gram(self):
        G = self.metric.matrix(self.base)
        return self.vectors @ G @ self.vectors.T


def gram_schmidt_g(metric, x, vectors, rank_tol=1e-12):
    """g(x)-orthonormalise ``vectors`` (rows), keeping the flag they span."""
    x = check_point(metric, x)
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if metric.space == "sphere":
        off = np.abs(V @ x).max()
        if off > 1e-10:
            raise DomainError(f"input vectors are not tangent at x (max |<v,x>| = {off:.3g})")
    G = metric.matrix(x)
    out = []
    for i, v in enumerate(V):
        w = v.copy()
        for _ in range(2):  # second pass for stability
            for u in out:
                w = w - (u @ G @ w) * u
        nrm = np.sqrt(w @ G @ w)
        if nrm <= rank_tol * max(1.0, np.sqrt(v @ G @ v)):
            raise DomainError(f"vectors are linearly dependent (vector {i})")
        out.append(w / nrm)
    return TangentFrame(base=x, vectors=np.array(out), metric=metric, orthonormal=True)
