"""Stiefel manifolds V_k(R^n) as parameter spaces of candidate networks.

A frame is stored as an ``(n, k)`` matrix with orthonormal columns. For
theta-networks the columns are ``(x, e1, e2)``; for triods ``(e1, e2)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

DEDUP_TOL = 1e-6
S3 = tuple(itertools.permutations(range(3)))


def _qr_positive(M):
    Q, R = np.linalg.qr(M)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    if np.min(np.abs(np.diag(R))) < 1e-12 * max(1.0, np.abs(R).max()):
        raise DomainError("rank collapse in QR retraction")
    return Q * s


@dataclass(frozen=True, eq=False)
class FramePoint:
    matrix: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[1] > M.shape[0] or M.shape[1] < 1:
            raise DomainError(f"frame must be an (n, k) matrix with k <= n, got {M.shape}")
        if np.abs(M.T @ M - np.eye(M.shape[1])).max() > 1e-13:
            M = _qr_positive(M)
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def k(self):
        return self.matrix.shape[1]

    @property
    def dim(self):
        """Dimension of V_k(R^n)."""
        return self.n * self.k - self.k * (self.k + 1) // 2

    def __getitem__(self, i):
        return self.matrix[:, i]

    def component(self):
        """Orientation sign when V_k(R^n) is disconnected (k == n), else 0."""
        if self.k != self.n:
            return 0
        return int(np.sign(np.linalg.det(self.matrix)))

    def flat(self):
        """Column-major flattening (frame vectors one after another)."""
        return self.matrix.T.ravel()

    def rows(self):
        return self.matrix.T.tolist()

    @classmethod
    def from_vectors(cls, *vectors):
        return cls(np.column_stack(vectors))


@dataclass(frozen=True, eq=False)
class StiefelTangent:
    base: FramePoint
    matrix: np.ndarray

    def skew_defect(self):
        S = self.base.matrix.T @ self.matrix
        return float(np.abs(S + S.T).max())


def project_tangent(p, Z):
    """Orthogonal projection of an ambient (n, k) matrix onto T_p V_k."""
    Z = np.asarray(getattr(Z, "matrix", Z), dtype=float)
    P = p.matrix
    S = P.T @ Z
    return StiefelTangent(p, Z - P @ (0.5 * (S + S.T)))


def retract(p, t, step=1.0):
    """QR retraction of p + step * t."""
    if step == 0:
        return p
    Z = getattr(t, "matrix", t)
    return FramePoint(_qr_positive(p.matrix + step * np.asarray(Z, dtype=float)))


def tangent_basis(p):
    """Frobenius-orthonormal basis of T_p V_k as a list of (n, k) matrices.

    Elements are P @ Omega (Omega skew, unit norm) followed by P_perp @ E_ib.
    """
    P = p.matrix
    n, k = P.shape
    Q, _ = np.linalg.qr(P, mode="complete")
    Pp = Q[:, k:]
    basis = []
    for a in range(k):
        for b in range(a + 1, k):
            om = np.zeros((k, k))
            om[a, b] = 1 / np.sqrt(2)
            om[b, a] = -1 / np.sqrt(2)
            basis.append(P @ om)
    for i in range(n - k):
        for b in range(k):
            Z = np.zeros((n, k))
            Z[:, b] = Pp[:, i]
            basis.append(Z)
    return basis


def chart(p, basis, c):
    """Retraction coordinates: c -> R_p(sum c_i B_i)."""
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        return p
    return retract(p, sum(ci * B for ci, B in zip(c, basis)))


def random_point(n, k, seed):
    """Haar-distributed frame from a seeded Gaussian matrix (seed may be an int or a sequence)."""
    if k > n:
        raise DomainError(f"need k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    return FramePoint(_qr_positive(rng.standard_normal((n, k))))


# ---------------------------------------------------------------- S3 action

def _frame_parts(p, metric, junction):
    """(junction, G at junction, e1, e2, prefix columns) for either parameter layout."""
    if p.k == 3:
        x = p[0]
        return x, metric.matrix(x), p[1], p[2], [x]
    if junction is None:
        raise DomainError("ball frames need the junction x")
    x = np.asarray(junction, dtype=float)
    return x, metric.matrix(x), p[0], p[1], []


def balanced_directions(G, e1, e2):
    """g-Gram-Schmidt (e1, e2) -> (u1, nu1), then the balanced triple and its normals.

    Returns (u, nu), both (3, n): u_j = cos(a_j) u1 + sin(a_j) nu1 with a_j = 2 pi (j-1)/3
    and nu_j the normal keeping the orientation of (u1, nu1).
    """
    u1 = e1 / np.sqrt(e1 @ G @ e1)
    w = e2 - (e2 @ G @ u1) * u1
    nu1 = w / np.sqrt(w @ G @ w)
    c, s = -0.5, np.sqrt(3.0) / 2
    u = np.array([u1, c * u1 + s * nu1, c * u1 - s * nu1])
    nu = np.array([nu1, -s * u1 + c * nu1, s * u1 + c * nu1])
    return u, nu


def frame_from_directions(u):
    """Inverse of :func:`balanced_directions`: the Euclidean frame (e1, e2) behind a triple."""
    u1, u2, u3 = u
    nu_dir = u2 - u3
    e1 = u1 / np.linalg.norm(u1)
    w = nu_dir - (nu_dir @ e1) * e1
    return e1, w / np.linalg.norm(w)


def s3_orbit(p, metric, junction=None):
    """The six frames sigma . p, in the order of :data:`S3`."""
    x, G, e1, e2, prefix = _frame_parts(p, metric, junction)
    u, _ = balanced_directions(G, e1, e2)
    out = []
    for sig in S3:
        f1, f2 = frame_from_directions(u[list(sig)])
        out.append(FramePoint.from_vectors(*prefix, f1, f2))
    return out


def s3_canonicalize(p, metric, junction=None):
    """Lexicographically smallest frame (flattened coordinates) in the S3 orbit of p."""
    orbit = s3_orbit(p, metric, junction)
    return min(orbit, key=lambda q: tuple(q.flat()))


def s3_distance(p, q, metric, junction_p=None, junction_q=None):
    """Max-norm distance between q and the nearest element of the S3 orbit of p."""
    best = np.inf
    for r in s3_orbit(p, metric, junction_p):
        best = min(best, float(np.abs(r.matrix - q.matrix).max()))
    if junction_p is not None and junction_q is not None:
        best = max(best, float(np.abs(np.asarray(junction_p) - np.asarray(junction_q)).max()))
    return best


def s3_equivalent(p, q, metric, junction_p=None, junction_q=None, tol=DEDUP_TOL):
    return s3_distance(p, q, metric, junction_p, junction_q) <= tol
