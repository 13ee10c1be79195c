"""Result records shared by the solvers and the report writer."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class VerificationReport:
    """Stationarity residuals of a network; ``passed`` iff every residual is <= ``tol``."""

    residuals: dict
    tol: float
    passed: bool

    @classmethod
    def from_residuals(cls, residuals, tol, dim=None):
        res = {k: float(v) for k, v in sorted(residuals.items())}
        return cls(residuals=res, tol=float(tol), passed=all(v <= tol for v in res.values()))

    @property
    def worst(self):
        return max(self.residuals.values())

    def to_dict(self):
        return {"passed": self.passed, "tol": self.tol, "residuals": dict(self.residuals)}


@dataclass
class SolveReport:
    start: int
    seed: list
    status: str  # "converged" or "failed"
    message: str = ""
    value: float | None = None
    grad_norm: float | None = None
    frame: list | None = None  # canonical frame, one row per vector
    junctions: list | None = None
    inertia: dict | None = None
    eigenvalues: list | None = None
    iterations: dict = field(default_factory=dict)
    component: int = 0
    class_id: int | None = None
    verification: VerificationReport | None = None
    network: object = field(default=None, repr=False, compare=False)

    @property
    def converged(self):
        return self.status == "converged"

    def to_dict(self):
        out = {
            "start": self.start,
            "seed": list(self.seed),
            "status": self.status,
            "message": self.message,
            "value": self.value,
            "grad_norm": self.grad_norm,
            "frame": self.frame,
            "junctions": self.junctions,
            "inertia": self.inertia,
            "eigenvalues": self.eigenvalues,
            "iterations": dict(sorted(self.iterations.items())),
            "component": self.component,
            "class_id": self.class_id,
            "verification": None if self.verification is None else self.verification.to_dict(),
        }
        return out
