"""Collective spin coupled to a lossy cavity: mean field and Gaussian layer.

Variables are (X, Y, Z, Q, P) with Q, P the scaled cavity quadratures.  Only
the thermodynamic-limit (mean-field plus Lyapunov) description is provided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFrame, NoBrokenBranch
from .fluctuations import solve_lyapunov, lyapunov_residual

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class SpinBosonSpec:
    g: float
    lam: float
    omega: float
    kappa: float

    def __post_init__(self):
        for name in ("g", "lam", "omega", "kappa"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def Delta(self) -> float:
        return 4 * self.lam**4 + self.omega**2 * self.kappa**2

    @property
    def g_c(self) -> float:
        return float(np.sqrt(self.Delta) / self.kappa)


@dataclass(frozen=True)
class SpinBosonFixedPoint:
    X: float
    Y: float
    Z: float
    Q: float
    P: float
    Delta: float
    branch_sign: str

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.X, self.Y, self.Z, self.Q, self.P])


def sb_drift(spec: SpinBosonSpec, v) -> np.ndarray:
    X, Y, Z, Q, P = np.asarray(v, dtype=float)
    g, lam, w, k = spec.g, spec.lam, spec.omega, spec.kappa
    return np.array([
        SQRT2 * lam * P * Z - w * Z * Y,
        -g * Z - SQRT2 * lam * Q * Z + w * Z * X,
        g * Y + SQRT2 * lam * Q * Y - SQRT2 * lam * P * X,
        -lam / SQRT2 * Y - k / 2 * Q,
        lam / SQRT2 * X - k / 2 * P,
    ])


def sb_jacobian_fd(spec: SpinBosonSpec, v, step: float = 1e-6) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    cols = [(sb_drift(spec, v + step * e) - sb_drift(spec, v - step * e)) / (2 * step)
            for e in np.eye(5)]
    return np.array(cols).T


def sb_fixed_point(spec: SpinBosonSpec, branch_sign: int = -1) -> SpinBosonFixedPoint:
    D = spec.Delta
    g, lam, w, k = spec.g, spec.lam, spec.omega, spec.kappa
    z2 = 1.0 - g * g * k * k / D
    if not z2 > 0:
        raise NoBrokenBranch(f"g={g} is not below g_c={spec.g_c}")
    X = g * w * k * k / D
    Y = 2 * g * k * lam**2 / D
    Z = np.sqrt(z2) * (1.0 if branch_sign > 0 else -1.0)
    Q = -SQRT2 * lam * Y / k
    P = SQRT2 * lam * X / k
    return SpinBosonFixedPoint(X, Y, float(Z), Q, P, D, "+" if branch_sign > 0 else "-")


def sb_jacobian(spec: SpinBosonSpec, fp: SpinBosonFixedPoint) -> np.ndarray:
    """Closed-form 5x5 Jacobian at ``fp``.

    Row 3 is written with the fixed-point relations substituted, so it stays
    meaningful when ``fp.Z`` is set to zero by hand.
    """
    g, lam, w, k = spec.g, spec.lam, spec.omega, spec.kappa
    D, Z = fp.Delta, fp.Z
    return np.array([
        [0, -w * Z, 0, 0, SQRT2 * lam * Z],
        [w * Z, 0, 0, -SQRT2 * lam * Z, 0],
        [-2 * g * w * k * lam**2 / D, g * w * w * k * k / D, 0,
         2 * SQRT2 * g * k * lam**3 / D, -SQRT2 * g * w * k * k * lam / D],
        [0, -lam / SQRT2, 0, -k / 2, 0],
        [lam / SQRT2, 0, 0, 0, -k / 2],
    ])


@dataclass(frozen=True)
class TangentSystem:
    J: np.ndarray
    D: np.ndarray


def sb_tangent_system(spec: SpinBosonSpec, fp: SpinBosonFixedPoint) -> TangentSystem:
    """Drift and diffusion of (eta_x', eta_y', eta_q, eta_p) with the radial mode removed."""
    X, Y, Z = fp.X, fp.Y, fp.Z
    r = float(np.hypot(X, Y))
    if r <= 1e-12:
        raise DegenerateFrame("mean spin lies on the z-axis")
    lam, w, k = spec.lam, spec.omega, spec.kappa
    a = SQRT2 * lam
    b = lam / SQRT2
    J = np.array([
        [0, -w, -a * Y / r, a * X / r],
        [w * Z * Z, 0, -a * X * Z / r, -a * Y * Z / r],
        [-b * Y * Z / r, -b * X / r, -k / 2, 0],
        [b * X * Z / r, -b * Y / r, 0, -k / 2],
    ])
    return TangentSystem(J, k / 2 * np.diag([0.0, 0.0, 1.0, 1.0]))


@dataclass(frozen=True)
class SpinBosonSqueezing:
    xi_s_sq_closed: float
    xi_s_sq_numeric: float
    Sigma: np.ndarray
    residual: float

    def to_dict(self) -> dict:
        return {"xi_s_sq_closed": self.xi_s_sq_closed, "xi_s_sq_numeric": self.xi_s_sq_numeric,
                "Sigma": self.Sigma.tolist(), "residual": self.residual}


def sb_squeezing(spec: SpinBosonSpec) -> SpinBosonSqueezing:
    fp = sb_fixed_point(spec, -1)
    closed = float(np.sqrt(1.0 - spec.g**2 * spec.kappa**2 / spec.Delta))
    ts = sb_tangent_system(spec, fp)
    Sigma = solve_lyapunov(ts.J, ts.D)
    numeric = float(np.linalg.eigvalsh(Sigma[:2, :2])[0])
    return SpinBosonSqueezing(closed, numeric, Sigma, lyapunov_residual(ts.J, Sigma, ts.D))
