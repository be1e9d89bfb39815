"""Gaussian fluctuations about a mean-field fixed point.

The scaled fluctuations eta = sqrt(N)(m - M) obey a linear Langevin equation
with drift J and diffusion D, and their stationary covariance solves
J Sigma + Sigma J^T + D = 0.  The full 3x3 Jacobian carries the radial zero
mode of the sphere, so the stationary problem is posed on the 2x2 tangent
block of the aligned frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collective_model import PresetParams, SpinModelSpec, build_example_model
from .errors import (AtCriticalPoint, FitFailure, NoBrokenBranch, NonHurwitzJacobian,
                     SingularSystem)
from .meanfield import (AlignedFrame, aligned_rotation, example_branch, find_fixed_points,
                        jacobian, transverse_blocks)

HURWITZ_TOL = 1e-12
DZ_FIT_POINTS = (1e-3, 2e-3)
DZ_CHECK_POINT = 1.5e-3
DZ_FIT_TOL = 1e-8


def diffusion(spec: SpinModelSpec, M) -> np.ndarray:
    """Mean-field diffusion matrix of eta = sqrt(N)(m - M).

    Each channel l contributes 2 Re(conj(w) w^T) with w = l x M.  For
    l = sqrt(kappa)(1, -i, 0) this is 2 kappa times
    [[Z^2, 0, -XZ], [0, Z^2, -YZ], [-XZ, -YZ, X^2 + Y^2]].
    """
    M = np.asarray(M, dtype=float).reshape(3)
    D = np.zeros((3, 3))
    for ell in spec.channel_vectors:
        w = np.cross(ell, M)
        D += 2.0 * np.real(np.outer(w.conj(), w))
    return 0.5 * (D + D.T)


def solve_lyapunov(J, D) -> np.ndarray:
    """Solve J S + S J^T + D = 0 by Kronecker vectorisation (n <= 5)."""
    J = np.asarray(J, dtype=float)
    D = np.asarray(D, dtype=float)
    n = J.shape[0]
    if J.shape != (n, n) or D.shape != (n, n):
        raise ValueError("J and D must be square and of equal size")
    if n > 5:
        raise ValueError("dense Kronecker solve is limited to n <= 5")
    ev = np.linalg.eigvals(J)
    top = float(np.max(ev.real))
    if top >= -HURWITZ_TOL:
        raise NonHurwitzJacobian(f"max Re(lambda) = {top:.3e}; no stationary covariance")
    eye = np.eye(n)
    A = np.kron(J, eye) + np.kron(eye, J)
    try:
        x = np.linalg.solve(A, -D.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    S = x.reshape(n, n)
    return 0.5 * (S + S.T)


def lyapunov_residual(J, S, D) -> float:
    return float(np.linalg.norm(J @ S + S @ J.T + D))


@dataclass(frozen=True)
class CovariancePack:
    """Lab and aligned-frame drift, diffusion and covariance.

    ``Sigma_full`` is the tangent covariance embedded back into the lab
    frame (zero variance along the mean spin, which is the leading order on
    the sphere).
    """

    J_lab: np.ndarray
    D_lab: np.ndarray
    J_perp: np.ndarray
    D_perp: np.ndarray
    Sigma_perp: np.ndarray
    Sigma_full: np.ndarray
    frame: AlignedFrame
    coalesce_axis_transverse: np.ndarray
    residual: float

    def residual_bound(self) -> float:
        return 1e-10 * (np.linalg.norm(self.D_perp)
                        + np.linalg.norm(self.J_perp) * np.linalg.norm(self.Sigma_perp))


def covariance_pack(spec: SpinModelSpec, M) -> CovariancePack:
    M = np.asarray(M, dtype=float).reshape(3)
    frame = aligned_rotation(M)
    J = jacobian(spec, M)
    D = diffusion(spec, M)
    tb = transverse_blocks(J, D, frame)
    Sigma = solve_lyapunov(tb.J_perp, tb.D_perp)
    full_rot = np.zeros((3, 3))
    full_rot[:2, :2] = Sigma
    R = frame.rotation
    return CovariancePack(J, D, tb.J_perp, tb.D_perp, Sigma, R.T @ full_rot @ R, frame,
                          tb.coalesce_axis_transverse,
                          lyapunov_residual(tb.J_perp, Sigma, tb.D_perp))


def example_covariance(p: PresetParams) -> CovariancePack:
    """Covariance on the stable PT-broken branch of the preset model."""
    return covariance_pack(build_example_model(p), example_branch(p).point)


@dataclass(frozen=True)
class SqueezingReport:
    xi_s_sq: float
    xi_r_sq: float
    lambda_min: float
    lambda_max: float
    axis_min: np.ndarray
    axis_max: np.ndarray
    alignment_angle: float
    polarization: float
    isotropic: bool = False

    def to_dict(self) -> dict:
        return {
            "xi_s_sq": self.xi_s_sq,
            "xi_r_sq": self.xi_r_sq,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "axis_min": [float(v) for v in self.axis_min],
            "axis_max": [float(v) for v in self.axis_max],
            "alignment_angle": None if self.isotropic else self.alignment_angle,
            "polarization": self.polarization,
            "isotropic": self.isotropic,
        }


def alignment_angle(axis, reference) -> float:
    """Angle in [0, pi/2] between two unoriented 2-D axes."""
    a = np.asarray(axis, dtype=float)
    b = np.asarray(reference, dtype=float)
    c = abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(min(1.0, c)))


def principal_transverse(block, coalesce_axis, polarization: float = 1.0) -> SqueezingReport:
    """Squeezing report from a 2x2 transverse covariance in normalised units."""
    block = 0.5 * (np.asarray(block, dtype=float) + np.asarray(block, dtype=float).T)
    w, V = np.linalg.eigh(block)
    lam_min, lam_max = float(w[0]), float(w[1])
    if lam_max - lam_min <= 1e-12 * max(1.0, abs(lam_max)):
        axis_min, axis_max = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        angle, iso = float("nan"), True
    else:
        # fix orientation so that outputs are reproducible
        axis_min = V[:, 0] * (1 if V[np.argmax(np.abs(V[:, 0])), 0] > 0 else -1)
        axis_max = V[:, 1] * (1 if V[np.argmax(np.abs(V[:, 1])), 1] > 0 else -1)
        angle, iso = alignment_angle(axis_max, coalesce_axis), False
    xi_s = lam_min
    return SqueezingReport(xi_s, xi_s / polarization**2, lam_min, lam_max, axis_min, axis_max,
                           angle, float(polarization), iso)


def gaussian_squeezing(pack: CovariancePack) -> SqueezingReport:
    """Squeezing in the thermodynamic limit, where the polarisation is 1."""
    return principal_transverse(pack.Sigma_perp, pack.coalesce_axis_transverse, 1.0)


def dephasing_coefficients(p: PresetParams) -> tuple[float, float, float]:
    """Z-independent coefficients (d11, d12, d22) of the rotated diffusion.

    D'_perp = [[d11, d12 Z], [d12 Z, gamma_z + d22 Z^2]].
    """
    k, w = p.kappa, p.omega
    q = k * k + w * w
    d11 = 2 * k + (p.gamma_x * k * k + p.gamma_y * w * w) / q
    d12 = k * w * (p.gamma_x - p.gamma_y) / q
    d22 = 2 * k + (p.gamma_x * w * w + p.gamma_y * k * k) / q - p.gamma_z
    return d11, d12, d22


def dephasing_covariance_closed_form(p: PresetParams, Z: float) -> np.ndarray:
    """Stationary Sigma'_perp of the preset model with dephasing, in closed form."""
    if Z == 0 or abs(Z) < 1e-300:
        raise AtCriticalPoint("Z_* = 0: the stationary covariance diverges")
    if Z > 0:
        raise ValueError("closed form applies to the stable branch Z_* < 0")
    k, w, gz = p.kappa, p.omega, p.gamma_z
    q = k * k + w * w
    d11, d12, d22 = dephasing_coefficients(p)
    Z2 = Z * Z
    s11 = -(((2 * k * k + w * w) * d11 + 2 * k * w * d12 + w * w * d22) * Z2 + gz * w * w) \
        / (4 * k * q * Z**3)
    s12 = (w * d11 * Z2 - 2 * k * d12 * Z2 - w * d22 * Z2 - gz * w) / (4 * q * Z2)
    s22 = -((w * w * d11 - 2 * k * w * d12 + (2 * k * k + w * w) * d22) * Z2
            + (2 * k * k + w * w) * gz) / (4 * k * q * Z)
    return np.array([[s11, s12], [s12, s22]])


def _rotated_d22(spec: SpinModelSpec, phi: float, Z: float) -> float:
    r = np.sqrt(1.0 - Z * Z)
    M = np.array([r * np.cos(phi), r * np.sin(phi), Z])
    R = aligned_rotation(M).rotation
    return float((R @ diffusion(spec, M) @ R.T)[1, 1])


def dz_component(spec: SpinModelSpec, branch_point=None) -> float:
    """Z-independent part of (D'_perp)_22 near the critical point.

    The rotated diffusion is evaluated on the unit sphere at the azimuth of
    ``branch_point`` for |Z| in ``DZ_FIT_POINTS`` and fitted to a + b Z^2; a
    third point checks the fit.  If no branch point is given, the PT-broken
    fixed point of ``spec`` is searched for (stable one preferred).
    """
    if branch_point is None:
        found = [b for b in find_fixed_points(spec).branches if b.pt_character == "broken"]
        if not found:
            raise NoBrokenBranch("spec has no PT-broken fixed point")
        found.sort(key=lambda b: (b.stability != "stable", abs(b.Z)))
        branch_point = found[0].point
    M = np.asarray(branch_point, dtype=float)
    phi = float(np.arctan2(M[1], M[0]))
    sgn = -1.0 if M[2] <= 0 else 1.0
    z = np.array(DZ_FIT_POINTS) * sgn
    vals = np.array([_rotated_d22(spec, phi, zi) for zi in z])
    b = (vals[1] - vals[0]) / (z[1] ** 2 - z[0] ** 2)
    a = vals[0] - b * z[0] ** 2
    zc = DZ_CHECK_POINT * sgn
    resid = abs(_rotated_d22(spec, phi, zc) - (a + b * zc * zc))
    if resid > DZ_FIT_TOL:
        raise FitFailure(f"a + b Z^2 fit residual {resid:.3e} exceeds {DZ_FIT_TOL}")
    return float(a)


def example_dz(p: PresetParams) -> float:
    return dz_component(build_example_model(p), example_branch(p).point)


@dataclass(frozen=True)
class ScalingExponents:
    slope_min: float
    slope_max: float
    slope_11: float
    r2_min: float
    r2_max: float
    r2_11: float
    n_points: int
    skipped: list = field(default_factory=list)   # (delta, message)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("slope_min", "slope_max", "slope_11", "r2_min",
                                              "r2_max", "r2_11", "n_points")} | {
            "skipped": [[d, m] for d, m in self.skipped]}


def _loglog_fit(x, y) -> tuple[float, float]:
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    return float(coef[0]), 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def scaling_exponents(p: PresetParams, delta_grid) -> ScalingExponents:
    """Log-log slopes of lambda_min, lambda_max and Sigma'_11 against |Z_*|."""
    grid = np.asarray(delta_grid, dtype=float)
    if grid.size < 5 or np.any(grid <= 0):
        raise ValueError("need at least 5 strictly positive delta values")
    if np.log10(grid.max() / grid.min()) < 2 - 1e-9:
        raise ValueError("delta grid must span at least two decades")
    zs, lmin, lmax, s11, skipped = [], [], [], [], []
    for d in grid:
        q = p.with_delta(float(d))
        try:
            pack = example_covariance(q)
        except (NonHurwitzJacobian, SingularSystem, NoBrokenBranch) as exc:
            skipped.append((float(d), str(exc)))
            continue
        w = np.linalg.eigvalsh(pack.Sigma_perp)
        zs.append(abs(pack.frame.rotation[2, 2]))
        lmin.append(w[0])
        lmax.append(w[1])
        s11.append(pack.Sigma_perp[0, 0])
    if len(zs) < 2:
        raise FitFailure("fewer than two solvable grid points")
    zs = np.array(zs)
    a, ra = _loglog_fit(zs, lmin)
    b, rb = _loglog_fit(zs, lmax)
    c, rc = _loglog_fit(zs, np.abs(s11))
    return ScalingExponents(a, b, c, ra, rb, rc, len(zs), skipped)
