"""Mean-field drift, fixed points and the mean-spin-aligned frame.

With intensive spins obeying [m_a, m_b] = (i/S) eps_abc m_c and mean-field
factorisation, the equation of motion of M = <m> for a model (B, K, l_mu) is

    dM/dt = B x M + 4 (K M) x M - sum_mu Im( conj(l_mu . M) (l_mu x M) ).

Every term is orthogonal to M, so |M| is conserved and the dynamics lives
on spheres.  Consequently the full 3x3 Jacobian at a fixed point always has
a radial zero mode (M^T J = 0); stability is decided from the 2x2 tangent
block in the aligned frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .collective_model import PresetParams, SpinModelSpec, build_example_model
from .errors import NoBrokenBranch, NoConvergence, ZeroVector

STABILITY_TOL = 1e-10
PT_TOL = 1e-9
DEGENERATE_RPERP = 1e-12
NEWTON_TOL = 1e-12
DEDUP_DIST = 1e-8
MAX_HALVINGS = 30


def _hat(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: _hat(a) @ b == a x b."""
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])


def drift(spec: SpinModelSpec, M) -> np.ndarray:
    M = np.asarray(M, dtype=float).reshape(3)
    B, K = spec.field_vector, spec.coupling_matrix
    g = np.cross(B, M) + 4.0 * np.cross(K @ M, M)
    for ell in spec.channel_vectors:
        g -= np.imag(np.conj(ell @ M) * np.cross(ell, M))
    return g


def jacobian(spec: SpinModelSpec, M) -> np.ndarray:
    """Analytic dg_i/dM_j."""
    M = np.asarray(M, dtype=float).reshape(3)
    B, K = spec.field_vector, spec.coupling_matrix
    J = _hat(B) + 4.0 * (_hat(K @ M) - _hat(M) @ K)
    for ell in spec.channel_vectors:
        J -= np.imag(np.outer(np.cross(ell, M), ell.conj()) + np.conj(ell @ M) * _hat(ell))
    return J


def jacobian_fd(spec: SpinModelSpec, M, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian; test fallback only."""
    M = np.asarray(M, dtype=float).reshape(3)
    cols = [(drift(spec, M + step * e) - drift(spec, M - step * e)) / (2 * step) for e in np.eye(3)]
    return np.array(cols).T


@dataclass(frozen=True)
class AlignedFrame:
    rotation: np.ndarray
    r_perp: float
    degenerate: bool

    @property
    def coalesce_axis_transverse(self) -> np.ndarray:
        """Normalised transverse projection of R e_z."""
        v = self.rotation[:2, 2]
        n = np.linalg.norm(v)
        return v / n if n > 0 else np.array([1.0, 0.0])


def aligned_rotation(M) -> AlignedFrame:
    """Orthogonal R with R M = (0, 0, |M|).

    Rows of R are the first transverse axis, the second transverse axis and
    the mean-spin direction.  On the z-axis R is I (north) or
    diag(1, -1, -1) (south).
    """
    M = np.asarray(M, dtype=float).reshape(3)
    norm = float(np.linalg.norm(M))
    if norm <= 1e-12:
        raise ZeroVector("mean vector vanishes")
    X, Y, Z = M / norm
    r = float(np.hypot(X, Y))
    if r < DEGENERATE_RPERP:
        R = np.eye(3) if Z > 0 else np.diag([1.0, -1.0, -1.0])
        return AlignedFrame(R, r * norm, True)
    c, s = X / r, Y / r
    R = np.array([[Z * c, Z * s, -r], [-s, c, 0.0], [r * c, r * s, Z]])
    return AlignedFrame(R, r * norm, False)


@dataclass(frozen=True)
class TransverseBlocks:
    J_perp: np.ndarray
    D_perp: np.ndarray
    coalesce_axis_transverse: np.ndarray
    J_rot: np.ndarray
    D_rot: np.ndarray


def transverse_blocks(J, D, frame: AlignedFrame) -> TransverseBlocks:
    R = frame.rotation
    Jr = R @ np.asarray(J) @ R.T
    Dr = R @ np.asarray(D) @ R.T
    Dr = 0.5 * (Dr + Dr.T)
    return TransverseBlocks(Jr[:2, :2].copy(), Dr[:2, :2].copy(),
                            frame.coalesce_axis_transverse, Jr, Dr)


@dataclass(frozen=True)
class FixedPointBranch:
    """Mean-field fixed point.

    ``jacobian_eigenvalues`` are those of the full 3x3 Jacobian and include
    the radial zero mode; ``tangent_eigenvalues`` are those of the aligned
    2x2 tangent block, which decide ``stability``.
    """

    point: np.ndarray
    jacobian_eigenvalues: np.ndarray
    tangent_eigenvalues: np.ndarray
    stability: str
    pt_character: str
    branch_sign: str

    @property
    def X(self) -> float:
        return float(self.point[0])

    @property
    def Y(self) -> float:
        return float(self.point[1])

    @property
    def Z(self) -> float:
        return float(self.point[2])


def _classify(ev: np.ndarray) -> str:
    if ev.size == 0:
        return "marginal"
    top = float(np.max(ev.real))
    if top > STABILITY_TOL:
        return "unstable"
    if top >= -STABILITY_TOL:
        return "marginal"
    return "stable"


def classify_point(spec: SpinModelSpec, M) -> FixedPointBranch:
    M = np.asarray(M, dtype=float).reshape(3)
    J = jacobian(spec, M)
    full = np.linalg.eigvals(J)
    if np.linalg.norm(M) > 1e-12:
        R = aligned_rotation(M).rotation
        tangent = np.linalg.eigvals((R @ J @ R.T)[:2, :2])
    else:
        tangent = full
    return FixedPointBranch(
        point=M,
        jacobian_eigenvalues=full,
        tangent_eigenvalues=tangent,
        stability=_classify(tangent),
        pt_character="symmetric" if abs(M[2]) < PT_TOL else "broken",
        branch_sign="-" if M[2] < 0 else "+",
    )


def example_branch(p: PresetParams, sign: int = -1) -> FixedPointBranch:
    """PT-broken fixed point of the preset model (stable for ``sign=-1``)."""
    kc = p.kappa_c
    if not np.isfinite(kc):
        raise NoBrokenBranch("critical decay rate is not real (g^2 < omega^2)")
    if not p.kappa > kc:
        raise NoBrokenBranch(f"kappa={p.kappa} does not exceed kappa_c={kc} (delta <= 0)")
    q = p.kappa**2 + p.omega**2
    if p.omega != 0:
        r, d = p.r, p.delta
        Z = -np.sqrt(d * (2 * r + d) / (1 + (r + d) ** 2))
    else:
        Z = -np.sqrt(1.0 - p.g**2 / q)
    X = p.g * p.omega / q
    Y = p.g * p.kappa / q
    M = np.array([X, Y, -Z if sign > 0 else Z])
    return classify_point(build_example_model(p), M)


def sphere_seeds() -> list[np.ndarray]:
    """The 26 directions of the 3x3x3 cube surface, normalised."""
    return [np.array(v) / np.linalg.norm(v) for v in product((-1.0, 0.0, 1.0), repeat=3) if any(v)]


@dataclass(frozen=True)
class FixedPointSearch:
    branches: list
    failures: list   # (seed index, message)


def _newton(spec: SpinModelSpec, M0: np.ndarray, max_iter: int = 100) -> np.ndarray:
    # Newton with the norm constraint |M| = |M0|, since the drift is
    # tangential and J is singular along M; iterates are projected back
    # onto the sphere.
    M = np.asarray(M0, dtype=float).copy()
    rad = float(np.linalg.norm(M))
    f = drift(spec, M)
    for _ in range(max_iter):
        res = float(np.linalg.norm(f))
        if res < NEWTON_TOL:
            return M
        A = np.vstack([jacobian(spec, M), 2 * M])
        b = -np.concatenate([f, [M @ M - rad * rad]])
        step = np.linalg.lstsq(A, b, rcond=None)[0]
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = M + t * step
            trial *= rad / np.linalg.norm(trial)
            ft = drift(spec, trial)
            if np.linalg.norm(ft) < res:
                break
            t *= 0.5
        else:
            raise NoConvergence(f"line search stalled at |g|={res:.3e}")
        M, f = trial, ft
    if np.linalg.norm(f) < NEWTON_TOL:
        return M
    raise NoConvergence(f"no convergence after {max_iter} iterations, |g|={np.linalg.norm(f):.3e}")


def find_fixed_points(spec: SpinModelSpec, seeds: Sequence | None = None) -> FixedPointSearch:
    """Damped Newton from each seed, deduplicated, classified."""
    seeds = sphere_seeds() if seeds is None else [np.asarray(s, dtype=float) for s in seeds]
    if not seeds:
        raise ValueError("at least one seed is required")
    found: list[np.ndarray] = []
    failures = []
    for i, s in enumerate(seeds):
        try:
            M = _newton(spec, s)
        except NoConvergence as exc:
            failures.append((i, str(exc)))
            continue
        if not any(np.linalg.norm(M - F) < DEDUP_DIST for F in found):
            found.append(M)
    return FixedPointSearch([classify_point(spec, M) for M in found], failures)


@dataclass(frozen=True)
class Defectiveness:
    rank_J: int
    norm_J_squared: float
    eigvec_condition: float
    min_eigval_gap: float

    def to_dict(self) -> dict:
        return {"rank_J": self.rank_J, "norm_J_squared": self.norm_J_squared,
                "eigvec_condition": self.eigvec_condition, "min_eigval_gap": self.min_eigval_gap}


def cep_defectiveness(J) -> Defectiveness:
    J = np.asarray(J, dtype=float)
    sv = np.linalg.svd(J, compute_uv=False)
    scale = sv[0] if sv.size else 0.0
    rank = int(np.sum(sv > 1e-9 * scale)) if scale > 0 else 0
    ev, V = np.linalg.eig(J)
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond):
        cond = np.inf
    n = len(ev)
    gap = min(abs(ev[i] - ev[j]) for i in range(n) for j in range(i + 1, n)) if n > 1 else np.inf
    return Defectiveness(rank, float(np.linalg.norm(J @ J, 2)), cond, float(gap))
