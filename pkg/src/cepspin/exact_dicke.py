"""Exact steady states in the symmetric (Dicke) sector of a collective spin.

Density matrices are flattened row-major, so ``vec(A rho B) = (A kron B^T)
vec(rho)`` and the Liouvillian reads

    L = -i (H x I - I x H^T) + sum_mu [ L_mu x conj(L_mu)
          - 1/2 (L_mu^dag L_mu x I + I x (L_mu^dag L_mu)^T) ].

Basis ordering is |S, m> with m = -S, ..., S.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import gammaln

from .collective_model import SpinModelSpec, validate_spin
from .errors import DimensionTooLarge, NegativeDensity, NonUniqueSteadyState, ZeroMeanSpin
from .fluctuations import SqueezingReport, principal_transverse
from .meanfield import aligned_rotation

DEFAULT_MAX_SPIN = 350
DENSE_LIMIT = 1024          # (2S+1)^2 at or below which the dense SVD path is used
UNIQUENESS_TOL = 1e-10
CLIP_BAND = 1e-8


@dataclass(frozen=True)
class DickeOperators:
    S: float
    Sx: object
    Sy: object
    Sz: object
    Sp: object
    Sm: object

    @property
    def dim(self) -> int:
        return int(round(2 * self.S)) + 1

    @property
    def components(self):
        return (self.Sx, self.Sy, self.Sz)


def dicke_operators(S, sparse: bool = True) -> DickeOperators:
    S = validate_spin(S)
    d = int(round(2 * S)) + 1
    m = np.arange(d) - S
    ladder = np.sqrt(S * (S + 1) - m[:-1] * (m[:-1] + 1))
    Sp = sp.diags(ladder.astype(complex), -1, shape=(d, d), format="csr")
    Sm = Sp.T.tocsr()
    Sz = sp.diags(m.astype(complex), 0, format="csr")
    Sx = ((Sp + Sm) * 0.5).tocsr()
    Sy = ((Sp - Sm) * (-0.5j)).tocsr()
    if not sparse:
        Sx, Sy, Sz, Sp, Sm = (A.toarray() for A in (Sx, Sy, Sz, Sp, Sm))
    return DickeOperators(S, Sx, Sy, Sz, Sp, Sm)


def model_operators(spec: SpinModelSpec, ops: DickeOperators):
    """Return (H, [L_mu]) for ``spec`` in the representation of ``ops``."""
    S = ops.S
    m = [A / S for A in ops.components]
    B, K = spec.field_vector, spec.coupling_matrix
    H = sum(B[i] * m[i] for i in range(3) if B[i] != 0) * S if np.any(B) else 0 * m[2]
    for i in range(3):
        for j in range(3):
            if K[i, j] != 0:
                H = H + S * K[i, j] * (m[i] @ m[j] + m[j] @ m[i])
    Ls = []
    for ch in spec.channels:
        ell = ch.vector
        L = sum(ell[i] * m[i] for i in range(3) if ell[i] != 0)
        if isinstance(L, int):
            continue
        Ls.append(np.sqrt(S) * L)
    return H, Ls


def liouvillian_from_operators(H, Ls, sparse: bool = True):
    d = H.shape[0]
    if sparse:
        eye = sp.identity(d, dtype=complex, format="csr")
        kron = sp.kron
        H = sp.csr_matrix(H)
        Ls = [sp.csr_matrix(L) for L in Ls]
    else:
        eye = np.eye(d, dtype=complex)
        kron = np.kron
        H = np.asarray(H)
        Ls = [np.asarray(L) for L in Ls]
    out = -1j * (kron(H, eye) - kron(eye, H.T))
    for L in Ls:
        LdL = L.conj().T @ L
        out = out + kron(L, L.conj()) - 0.5 * (kron(LdL, eye) + kron(eye, LdL.T))
    return out.tocsr() if sparse else out


def build_liouvillian(spec: SpinModelSpec, S, max_spin: float = DEFAULT_MAX_SPIN):
    """Sparse Liouvillian of ``spec`` in the spin-S Dicke sector."""
    S = validate_spin(S)
    if S > max_spin:
        raise DimensionTooLarge(f"S={S} exceeds the configured cap {max_spin}")
    ops = dicke_operators(S, sparse=True)
    H, Ls = model_operators(spec, ops)
    return liouvillian_from_operators(H, Ls, sparse=True)


@dataclass
class DickeState:
    S: float
    rho: np.ndarray
    residual: float
    min_eigenvalue: float
    solver: str
    runtime: float = 0.0

    @property
    def dim(self) -> int:
        return self.rho.shape[0]


def _finalise(rho: np.ndarray, liouvillian, S: float, solver: str, t0: float) -> DickeState:
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    w, V = np.linalg.eigh(rho)
    lam_min = float(w[0])
    if lam_min < -CLIP_BAND:
        raise NegativeDensity(f"steady state eigenvalue {lam_min:.3e} below -{CLIP_BAND}")
    if lam_min < 0:
        w = np.clip(w, 0.0, None)
        rho = (V * w) @ V.conj().T
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
    residual = float(np.linalg.norm(liouvillian @ rho.reshape(-1)))
    return DickeState(S, rho, residual, lam_min, solver, time.perf_counter() - t0)


def steady_state(liouvillian, S, method: str = "auto", dense_limit: int = DENSE_LIMIT) -> DickeState:
    """Null vector of ``liouvillian`` normalised to a density matrix.

    ``method`` is ``"dense_null"``, ``"sparse_lu"`` or ``"auto"`` (dense up to
    ``dense_limit`` vectorised dimension).  The sparse path replaces the
    equation for the |S,S><S,S| element by the trace condition.
    """
    S = validate_spin(S)
    d = int(round(2 * S)) + 1
    n = d * d
    if liouvillian.shape != (n, n):
        raise ValueError("Liouvillian shape does not match S")
    if method == "auto":
        method = "dense_null" if n <= dense_limit else "sparse_lu"
    t0 = time.perf_counter()
    if method == "dense_null":
        Ld = liouvillian.toarray() if sp.issparse(liouvillian) else np.asarray(liouvillian)
        _, sv, Vh = scipy.linalg.svd(Ld)
        scale = max(1.0, sv[0])
        if sv[-2] < UNIQUENESS_TOL * scale:
            raise NonUniqueSteadyState(f"second singular value {sv[-2]:.3e} is numerically zero")
        rho = Vh[-1].conj().reshape(d, d)
        return _finalise(rho, Ld, S, "dense_null", t0)
    if method != "sparse_lu":
        raise ValueError(f"unknown steady-state method {method!r}")
    A = sp.lil_matrix(liouvillian)
    row = n - 1  # |S,S><S,S|
    A.rows[row] = []
    A.data[row] = []
    diag = np.arange(d) * (d + 1)
    for k in diag:
        A[row, k] = 1.0
    rhs = np.zeros(n, dtype=complex)
    rhs[row] = 1.0
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise NonUniqueSteadyState(f"trace-replaced system is singular: {exc}") from exc
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise NonUniqueSteadyState("trace-replaced solve produced non-finite values")
    rho = x.reshape(d, d)
    state = _finalise(rho, liouvillian, S, "sparse_lu", t0)
    if state.residual > 1e-6:
        raise NonUniqueSteadyState(f"residual {state.residual:.3e}: replaced equation was not redundant")
    return state


def solve_steady_state(spec: SpinModelSpec, S, method: str = "auto",
                       max_spin: float = DEFAULT_MAX_SPIN) -> DickeState:
    return steady_state(build_liouvillian(spec, S, max_spin), S, method=method)


def _expect(rho: np.ndarray, A) -> complex:
    # Tr(rho A) = sum_ij rho_ij A_ji
    if sp.issparse(A):
        return complex(A.multiply(rho.T).sum())
    return complex(np.sum(rho * A.T))


@dataclass(frozen=True)
class SpinMoments:
    mean: np.ndarray        # <m_alpha>
    cov: np.ndarray         # 1/2 <{S_a, S_b}> - <S_a><S_b>
    scaled_cov: np.ndarray  # covariance of eta = sqrt(N)(m - M)
    mz_sq: float            # <m_z^2>

    @property
    def sqrt_mean_z_sq(self) -> float:
        return float(np.sqrt(self.mz_sq))


def spin_moments(state: DickeState) -> SpinMoments:
    ops = dicke_operators(state.S, sparse=True)
    S = state.S
    comps = ops.components
    mean_S = np.array([_expect(state.rho, A).real for A in comps])
    second = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            val = 0.5 * _expect(state.rho, comps[a] @ comps[b] + comps[b] @ comps[a]).real
            second[a, b] = second[b, a] = val
    cov = second - np.outer(mean_S, mean_S)
    N = 2 * S
    scaled = N * cov / S**2
    return SpinMoments(mean_S / S, cov, scaled, float(second[2, 2] / S**2))


def exact_squeezing(state: DickeState, moments: SpinMoments | None = None) -> SqueezingReport:
    """Kitagawa-Ueda and Wineland parameters of an exact finite-S state.

    ``lambda_min``/``lambda_max`` are reported in the normalised units
    2 Var(S_perp) / S, so that ``xi_s_sq == lambda_min``.
    """
    mom = spin_moments(state) if moments is None else moments
    S = state.S
    mean_S = mom.mean * S
    norm = float(np.linalg.norm(mean_S))
    if norm <= 1e-9:
        raise ZeroMeanSpin("mean spin vanishes; the transverse plane is undefined")
    frame = aligned_rotation(mean_S)
    cov_rot = frame.rotation @ mom.cov @ frame.rotation.T
    block = 2.0 * cov_rot[:2, :2] / S
    coalesce = frame.rotation[:2, 2]
    pol = norm / S
    return principal_transverse(block, coalesce, polarization=pol)


@dataclass
class HusimiField:
    S: float
    theta_nodes: np.ndarray
    phi_nodes: np.ndarray
    weights: np.ndarray          # solid-angle quadrature weights, shape (n_theta, n_phi)
    values: np.ndarray           # Q(theta, phi), shape (n_theta, n_phi)
    tangent_x: np.ndarray        # local coordinate along the first transverse axis
    tangent_y: np.ndarray
    tangent_values: np.ndarray   # Q on the (tangent_y, tangent_x) grid; NaN outside the disc
    tangent_basis: np.ndarray    # rows: e1, e2, mean-spin direction

    def normalization(self) -> float:
        return float(np.sum(self.weights * self.values))

    def tangent_covariance(self) -> np.ndarray:
        """Q-weighted second moments of the tangent-plane field."""
        X, Y = np.meshgrid(self.tangent_x, self.tangent_y)
        Q = np.nan_to_num(self.tangent_values)
        w = Q / Q.sum()
        mx, my = np.sum(w * X), np.sum(w * Y)
        cxx = np.sum(w * (X - mx) ** 2)
        cyy = np.sum(w * (Y - my) ** 2)
        cxy = np.sum(w * (X - mx) * (Y - my))
        return np.array([[cxx, cxy], [cxy, cyy]])

    def principal_axis(self) -> np.ndarray:
        _, v = np.linalg.eigh(self.tangent_covariance())
        return v[:, -1]

    def csv_rows(self):
        for i, th in enumerate(self.theta_nodes):
            for j, ph in enumerate(self.phi_nodes):
                yield th, ph, self.values[i, j]

    def to_json(self) -> dict:
        def clean(a):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in a]
        return {
            "S": self.S,
            "theta": self.theta_nodes.tolist(),
            "phi": self.phi_nodes.tolist(),
            "weights": self.weights.tolist(),
            "Q": self.values.tolist(),
            "tangent": {
                "x": self.tangent_x.tolist(),
                "y": self.tangent_y.tolist(),
                "Q": clean(self.tangent_values),
                "basis": self.tangent_basis.tolist(),
            },
        }


def _coherent_amplitudes(S: float, theta: np.ndarray) -> np.ndarray:
    """|<S,m|theta,phi=0>| for each theta (rows) and m = -S..S (columns)."""
    d = int(round(2 * S)) + 1
    m = np.arange(d) - S
    log_binom = 0.5 * (gammaln(2 * S + 1) - gammaln(S + m + 1) - gammaln(S - m + 1))
    lc = np.log(np.cos(theta / 2))[:, None]
    ls = np.log(np.sin(theta / 2))[:, None]
    return np.exp(log_binom[None, :] + (S + m)[None, :] * lc + (S - m)[None, :] * ls)


def _q_at(rho: np.ndarray, S: float, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Q at scattered points (theta_k, phi_k)."""
    d = rho.shape[0]
    m = np.arange(d) - S
    amp = _coherent_amplitudes(S, theta) * np.exp(1j * np.outer(phi, S - m))
    C = 4 * np.pi / (2 * S + 1)
    return np.real(np.einsum("ki,ij,kj->k", amp.conj(), rho, amp)) / C


def husimi_q(state: DickeState, n_theta: int | None = None, n_phi: int | None = None,
             tangent_points: int = 81, tangent_extent: float = 0.95) -> HusimiField:
    """Spin Husimi function on a Gauss-Legendre x uniform grid.

    Q is a trigonometric polynomial of degree 2S in phi and, after the phi
    average, a polynomial of degree 2S in cos(theta).  The default grid
    (n_theta > S, n_phi > 2S, at least 64 each) therefore integrates it
    exactly.

    Coherent states are |theta,phi> = exp(-i phi S_z) exp(-i theta S_y)|S,S>
    (up to a global phase), so the field peaks at the mean-spin direction.
    The tangent field is Q sampled on a Cartesian grid in the plane
    orthogonal to the mean spin, using the aligned-frame transverse axes.
    """
    S = state.S
    if n_theta is None:
        n_theta = max(64, int(S) + 2)
    if n_phi is None:
        n_phi = max(64, int(2 * S) + 2)
    if n_theta < 16 or n_phi < 16:
        raise ValueError("n_theta and n_phi must be >= 16")
    rho = state.rho
    d = rho.shape[0]
    m = np.arange(d) - S
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(-x)  # ascending in theta; Legendre weights are symmetric
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    weights = np.outer(wx, np.full(n_phi, 2 * np.pi / n_phi))
    amp = _coherent_amplitudes(S, theta)              # (n_theta, d)
    phase = np.exp(1j * np.outer(S - m, phi))         # (d, n_phi)
    C = 4 * np.pi / (2 * S + 1)
    values = np.empty((n_theta, n_phi))
    for i in range(n_theta):
        A = amp[i][:, None] * phase                   # (d, n_phi)
        values[i] = np.real(np.sum(A.conj() * (rho @ A), axis=0)) / C

    mean = np.array([_expect(rho, op).real for op in dicke_operators(S).components])
    if np.linalg.norm(mean) > 1e-12:
        R = aligned_rotation(mean).rotation
    else:
        R = np.eye(3)
    e1, e2, n = R[0], R[1], R[2]
    t = np.linspace(-tangent_extent, tangent_extent, tangent_points)
    TX, TY = np.meshgrid(t, t)
    rr = TX**2 + TY**2
    inside = rr < 1.0
    u = (TX[..., None] * e1 + TY[..., None] * e2
         + np.sqrt(np.clip(1.0 - rr, 0.0, None))[..., None] * n)
    th = np.arccos(np.clip(u[..., 2], -1.0, 1.0))
    ph = np.arctan2(u[..., 1], u[..., 0])
    tang = np.full(TX.shape, np.nan)
    # keep away from the poles where log(sin) / log(cos) diverge
    th_safe = np.clip(th, 1e-12, np.pi - 1e-12)
    tang[inside] = _q_at(rho, S, th_safe[inside], ph[inside])
    return HusimiField(S, theta, phi, weights, values, t, t.copy(), tang, np.vstack([e1, e2, n]))


_RHO_MAGIC = b"CEPRHO1\n"


def dump_density_matrix(state: DickeState, path) -> None:
    """Write rho as magic, uint32-LE header length, JSON header, complex128-LE data.

    Data is row-major with real and imaginary parts interleaved.
    """
    header = json.dumps({
        "S": state.S, "dim": state.dim, "dtype": "complex128", "byte_order": "little",
        "layout": "row-major, interleaved re/im", "residual": state.residual,
        "solver": state.solver,
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_RHO_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(state.rho, dtype="<c16").tobytes())


def load_density_matrix(path) -> tuple[dict, np.ndarray]:
    raw = Path(path).read_bytes()
    if not raw.startswith(_RHO_MAGIC):
        raise ValueError("not a density-matrix dump")
    off = len(_RHO_MAGIC)
    (hlen,) = struct.unpack("<I", raw[off:off + 4])
    header = json.loads(raw[off + 4:off + 4 + hlen])
    d = header["dim"]
    data = np.frombuffer(raw[off + 4 + hlen:], dtype="<c16").reshape(d, d)
    return header, data.copy()
