"""Collective-spin models with quadratic Hamiltonians and linear jump operators.

A model is specified by a field vector ``B``, a real symmetric coupling
matrix ``K`` and a list of complex channel vectors ``l_mu``.  With intensive
spin operators ``m = S_vec / S`` these define

    H   = S * (B . m + sum_ij K_ij {m_i, m_j})
    L_mu = sqrt(S) * l_mu . m

The PT map used throughout is ``O -> (P T) O^dagger (P T)^-1`` with
``P = prod_i sigma_x^i`` and ``T`` complex conjugation in the S_z basis.
On the spin operators it acts as ``(m_x, m_y, m_z) -> (m_x, m_y, -m_z)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionTooLarge

SYMMETRY_TOL = 1e-10
DENSE_SYMMETRY_MAX_SPIN = 6


@dataclass(frozen=True)
class Channel:
    vector: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).reshape(3)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"channel {self.label!r} has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)


@dataclass(frozen=True)
class SpinModelSpec:
    """Quadratic-H / linear-L collective-spin model.

    ``coupling_matrix`` is symmetrised on construction; an input that is not
    symmetric to 1e-9 relative is rejected.  A model with every ingredient
    zero is rejected unless ``allow_trivial`` is set (useful as a test
    fixture).
    """

    field_vector: np.ndarray
    coupling_matrix: np.ndarray
    channels: tuple[Channel, ...] = ()
    allow_trivial: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        B = np.asarray(self.field_vector, dtype=float).reshape(3)
        K = np.asarray(self.coupling_matrix, dtype=float).reshape(3, 3)
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(K))):
            raise ValueError("field vector and coupling matrix must be finite")
        scale = max(1.0, float(np.abs(K).max()))
        if np.abs(K - K.T).max() > 1e-9 * scale:
            raise ValueError("coupling matrix must be symmetric")
        K = 0.5 * (K + K.T)
        chans = tuple(c if isinstance(c, Channel) else Channel(c) for c in self.channels)
        if not self.allow_trivial:
            if not (np.any(B) or np.any(K) or any(np.any(c.vector) for c in chans)):
                raise ValueError("model has no field, coupling or channel")
        B.setflags(write=False)
        K.setflags(write=False)
        object.__setattr__(self, "field_vector", B)
        object.__setattr__(self, "coupling_matrix", K)
        object.__setattr__(self, "channels", chans)

    @property
    def channel_vectors(self) -> list[np.ndarray]:
        return [c.vector for c in self.channels]

    def with_channels(self, channels: Iterable[Channel]) -> "SpinModelSpec":
        return SpinModelSpec(self.field_vector, self.coupling_matrix, tuple(channels),
                             allow_trivial=self.allow_trivial)


@dataclass(frozen=True)
class PresetParams:
    """Parameters of the transverse-field / twisting / collective-decay model.

    ``kappa_c = sqrt(g^2 - omega^2)`` is the critical decay rate and
    ``delta = (kappa - kappa_c) / omega`` the distance to the critical point.
    """

    g: float
    omega: float
    kappa: float
    gamma_x: float = 0.0
    gamma_y: float = 0.0
    gamma_z: float = 0.0

    def __post_init__(self):
        for name in ("g", "omega", "kappa", "gamma_x", "gamma_y", "gamma_z"):
            val = getattr(self, name)
            if not np.isfinite(val):
                raise ValueError(f"{name} must be finite")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if min(self.gamma_x, self.gamma_y, self.gamma_z) < 0:
            raise ValueError("dephasing rates must be non-negative")

    @classmethod
    def from_delta(cls, g: float, omega: float, delta: float, gamma_x: float = 0.0,
                   gamma_y: float = 0.0, gamma_z: float = 0.0) -> "PresetParams":
        if g * g <= omega * omega:
            raise ValueError("delta parametrisation needs g^2 > omega^2")
        kappa = np.sqrt(g * g - omega * omega) + delta * omega
        return cls(g, omega, float(kappa), gamma_x, gamma_y, gamma_z)

    def with_delta(self, delta: float) -> "PresetParams":
        return PresetParams.from_delta(self.g, self.omega, delta,
                                       self.gamma_x, self.gamma_y, self.gamma_z)

    @property
    def gammas(self) -> tuple[float, float, float]:
        return (self.gamma_x, self.gamma_y, self.gamma_z)

    @property
    def kappa_c(self) -> float:
        d = self.g * self.g - self.omega * self.omega
        return float(np.sqrt(d)) if d >= 0 else float("nan")

    @property
    def r(self) -> float:
        return self.kappa_c / self.omega

    @property
    def delta(self) -> float:
        return (self.kappa - self.kappa_c) / self.omega


def build_example_model(p: PresetParams) -> SpinModelSpec:
    """Transverse field g m_x, twisting omega m_z^2 / 2, collective decay.

    The twisting term S*omega*m_z^2/2 equals S*K_zz*{m_z, m_z} for
    K_zz = omega/4.

    Dephasing channels use the vector sqrt(gamma/2) e_alpha, i.e. the
    Lindblad operator sqrt(gamma S / 2) m_alpha.  With that normalisation the
    rotated diffusion of each dephasing channel carries the coefficient
    gamma (so D_z = gamma_z), matching the closed-form covariances in
    :mod:`cepspin.fluctuations`.
    """
    B = np.array([p.g, 0.0, 0.0])
    K = np.zeros((3, 3))
    K[2, 2] = p.omega / 4.0
    channels = []
    if p.kappa > 0:
        channels.append(Channel(np.sqrt(p.kappa) * np.array([1.0, -1.0j, 0.0]), "decay"))
    for axis, (name, rate) in enumerate(zip("xyz", p.gammas)):
        if rate > 0:
            vec = np.zeros(3, dtype=complex)
            vec[axis] = np.sqrt(rate / 2.0)
            channels.append(Channel(vec, f"dephasing_{name}"))
    return SpinModelSpec(B, K, tuple(channels), allow_trivial=True)


def pt_transform_channel(ell: Sequence[complex]) -> np.ndarray:
    """Coefficient vector of PT(l . m) = (PT) (l . m)^dagger (PT)^-1.

    The adjoint conjugates the coefficients and the antilinear PT conjugates
    them back, leaving only the parity sign on m_z.  So m_- maps to itself.
    """
    v = np.asarray(ell, dtype=complex).reshape(3)
    return np.array([v[0], v[1], -v[2]])


def pt_transform_model(spec: SpinModelSpec) -> SpinModelSpec:
    """Coefficient-level image of the whole model under the PT map."""
    flip = np.array([1.0, 1.0, -1.0])
    B = spec.field_vector * flip
    K = spec.coupling_matrix * np.outer(flip, flip)
    chans = tuple(Channel(pt_transform_channel(c.vector), f"PT({c.label})")
                  for c in spec.channels)
    return SpinModelSpec(B, K, chans, allow_trivial=True)


def validate_spin(S) -> float:
    """Return S as a float after checking it is a positive half-integer."""
    twoS = 2 * float(S)
    if twoS < 1 or abs(twoS - round(twoS)) > 1e-12:
        raise ValueError(f"S={S} is not a positive half-integer")
    return round(twoS) / 2


@dataclass(frozen=True)
class SymmetryReport:
    matrix_distance_direct: float
    matrix_distance_antilinear: float
    verdict: str
    test_spin: float

    def to_dict(self) -> dict:
        return {
            "matrix_distance_direct": self.matrix_distance_direct,
            "matrix_distance_antilinear": self.matrix_distance_antilinear,
            "verdict": self.verdict,
            "test_spin": self.test_spin,
        }


def check_lpt_symmetry(spec: SpinModelSpec, S=1, tol: float = SYMMETRY_TOL) -> SymmetryReport:
    """Compare the Liouvillian of ``spec`` with that of its PT image.

    The PT image is built at the operator level, ``P conj(O^dagger) P``,
    independently of :func:`pt_transform_channel`.  Two distances are
    reported: the plain max-abs difference of the superoperator matrices, and
    the difference after conjugating the transformed Liouvillian with the
    antilinear map rho -> P conj(rho) P.
    """
    from .exact_dicke import dicke_operators, liouvillian_from_operators, model_operators

    S = validate_spin(S)
    if S > DENSE_SYMMETRY_MAX_SPIN:
        raise DimensionTooLarge(f"dense symmetry check limited to S <= {DENSE_SYMMETRY_MAX_SPIN}")
    ops = dicke_operators(S, sparse=False)
    d = ops.dim
    P = np.fliplr(np.eye(d))  # prod sigma_x: |S,m> -> |S,-m>

    def pt(O):
        return P @ np.conj(O.conj().T) @ P

    H, Ls = model_operators(spec, ops)
    L0 = liouvillian_from_operators(H, Ls, sparse=False)
    L1 = liouvillian_from_operators(pt(H), [pt(L) for L in Ls], sparse=False)
    direct = float(np.abs(L0 - L1).max())
    A = np.kron(P, P)
    antilinear = float(np.abs(L0 - A @ np.conj(L1) @ A).max())
    if direct < tol:
        verdict = "symmetric_direct"
    elif antilinear < tol:
        verdict = "symmetric_antilinear"
    else:
        verdict = "broken"
    return SymmetryReport(direct, antilinear, verdict, S)


_PRESET_KEYS = {"g", "omega", "kappa", "delta", "gamma_x", "gamma_y", "gamma_z", "custom"}
_CUSTOM_KEYS = {"B", "K", "channels"}


def preset_from_mapping(section: Mapping) -> PresetParams:
    """Build :class:`PresetParams` from a ``[model]`` config table.

    Either ``kappa`` or ``delta`` may be given (not both).
    """
    unknown = set(section) - _PRESET_KEYS
    if unknown:
        raise ValueError(f"unknown [model] keys: {sorted(unknown)}")
    gam = {k: float(section.get(k, 0.0)) for k in ("gamma_x", "gamma_y", "gamma_z")}
    if "kappa" in section and "delta" in section:
        raise ValueError("give either kappa or delta, not both")
    g = float(section["g"])
    omega = float(section["omega"])
    if "delta" in section:
        return PresetParams.from_delta(g, omega, float(section["delta"]), **gam)
    return PresetParams(g, omega, float(section.get("kappa", 0.0)), **gam)


def spec_from_custom(section: Mapping) -> SpinModelSpec:
    """Build a model from a ``[model.custom]`` table.

    ``channels`` entries are tables with ``re`` and ``im`` 3-lists and an
    optional ``label``.
    """
    unknown = set(section) - _CUSTOM_KEYS
    if unknown:
        raise ValueError(f"unknown [model.custom] keys: {sorted(unknown)}")
    B = np.asarray(section.get("B", [0.0, 0.0, 0.0]), dtype=float)
    K = np.asarray(section.get("K", np.zeros((3, 3))), dtype=float)
    chans = []
    for i, ch in enumerate(section.get("channels", [])):
        extra = set(ch) - {"re", "im", "label"}
        if extra:
            raise ValueError(f"unknown channel keys: {sorted(extra)}")
        re = np.asarray(ch.get("re", [0, 0, 0]), dtype=float)
        im = np.asarray(ch.get("im", [0, 0, 0]), dtype=float)
        chans.append(Channel(re + 1j * im, ch.get("label", f"channel_{i}")))
    return SpinModelSpec(B, K, tuple(chans))
