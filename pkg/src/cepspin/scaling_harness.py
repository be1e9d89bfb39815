"""Parameter sweeps of exact steady states and finite-size-scaling collapses."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.interpolate import PchipInterpolator

from .collective_model import PresetParams, build_example_model
from .errors import CEPError, InsufficientOverlap, PlateauNotResolved
from .exact_dicke import (DEFAULT_MAX_SPIN, DENSE_LIMIT, build_liouvillian, exact_squeezing,
                          spin_moments, steady_state)
from .fluctuations import example_covariance, gaussian_squeezing
from .output import csv_text

COLLAPSE_GRID_POINTS = 50


@dataclass(frozen=True)
class SweepRow:
    S: float
    delta: float
    gamma_x: float
    gamma_y: float
    gamma_z: float
    xi_s_sq: float = math.nan
    xi_r_sq: float = math.nan
    mean_z: float = math.nan
    sqrt_mean_z_sq: float = math.nan
    polarization: float = math.nan
    residual: float = math.nan
    gaussian_xi_s_sq: float = math.nan
    gaussian_Z: float = math.nan
    error: str = ""
    runtime: float = field(default=0.0, compare=False)


# runtime is wall-clock and would break byte-identical outputs
CSV_COLUMNS = [f.name for f in fields(SweepRow) if f.name != "runtime"]


@dataclass
class SweepResult:
    rows: list
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r.S, r.delta))
        keys = [(r.S, r.delta) for r in self.rows]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (S, delta) rows")

    @property
    def S_values(self) -> list:
        return sorted({r.S for r in self.rows})

    def for_S(self, S) -> list:
        return [r for r in self.rows if r.S == S]

    def column(self, S, name: str) -> tuple[np.ndarray, np.ndarray]:
        rows = self.for_S(S)
        return (np.array([r.delta for r in rows]), np.array([getattr(r, name) for r in rows]))

    def to_csv(self) -> str:
        rows = ([getattr(r, c) for c in CSV_COLUMNS] for r in self.rows)
        return csv_text(CSV_COLUMNS, rows, self.provenance)

    @classmethod
    def from_csv(cls, text: str) -> "SweepResult":
        prov, body = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition(":")
                prov[k.strip()] = v.strip()
            elif line:
                body.append(line)
        reader = csv.DictReader(body)
        rows = []
        for rec in reader:
            kw = {c: (rec[c] if c == "error" else float(rec[c])) for c in CSV_COLUMNS}
            rows.append(SweepRow(**kw))
        return cls(rows, prov)


def solve_point(base: PresetParams, S: float, delta: float, method: str = "auto",
                dense_limit: int = DENSE_LIMIT, max_spin: float = DEFAULT_MAX_SPIN) -> SweepRow:
    """Exact and Gaussian squeezing for one (S, delta); errors are recorded, not raised."""
    t0 = time.perf_counter()
    head = dict(S=float(S), delta=float(delta), gamma_x=base.gamma_x, gamma_y=base.gamma_y,
                gamma_z=base.gamma_z)
    errors = []
    try:
        p = base.with_delta(delta)
    except ValueError as exc:
        return SweepRow(**head, error=str(exc), runtime=time.perf_counter() - t0)
    out = {}
    if delta > 0:
        try:
            pack = example_covariance(p)
            out.update(gaussian_xi_s_sq=gaussian_squeezing(pack).xi_s_sq,
                       gaussian_Z=float(pack.frame.rotation[2, 2]))
        except CEPError as exc:
            errors.append(f"gaussian: {exc}")
    try:
        L = build_liouvillian(build_example_model(p), S, max_spin)
        st = steady_state(L, S, method=method, dense_limit=dense_limit)
        mom = spin_moments(st)
        out.update(mean_z=float(mom.mean[2]), sqrt_mean_z_sq=mom.sqrt_mean_z_sq,
                   polarization=float(np.linalg.norm(mom.mean)), residual=st.residual)
        sq = exact_squeezing(st, mom)
        out.update(xi_s_sq=sq.xi_s_sq, xi_r_sq=sq.xi_r_sq)
    except CEPError as exc:
        errors.append(f"exact: {type(exc).__name__}: {exc}")
    return SweepRow(**head, **out, error="; ".join(errors), runtime=time.perf_counter() - t0)


def _job(args) -> SweepRow:
    return solve_point(*args)


def sweep(base: PresetParams, S_list, delta_grid, threads: int = 1, method: str = "auto",
          dense_limit: int = DENSE_LIMIT, max_spin: float = DEFAULT_MAX_SPIN,
          provenance: dict | None = None) -> SweepResult:
    """One row per (S, delta), solved by a bounded process pool.

    Results are collected in grid order, so the output does not depend on
    the number of workers.
    """
    S_list, delta_grid = list(S_list), list(delta_grid)
    if not S_list or not delta_grid:
        raise ValueError("S_list and delta_grid must be non-empty")
    jobs = [(base, S, d, method, dense_limit, max_spin) for S in S_list for d in delta_grid]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_job, jobs))
    else:
        rows = [_job(j) for j in jobs]
    return SweepResult(rows, dict(provenance or {}))


@dataclass
class CollapseReport:
    observable: str
    a: float
    b: float
    log_correction: bool
    curves: dict            # S -> (scaled x, scaled y)
    grid: np.ndarray
    quality: float
    quality_unscaled: float

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "exponents": {"a": self.a, "b": self.b},
            "log_correction": self.log_correction,
            "quality": self.quality,
            "quality_unscaled": self.quality_unscaled,
            "grid": [float(self.grid[0]), float(self.grid[-1]), len(self.grid)],
            "curves": {str(S): {"x": list(map(float, x)), "y": list(map(float, y))}
                       for S, (x, y) in self.curves.items()},
        }


def collapse_quality(xs, ys, n: int = COLLAPSE_GRID_POINTS) -> tuple[float, np.ndarray]:
    """Normalised spread of curves about their pointwise median.

    Curves are PCHIP-interpolated onto ``n`` points strictly inside the
    common abscissa range; the score is mean((Y - median)^2) / mean(median^2).
    """
    lo = max(float(np.min(x)) for x in xs)
    hi = min(float(np.max(x)) for x in xs)
    if not hi > lo:
        raise InsufficientOverlap(f"scaled abscissae do not overlap (lo={lo:.4g}, hi={hi:.4g})")
    grid = np.linspace(lo, hi, n + 2)[1:-1]
    Y = np.array([PchipInterpolator(x, y, extrapolate=False)(grid) for x, y in zip(xs, ys)])
    med = np.median(Y, axis=0)
    return float(np.mean((Y - med) ** 2) / np.mean(med**2)), grid


_OBSERVABLES = {
    # name: (column, default a, default b); scaled y = y * L^a, scaled x = delta * L^b
    "order_parameter": ("sqrt_mean_z_sq", 1 / 3, 2 / 3),
    "inverse_squeezing": ("xi_s_sq", -1 / 3, 2 / 3),
}


def _size(S: float, log_correction: bool) -> float:
    return S / math.log(S) if log_correction else S


def fss_collapse(data: SweepResult, observable: str, log_correction: bool = False,
                 exponents: tuple[float, float] | None = None, column: str | None = None,
                 delta_max: float | None = None) -> CollapseReport:
    """Rescale curves for each S and score how well they coincide.

    ``order_parameter`` plots y S^{1/3} against delta S^{2/3} with y the
    sign-robust sqrt(<m_z^2>) unless ``column`` overrides it.
    ``inverse_squeezing`` plots G L^{-1/3} against delta L^{2/3} with
    G = 1/xi_S^2 and L = S/log S when ``log_correction`` is set.
    """
    if observable not in _OBSERVABLES:
        raise ValueError(f"unknown observable {observable!r}")
    col, a, b = _OBSERVABLES[observable]
    if exponents is not None:
        a, b = exponents
    col = column or col
    Ss = data.S_values
    if len(Ss) < 3:
        raise InsufficientOverlap(f"need at least 3 sizes, got {len(Ss)}")
    xs, ys, raw_x, raw_y = [], [], [], []
    for S in Ss:
        d, y = data.column(S, col)
        ok = np.isfinite(y)
        if delta_max is not None:
            ok &= d <= delta_max + 1e-12
        d, y = d[ok], y[ok]
        if d.size < 2:
            raise InsufficientOverlap(f"S={S} has fewer than two valid points")
        y = np.abs(y)
        if observable == "inverse_squeezing" and column is None:
            y = 1.0 / y
        L = _size(S, log_correction)
        raw_x.append(d)
        raw_y.append(y)
        xs.append(d * L**b)
        ys.append(y * L**a)
    q, grid = collapse_quality(xs, ys)
    q0, _ = collapse_quality(raw_x, raw_y)
    curves = {S: (x, y) for S, x, y in zip(Ss, xs, ys)}
    return CollapseReport(observable, a, b, log_correction, curves, grid, q, q0)


@dataclass
class GinzburgReport:
    column: str
    S_values: list
    plateau: list           # observable at the smallest delta, per S
    plateau_delta: list
    crossover_delta: list   # delta where S |Z_*|^3 = 1 in mean field
    value_at_crossover: list
    exponent: float
    r_squared: float

    def to_dict(self) -> dict:
        return asdict(self)


def _crossover_delta(base: PresetParams, S: float) -> float:
    # invert Z_*^2 = delta(2r + delta)/(1 + (r + delta)^2) at Z_*^2 = S^{-2/3}
    r = base.r
    z2 = S ** (-2.0 / 3.0)
    # (1 - z2) d^2 + 2 r (1 - z2) d - z2 (1 + r^2) = 0
    A, B, C = 1 - z2, 2 * r * (1 - z2), -z2 * (1 + r * r)
    return float((-B + math.sqrt(B * B - 4 * A * C)) / (2 * A))


def ginzburg_crossover(data: SweepResult, base: PresetParams,
                       column: str = "sqrt_mean_z_sq") -> GinzburgReport:
    """Fit the small-delta plateau of ``column`` against S.

    The plateau is the value at the smallest swept delta, which must lie
    inside the rounded region S |Z_*(delta)|^3 <= 1 for every S.
    """
    Ss = data.S_values
    if len(Ss) < 2:
        raise PlateauNotResolved("need at least two sizes")
    plateau, pdelta, cdelta, at_cross = [], [], [], []
    for S in Ss:
        d, y = data.column(S, column)
        ok = np.isfinite(y)
        d, y = d[ok], np.abs(y[ok])
        if d.size == 0:
            raise PlateauNotResolved(f"S={S} has no valid rows")
        dc = _crossover_delta(base, S)
        if d[0] > dc:
            raise PlateauNotResolved(
                f"S={S}: smallest delta {d[0]:.3g} lies outside the rounded region (delta_G={dc:.3g})")
        plateau.append(float(y[0]))
        pdelta.append(float(d[0]))
        cdelta.append(dc)
        at_cross.append(float(np.interp(dc, d, y)) if d[-1] >= dc else math.nan)
    lx, ly = np.log(Ss), np.log(plateau)
    slope, icpt = np.polyfit(lx, ly, 1)
    pred = slope * lx + icpt
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum((ly - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return GinzburgReport(column, [float(S) for S in Ss], plateau, pdelta, cdelta, at_cross,
                          float(slope), r2)
