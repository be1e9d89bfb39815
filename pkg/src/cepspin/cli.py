"""Command-line interface: ``cep <command> [options]``.

Every command writes delimited output (CSV with a ``#`` provenance header
and/or schema-versioned JSON) into ``--out`` and, unless ``--no-figures`` is
given, a PNG figure next to it.

Exit codes: 0 success, 2 configuration error, 3 solver error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .collective_model import check_lpt_symmetry
from .config import RunConfig, load_config, validate
from .errors import CEPError, ConfigError, NoBrokenBranch
from .exact_dicke import (DEFAULT_MAX_SPIN, DENSE_LIMIT, build_liouvillian, dump_density_matrix,
                          exact_squeezing, husimi_q, spin_moments, steady_state)
from .fluctuations import (dephasing_coefficients, example_covariance, example_dz,
                           gaussian_squeezing)
from .meanfield import example_branch
from .output import csv_text, json_text, provenance, write_text
from .scaling_harness import SweepResult, fss_collapse, ginzburg_crossover, sweep
from .spin_boson_mf import SpinBosonSpec, sb_fixed_point, sb_squeezing

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _grid(text: str, log: bool) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError as exc:
        raise ConfigError(f"grid {text!r} is not of the form start:stop:count") from exc
    if n < 1:
        raise ConfigError("grid count must be positive")
    if log:
        if a <= 0 or b <= 0:
            raise ConfigError("log grid bounds must be positive")
        return np.logspace(np.log10(a), np.log10(b), n)
    return np.linspace(a, b, n)


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _add_model_flags(p: argparse.ArgumentParser, delta: bool = True):
    p.add_argument("--g", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--kappa", type=float)
    if delta:
        p.add_argument("--delta", type=float)
    p.add_argument("--gamma-x", type=float)
    p.add_argument("--gamma-y", type=float)
    p.add_argument("--gamma-z", type=float)


def _add_delta_grid(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--delta-log", metavar="A:B:N", help="N log-spaced delta values")
    g.add_argument("--delta-lin", metavar="A:B:N", help="N evenly spaced delta values")
    g.add_argument("--deltas", metavar="D1,D2,...", help="explicit delta values")


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="TOML configuration file")
    p.add_argument("--out", default=d("."), help="output directory")
    p.add_argument("--threads", type=int, default=d(None),
                   help="worker processes for sweeps (default: logical cores)")
    p.add_argument("--no-figures", action="store_true", default=d(False),
                   help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cep", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"cepspin {__version__}")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gaussian", parents=[common], help="Gaussian squeezing over a delta grid")
    _add_model_flags(p, delta=False)
    _add_delta_grid(p)

    p = sub.add_parser("exact", parents=[common], help="exact steady state at one point")
    _add_model_flags(p)
    p.add_argument("--S", type=float, required=True)
    p.add_argument("--method", choices=["auto", "dense_null", "sparse_lu"])
    p.add_argument("--dump-rho", action="store_true", help="also write the density matrix")

    p = sub.add_parser("husimi", parents=[common], help="Husimi Q of the exact steady state")
    _add_model_flags(p)
    p.add_argument("--S", type=float, required=True)
    p.add_argument("--n-theta", type=int)
    p.add_argument("--n-phi", type=int)

    p = sub.add_parser("fss", parents=[common], help="sweep and finite-size-scaling collapse")
    _add_model_flags(p, delta=False)
    _add_delta_grid(p)
    p.add_argument("--S", dest="S_list", help="comma-separated spins")
    p.add_argument("--observable", choices=["order_parameter", "inverse_squeezing"],
                   default="inverse_squeezing")
    p.add_argument("--log-correction", action="store_true")
    p.add_argument("--from-csv", help="reuse a sweep CSV instead of solving")

    p = sub.add_parser("symmetry", parents=[common], help="L-PT symmetry check of the model")
    _add_model_flags(p)
    p.add_argument("--S", type=float, default=1.0)

    p = sub.add_parser("spinboson", parents=[common], help="spin-boson Gaussian squeezing")
    p.add_argument("--g", type=float)
    p.add_argument("--g-lin", metavar="A:B:N", help="sweep g on an even grid")
    p.add_argument("--lam", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--kappa", type=float)
    return parser


_MODEL_FLAGS = {"g": "g", "omega": "omega", "kappa": "kappa", "delta": "delta",
                "gamma_x": "gamma_x", "gamma_y": "gamma_y", "gamma_z": "gamma_z"}


def resolve_config(args) -> RunConfig:
    """Merge the optional TOML file with command-line overrides and validate."""
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.command == "spinboson":
        for k in ("g", "lam", "omega", "kappa"):
            if getattr(args, k, None) is not None:
                cfg.spinboson[k] = getattr(args, k)
        return validate(cfg)
    given = {k: getattr(args, a) for a, k in _MODEL_FLAGS.items()
             if getattr(args, a, None) is not None}
    if given:
        if "custom" in cfg.model:
            raise ConfigError("model flags cannot be combined with [model.custom]")
        if "kappa" in given:
            cfg.model.pop("delta", None)
        if "delta" in given:
            cfg.model.pop("kappa", None)
        cfg.model.update(given)
    if not cfg.model:
        raise ConfigError("no model given: pass --g/--omega/... or a [model] section")
    if getattr(args, "method", None):
        cfg.solver["method"] = args.method
    if getattr(args, "n_theta", None):
        cfg.husimi["n_theta"] = args.n_theta
    if getattr(args, "n_phi", None):
        cfg.husimi["n_phi"] = args.n_phi
    for flag, log in (("delta_log", True), ("delta_lin", False)):
        text = getattr(args, flag, None)
        if text:
            g = _grid(text, log)
            cfg.sweep.update(delta_min=float(g[0]), delta_max=float(g[-1]),
                             delta_points=len(g), log_spacing=log)
    if getattr(args, "S_list", None):
        cfg.sweep["S_list"] = _floats(args.S_list)
    return validate(cfg)


def _deltas(args, cfg: RunConfig) -> np.ndarray:
    if getattr(args, "deltas", None):
        return np.array(_floats(args.deltas))
    if cfg.sweep.get("delta_points"):
        return cfg.delta_grid()
    raise ConfigError("no delta grid: pass --delta-log, --delta-lin, --deltas or [sweep]")


def _threads(args, cfg: RunConfig) -> int:
    n = args.threads or cfg.solver.get("threads") or os.cpu_count() or 1
    if n < 1:
        raise ConfigError("--threads must be positive")
    return int(n)


class Runner:
    def __init__(self, args, cfg: RunConfig):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out)
        self.prov = provenance(cfg.sha256(), args.command)
        self.figures = not args.no_figures
        self.written: list[Path] = []

    def csv(self, name, columns, rows):
        self.written.append(write_text(self.out / name, csv_text(columns, rows, self.prov)))

    def json(self, name, kind, payload):
        self.written.append(write_text(self.out / name, json_text(kind, payload, self.prov)))

    def figure(self, name, fn, *a, **kw):
        if self.figures:
            self.out.mkdir(parents=True, exist_ok=True)
            self.written.append(fn(*a, path=self.out / name, **kw))

    @property
    def solver(self) -> dict:
        s = self.cfg.solver
        return {"method": s.get("method", "auto"), "dense_limit": int(s.get("dense_limit", DENSE_LIMIT)),
                "max_spin": float(s.get("max_spin", DEFAULT_MAX_SPIN))}


GAUSSIAN_COLUMNS = ["delta", "Z_star", "xi_s_sq", "lambda_max", "alignment_angle",
                    "d11", "d12", "d22", "D_z", "status"]


def cmd_gaussian(run: Runner) -> int:
    base = run.cfg.preset()
    rows = []
    nan = float("nan")
    for d in _deltas(run.args, run.cfg):
        try:
            p = base.with_delta(float(d))
            d11, d12, d22 = dephasing_coefficients(p)
            br = example_branch(p)
            rep = gaussian_squeezing(example_covariance(p))
            dz = example_dz(p)
        except NoBrokenBranch as exc:
            print(f"delta={d:g}: flagged ({exc})", file=sys.stderr)
            rows.append([d, nan, nan, nan, nan, nan, nan, nan, nan, "no_broken_branch"])
            continue
        except ValueError as exc:
            print(f"delta={d:g}: flagged ({exc})", file=sys.stderr)
            rows.append([d, nan, nan, nan, nan, nan, nan, nan, nan, "invalid_parameters"])
            continue
        except CEPError as exc:
            raise CEPError(f"delta={d:g}: {type(exc).__name__}: {exc}") from exc
        rows.append([d, br.Z, rep.xi_s_sq, rep.lambda_max, rep.alignment_angle,
                     d11, d12, d22, dz, "ok"])
    run.csv("gaussian.csv", GAUSSIAN_COLUMNS, rows)
    if run.figures:
        from .plotting import plot_gaussian
        a = np.array([r[:5] for r in rows], dtype=float)
        run.figure("gaussian.png", plot_gaussian, a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4])
    return EXIT_OK


def _exact_state(run: Runner):
    spec = run.cfg.spec()
    S = run.args.S
    L = build_liouvillian(spec, S, run.solver["max_spin"])
    return steady_state(L, S, method=run.solver["method"], dense_limit=run.solver["dense_limit"])


def cmd_exact(run: Runner) -> int:
    st = _exact_state(run)
    mom = spin_moments(st)
    payload = {"S": st.S, "solver": st.solver, "residual": st.residual,
               "min_eigenvalue": st.min_eigenvalue,
               "mean": mom.mean, "sqrt_mean_z_sq": mom.sqrt_mean_z_sq,
               "scaled_cov": mom.scaled_cov}
    try:
        payload["squeezing"] = exact_squeezing(st, mom).to_dict()
    except CEPError as exc:
        payload["squeezing"] = None
        payload["squeezing_error"] = str(exc)
    run.json("exact.json", "exact_steady_state", payload)
    if run.args.dump_rho:
        path = run.out / "rho.bin"
        dump_density_matrix(st, path)
        run.written.append(path)
    return EXIT_OK


def cmd_husimi(run: Runner) -> int:
    st = _exact_state(run)
    h = run.cfg.husimi
    field = husimi_q(st, n_theta=h.get("n_theta"), n_phi=h.get("n_phi"),
                     tangent_points=int(h.get("tangent_points", 81)))
    run.csv("husimi_sphere.csv", ["theta", "phi", "Q"], field.csv_rows())
    X, Y = np.meshgrid(field.tangent_x, field.tangent_y)
    run.csv("husimi_tangent.csv", ["x", "y", "Q"],
            zip(X.ravel(), Y.ravel(), field.tangent_values.ravel()))
    payload = field.to_json()
    payload["normalization"] = field.normalization()
    payload["tangent"]["principal_axis"] = field.principal_axis()
    payload["tangent"]["covariance"] = field.tangent_covariance()
    run.json("husimi.json", "husimi_field", payload)
    if run.figures:
        from .plotting import plot_husimi
        run.figure("husimi.png", plot_husimi, field)
    return EXIT_OK


def cmd_fss(run: Runner) -> int:
    base = run.cfg.preset()
    if run.args.from_csv:
        data = SweepResult.from_csv(Path(run.args.from_csv).read_text())
    else:
        S_list = run.cfg.sweep.get("S_list")
        if not S_list:
            raise ConfigError("no spins: pass --S or [sweep] S_list")
        data = sweep(base, S_list, _deltas(run.args, run.cfg), threads=_threads(run.args, run.cfg),
                     provenance=run.prov, **run.solver)
        run.written.append(write_text(run.out / "sweep.csv", data.to_csv()))
    for r in data.rows:
        if r.error:
            print(f"S={r.S:g} delta={r.delta:g}: {r.error}", file=sys.stderr)
    rep = fss_collapse(data, run.args.observable, run.args.log_correction)
    payload = rep.to_dict()
    try:
        payload["ginzburg"] = ginzburg_crossover(data, base).to_dict()
    except CEPError as exc:
        payload["ginzburg"] = {"error": str(exc)}
    run.json("collapse.json", "collapse_report", payload)
    if run.figures:
        from .plotting import plot_collapse
        col = "sqrt_mean_z_sq" if run.args.observable == "order_parameter" else "xi_s_sq"
        raw = {}
        for S in data.S_values:
            d, y = data.column(S, col)
            raw[S] = (d, np.abs(y) if col != "xi_s_sq" else 1 / y)
        label = "sqrt(<m_z^2>)" if col != "xi_s_sq" else "G = 1/xi_S^2"
        run.figure("fss.png", plot_collapse, rep, raw, ylabel=label)
    return EXIT_OK


def cmd_symmetry(run: Runner) -> int:
    rep = check_lpt_symmetry(run.cfg.spec(), run.args.S)
    run.json("symmetry.json", "symmetry_report", rep.to_dict())
    print(f"verdict: {rep.verdict} (direct {rep.matrix_distance_direct:.3e}, "
          f"antilinear {rep.matrix_distance_antilinear:.3e})")
    return EXIT_OK


SPINBOSON_COLUMNS = ["g", "X", "Y", "Z", "Q", "P", "xi_s_sq_closed", "xi_s_sq_numeric",
                     "residual", "status"]


def cmd_spinboson(run: Runner) -> int:
    sb = run.cfg.spinboson
    try:
        lam, omega, kappa = float(sb["lam"]), float(sb["omega"]), float(sb["kappa"])
    except KeyError as exc:
        raise ConfigError(f"spin-boson parameter {exc} missing") from exc
    if run.args.g_lin:
        gs = _grid(run.args.g_lin, log=False)
    elif "g" in sb:
        gs = np.array([float(sb["g"])])
    else:
        raise ConfigError("pass --g or --g-lin")
    rows, reports = [], []
    nan = float("nan")
    for g in gs:
        try:
            spec = SpinBosonSpec(float(g), lam, omega, kappa)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        try:
            fp = sb_fixed_point(spec)
            res = sb_squeezing(spec)
        except NoBrokenBranch as exc:
            print(f"g={g:g}: flagged ({exc})", file=sys.stderr)
            rows.append([g, nan, nan, nan, nan, nan, nan, nan, nan, "no_broken_branch"])
            continue
        rows.append([g, fp.X, fp.Y, fp.Z, fp.Q, fp.P, res.xi_s_sq_closed, res.xi_s_sq_numeric,
                     res.residual, "ok"])
        reports.append({"g": g, "fixed_point": fp.vector, "g_c": spec.g_c, **res.to_dict()})
    run.csv("spinboson.csv", SPINBOSON_COLUMNS, rows)
    run.json("spinboson.json", "spinboson_report", {"lam": lam, "omega": omega, "kappa": kappa,
                                                    "points": reports})
    if run.figures and len(gs) > 1:
        from .plotting import plot_spinboson
        a = np.array([[r[0], r[6], r[7]] for r in rows], dtype=float)
        run.figure("spinboson.png", plot_spinboson, a[:, 0], a[:, 1], a[:, 2])
    return EXIT_OK


COMMANDS = {"gaussian": cmd_gaussian, "exact": cmd_exact, "husimi": cmd_husimi,
            "fss": cmd_fss, "symmetry": cmd_symmetry, "spinboson": cmd_spinboson}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        run = Runner(args, cfg)
        code = COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CEPError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for path in run.written:
        print(path)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
