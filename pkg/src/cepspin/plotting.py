"""Static figures rendered next to the tabular outputs (Agg backend only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_gaussian(delta, Z, xi, lam_max, angle, path):
    """Squeezing, anti-squeezing and axis angle against delta (log-log)."""
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(1, 2, figsize=(7.0, 3.0))
        ok = np.isfinite(xi)
        a0.loglog(delta[ok], xi[ok], "o-", ms=3, label=r"$\xi_S^2=\lambda_{\min}$")
        a0.loglog(delta[ok], lam_max[ok], "s-", ms=3, label=r"$\lambda_{\max}$")
        a0.loglog(delta[ok], np.abs(Z[ok]), "--", color="0.4", label=r"$|Z_*|$")
        a0.set_xlabel(r"$\delta$")
        a0.legend(frameon=False)
        a1.loglog(delta[ok], np.maximum(angle[ok], 1e-16), "o-", ms=3)
        a1.set_xlabel(r"$\delta$")
        a1.set_ylabel("anti-squeezed axis angle (rad)")
        fig.tight_layout()
        return _save(fig, path)


def plot_husimi(field, path):
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(1, 2, figsize=(7.5, 3.2))
        th, ph = np.degrees(field.theta_nodes), np.degrees(field.phi_nodes)
        im = a0.pcolormesh(ph, th, field.values, shading="nearest", cmap="viridis")
        a0.set_xlabel(r"$\phi$ (deg)")
        a0.set_ylabel(r"$\theta$ (deg)")
        fig.colorbar(im, ax=a0, label="Q")
        im = a1.pcolormesh(field.tangent_x, field.tangent_y, field.tangent_values,
                           shading="nearest", cmap="viridis")
        axis = field.principal_axis()
        r = 0.8 * field.tangent_x.max()
        a1.plot([-r * axis[0], r * axis[0]], [-r * axis[1], r * axis[1]], "w--", lw=1)
        a1.set_aspect("equal")
        a1.set_xlabel("first transverse axis")
        a1.set_ylabel("second transverse axis")
        fig.colorbar(im, ax=a1, label="Q")
        fig.tight_layout()
        return _save(fig, path)


def plot_collapse(report, raw, path, ylabel="y"):
    """Raw curves (left) and rescaled curves (right); ``raw`` maps S -> (delta, y)."""
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(1, 2, figsize=(7.0, 3.0))
        for S in sorted(raw):
            d, y = raw[S]
            a0.plot(d, y, "o-", ms=2.5, label=f"S={S:g}")
            x, ys = report.curves[S]
            a1.plot(x, ys, "o-", ms=2.5, label=f"S={S:g}")
        a0.set_xlabel(r"$\delta$")
        a0.set_ylabel(ylabel)
        a1.set_xlabel("scaled delta")
        a1.set_ylabel("scaled " + ylabel)
        a1.axvspan(report.grid[0], report.grid[-1], color="0.92", zorder=0)
        a1.set_title(f"quality {report.quality:.3g} (unscaled {report.quality_unscaled:.3g})")
        a0.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_spinboson(g, closed, numeric, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3.0))
        ax.plot(g, closed, "-", label="closed form")
        ax.plot(g, numeric, "o", ms=3, mfc="none", label="Lyapunov")
        ax.set_xlabel("g")
        ax.set_ylabel(r"$\xi_S^2$")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)
