"""Report figures written next to the CLI's CSV output.

Everything renders through the non-interactive Agg backend; callers hand
the returned figure to :meth:`OutputSet.figure`.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "figure.dpi": 110,
}


def _figure(nrows=1, ncols=1, width=6.4, height=None):
    height = width * 0.62 * nrows / ncols if height is None else height
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(nrows, ncols, figsize=(width, height), squeeze=False)
    return fig, ax


def trajectory_figure(traj, title=""):
    """Path in the tangent plane, coordinates vs time and energies."""
    with plt.rc_context(STYLE):
        fig, ax = _figure(1, 3, width=9.6, height=3.0)
        mean = traj.x.mean(axis=1)
        a0, a1, a2 = ax[0]
        a0.plot(mean[:, 0], mean[:, 1], color="k")
        a0.set_xlabel("$x_1$")
        a0.set_ylabel("$x_2$")
        a0.set_aspect("equal", adjustable="datalim")
        a1.plot(traj.t, mean[:, 0], label="$x_1$")
        a1.plot(traj.t, mean[:, 1], label="$x_2$")
        a1.set_xlabel("t")
        a1.legend()
        a2.plot(traj.t, traj.e_sys.mean(axis=1), label="$E_{sys}$")
        if traj.e_tot is not None:
            a2.plot(traj.t, traj.e_tot.mean(axis=1), label="$E_{tot}$")
        a2.set_xlabel("t")
        a2.legend()
        if traj.replicas > 1:
            a1.set_title(f"ensemble mean of {traj.replicas} replicas")
        fig.suptitle(title)
        fig.tight_layout()
    return fig


def kernel_figure(kernel, kk=None, analytic_re=None):
    with plt.rc_context(STYLE):
        ncols = 2 if kk is not None else 1
        fig, ax = _figure(1, ncols, width=4.0 * ncols, height=3.0)
        a0 = ax[0][0]
        a0.plot(kernel.t, kernel.gamma, label=r"$\gamma(t)$")
        a0.plot(kernel.t, kernel.gamma_dot, label=r"$\dot\gamma(t)$", alpha=0.8)
        a0.set_xlabel("t")
        a0.legend()
        if kk is not None:
            a1 = ax[0][1]
            a1.plot(kk.omega, kk.re, label="Kramers-Kronig")
            if analytic_re is not None:
                a1.plot(kk.omega, analytic_re, "--", label="analytic")
            a1.set_xlabel(r"$\omega$")
            a1.set_ylabel(r"Re $\gamma(\omega)$")
            a1.legend()
        fig.tight_layout()
    return fig


def rates_figure(eig, table):
    """Stick spectrum of absorption and emission rates from the initial state."""
    with plt.rc_context(STYLE):
        fig, ax = _figure(1, 2, width=8.0, height=3.0)
        a0, a1 = ax[0]
        n = min(eig.energies.size, 28)
        a0.plot(np.arange(n), eig.energies[:n], "o", ms=3, color="k")
        a0.set_xlabel("index")
        a0.set_ylabel("energy")
        w = np.array([r.omega_nm for r in table.rows])
        ga = np.array([r.gamma_abs for r in table.rows])
        ge = np.array([r.gamma_emit for r in table.rows])
        if w.size:
            a1.vlines(w, 0, ga, color="C0", label="absorption")
            a1.vlines(w, 0, -ge, color="C3", label="emission")
            a1.axhline(0, color="0.6", lw=0.6)
            a1.legend()
        a1.set_xlabel(r"$\omega_{nm}$")
        a1.set_ylabel(r"$\Gamma$")
        fig.tight_layout()
    return fig


def covariance_figure(lags, empirical, stderr, analytic):
    """Diagonal covariance components with three-standard-error bars."""
    with plt.rc_context(STYLE):
        fig, ax = _figure(1, 1, width=4.8, height=3.2)
        a = ax[0][0]
        for k, lab in enumerate(("11", "22")):
            a.errorbar(lags, empirical[:, k, k], yerr=3 * stderr[:, k, k], fmt="o", ms=3,
                       capsize=2, label=f"$R_{{{lab}}}$ sampled")
            a.plot(lags, analytic[:, k, k], "-", color=f"C{k}", alpha=0.6)
        a.set_xlabel(r"lag $\tau$")
        a.set_ylabel("covariance")
        a.legend()
        fig.tight_layout()
    return fig
