"""Headless matplotlib rendering of run diagnostics.

Every function writes a PNG to the given path; nothing is shown
interactively.  Wavefunction phase is rendered with the 'twilight'
cyclic colormap.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import UnsupportedError

__all__ = [
    "plot_expect",
    "plot_bound_levels",
    "plot_spectrum",
    "render_curve",
    "render_wigner",
    "render_flux",
    "render_reduced",
]

PHASE_CMAP = "twilight"


def _save(fig, path):
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_expect(records, path):
    """Norm/populations, position, energies and |autocorrelation| vs time."""
    t = [r.t for r in records]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    ax = axes[0, 0]
    ax.plot(t, [r.norm**2 for r in records], label="norm$^2$", color="k")
    n_chan = len(records[0].populations)
    if n_chan > 1:
        for c in range(n_chan):
            ax.plot(t, [r.populations[c] for r in records], label=f"channel {c + 1}")
    ax.set_ylabel("population")
    ax.legend(fontsize=8)
    ax = axes[0, 1]
    for k in range(len(records[0].position)):
        ax.plot(t, [r.position[k] for r in records], label=f"dof {k + 1}")
    ax.set_ylabel(r"$\langle R \rangle$")
    ax.legend(fontsize=8)
    ax = axes[1, 0]
    ax.plot(t, [r.potential for r in records], label="potential")
    ax.plot(t, [r.kinetic for r in records], label="kinetic")
    ax.plot(t, [r.total for r in records], label="total", color="k")
    ax.set_xlabel("t (a.u.)")
    ax.set_ylabel("energy (a.u.)")
    ax.legend(fontsize=8)
    ax = axes[1, 1]
    ax.plot(t, [abs(r.autocorrelation) for r in records], color="tab:purple")
    ax.set_xlabel("t (a.u.)")
    ax.set_ylabel("|autocorrelation|")
    fig.tight_layout()
    _save(fig, path)


def plot_bound_levels(energies, path):
    fig, ax = plt.subplots(figsize=(5, 5))
    for n, e in enumerate(energies):
        ax.hlines(e, n - 0.35, n + 0.35, color="tab:blue")
    ax.set_xlabel("state index")
    ax.set_ylabel("energy (a.u.)")
    fig.tight_layout()
    _save(fig, path)


def plot_spectrum(omega, intensity, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(omega, intensity, color="tab:blue")
    ax.set_xlabel(r"$\omega$ (a.u.)")
    ax.set_ylabel("intensity")
    fig.tight_layout()
    _save(fig, path)


def render_curve(grid, channels, path, representation="dvr", t=None):
    """Per-channel densities over a 1-D grid, colored by complex phase."""
    if grid.ndim != 1:
        raise UnsupportedError("curve frames need a one-dimensional grid")
    g = grid.dofs[0]
    fig, ax = plt.subplots(figsize=(6, 4))
    for c, amp in enumerate(channels):
        if representation == "fbr":
            coeff = g.to_fbr(np.asarray(amp))
            x = np.arange(len(coeff))
            y = np.abs(coeff) ** 2
            xlabel = "FBR index"
        else:
            x = g.points
            y = np.abs(np.asarray(amp)) ** 2
            xlabel = "R (a.u.)"
        phase = np.angle(amp if representation == "dvr" else coeff)
        ax.plot(x, y, color="k", lw=0.8)
        ax.scatter(x, y, c=phase, cmap=PHASE_CMAP, vmin=-np.pi, vmax=np.pi, s=6)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    if t is not None:
        ax.set_title(f"t = {t:.2f} a.u.")
    fig.tight_layout()
    _save(fig, path)


def render_wigner(w, grid, path, t=None):
    """Contour plot of a Wigner matrix with position/momentum marginals."""
    g = grid.dofs[0]
    p = np.fft.fftshift(g.fbr_momenta)
    ws = np.fft.fftshift(w, axes=1)
    fig, ax = plt.subplots(figsize=(6, 5))
    lim = np.max(np.abs(ws)) or 1.0
    cs = ax.contourf(
        g.points, p, ws.T, levels=21, cmap="RdBu_r", vmin=-lim, vmax=lim
    )
    fig.colorbar(cs, ax=ax, label="W(R, P)")
    ax.set_xlabel("R (a.u.)")
    ax.set_ylabel("P (a.u.)")
    if t is not None:
        ax.set_title(f"t = {t:.2f} a.u.")
    fig.tight_layout()
    _save(fig, path)


def render_flux(grid, flux_tensors, path, t=None):
    if grid.ndim == 1:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(grid.dofs[0].points, flux_tensors[0], color="tab:green")
        ax.set_xlabel("R (a.u.)")
        ax.set_ylabel("J(R)")
    elif grid.ndim == 2:
        fig, axes = plt.subplots(1, 2, figsize=(9, 4))
        x, y = grid.dofs[0].points, grid.dofs[1].points
        for k, axp in enumerate(axes):
            cs = axp.pcolormesh(x, y, flux_tensors[k].T, cmap="RdBu_r")
            fig.colorbar(cs, ax=axp)
            axp.set_title(f"J along dof {k + 1}")
    else:
        raise UnsupportedError("flux frames need a 1-D or 2-D grid")
    if t is not None:
        fig.suptitle(f"t = {t:.2f} a.u.")
    fig.tight_layout()
    _save(fig, path)


def render_reduced(rho, dof, path, purity=None, t=None):
    fig, ax = plt.subplots(figsize=(5, 4))
    cs = ax.imshow(np.abs(rho), cmap="viridis", origin="lower")
    fig.colorbar(cs, ax=ax, label=r"$|\bar\rho|$")
    title = f"dof {dof + 1}"
    if purity is not None:
        title += f", purity {purity:.4f}"
    if t is not None:
        title += f", t = {t:.2f}"
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
