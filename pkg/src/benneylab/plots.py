"""Figure rendering for simulation and blow-up reports.

Figures are written as PNG files next to the CSV/JSON outputs; every
renderer returns the list of paths it wrote.  The Agg backend is forced
so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fields import riemann_fields


def simulation_figures(traj, outdir) -> list[str]:
    """Space-time field, gradient history, and final profiles for a run."""
    written = []
    snaps = traj.snapshots
    q = snaps[0].grid.cell_centers()

    fig, ax = plt.subplots(figsize=(7, 4))
    u1 = np.array([s.U[:, 0] for s in snaps])
    times = [s.t for s in snaps]
    im = ax.pcolormesh(q, times, u1, shading="nearest", cmap="viridis")
    fig.colorbar(im, ax=ax, label="u1")
    ax.set_xlabel("q")
    ax.set_ylabel("t")
    ax.set_title("potential coefficient u1(q, t)")
    path = str(outdir / "field_u1.png")
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    if traj.max_gradient_history:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        hist = np.array(traj.max_gradient_history)
        ax.semilogy(hist[:, 0], hist[:, 1], "b-")
        if traj.blowup_time_observed is not None:
            ax.axvline(traj.blowup_time_observed, color="r", ls="--",
                       label=f"stop t={traj.blowup_time_observed:.3f}")
            ax.legend()
        ax.set_xlabel("t")
        ax.set_ylabel("max |d_q r| (or |d_q u|)")
        ax.set_title("gradient monitor")
        ax.grid(True, alpha=0.3)
        path = str(outdir / "max_gradient.png")
        fig.savefig(path, dpi=130, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    final = snaps[-1]
    for c, name in enumerate(("u1", "u2", "u3")):
        axes[0].plot(q, final.U[:, c], label=name)
    axes[0].legend()
    axes[0].set_ylabel("coefficients")
    axes[0].set_title(f"final snapshot t={final.t:.3f}")
    r, mask = riemann_fields(final)
    for c in range(3):
        vals = np.where(mask, r[:, c], np.nan)
        axes[1].plot(q, vals, label=f"r{c + 1}")
    axes[1].legend()
    axes[1].set_xlabel("q")
    axes[1].set_ylabel("critical values")
    axes[0].grid(True, alpha=0.3)
    axes[1].grid(True, alpha=0.3)
    path = str(outdir / "final_profiles.png")
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written


def blowup_figures(path_obj, z_closed, tstar, outdir) -> list[str]:
    """Traced characteristic and its slope transport for the blow-up report."""
    written = []
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    axes[0].plot(path_obj.qs, path_obj.times, "k.", ms=2)
    axes[0].set_xlabel("q")
    axes[0].set_ylabel("t")
    axes[0].set_title(f"family-{path_obj.family} characteristic")
    axes[0].set_xlim(0, 1)

    axes[1].plot(path_obj.times, path_obj.z_values, "b-", label="z measured")
    axes[1].plot(path_obj.times, z_closed, "r--", label="z closed form")
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("z")
    axes[1].legend()
    axes[1].set_title("slope transport")

    z0 = path_obj.z_values[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        D = np.where(z_closed != 0, z0 / z_closed, np.nan)
    axes[2].plot(path_obj.times, D, "g-")
    axes[2].axhline(0.0, color="k", lw=0.8)
    if tstar is not None:
        axes[2].axvline(tstar, color="r", ls="--", label=f"t* = {tstar:.3f}")
        axes[2].legend()
    axes[2].set_xlabel("t")
    axes[2].set_ylabel("denominator 1 + z0 int K")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = str(outdir / "blowup_transport.png")
    fig.savefig(out, dpi=130, bbox_inches="tight")
    plt.close(fig)
    written.append(out)
    return written


def maclane_figure(errors, outdir) -> list[str]:
    """Round-trip error distribution for the coordinate-map report."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist(np.log10(np.maximum(np.asarray(errors), 1e-18)), bins=40, color="steelblue")
    ax.set_xlabel("log10 round-trip error")
    ax.set_ylabel("samples")
    ax.set_title("coordinate map round trip")
    ax.grid(True, alpha=0.3)
    out = str(outdir / "maclane_roundtrip.png")
    fig.savefig(out, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return [out]
