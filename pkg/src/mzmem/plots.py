"""SVG figures for kernel runs. Inputs are plain arrays so CSVs can be replotted."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "mzmem"

__all__ = ["overlay", "kernel_snapshots", "decay_heatmap", "memory_lengths", "scaling_loglog", "contour"]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _pick_components(m, count=4):
    return list(range(max(0, m - count), m))


def overlay(path, times, M, w, labels=None):
    """Reconstructed memory (solid) against exact subgrid (dotted), last few components."""
    m = M.shape[1]
    comps = _pick_components(m)
    labels = labels or [str(j + 1) for j in range(m)]
    fig, axes = plt.subplots(len(comps), 1, figsize=(7, 2.2 * len(comps)), squeeze=False, sharex=True)
    for ax, j in zip(axes[:, 0], comps):
        if np.iscomplexobj(M) or np.iscomplexobj(w):
            ax.plot(times, np.real(w[:, j]), ":", color="C0", label="exact (re)")
            ax.plot(times, np.real(M[:, j]), "-", color="C0", label="memory (re)")
            ax.plot(times, np.imag(w[:, j]), ":", color="C1", label="exact (im)")
            ax.plot(times, np.imag(M[:, j]), "-", color="C1", label="memory (im)")
        else:
            ax.plot(times, w[:, j], ":", label="exact")
            ax.plot(times, M[:, j], "-", label="memory")
        ax.set_ylabel(f"w_{labels[j]}")
        ax.legend(fontsize="small", loc="best")
    axes[-1, 0].set_xlabel("t")
    _save(fig, path)


def kernel_snapshots(path, dt, snapshots, component):
    """Kernel contributions ``K(xhat(s), t - s)`` over ``s`` for a few ``t``."""
    items = sorted(snapshots.items())
    if not items:
        return
    fig, axes = plt.subplots(len(items), 1, figsize=(7, 2.2 * len(items)), squeeze=False)
    for ax, (t_idx, snap) in zip(axes[:, 0], items):
        s = dt * np.arange(1, t_idx + 1)
        vals = snap[:, component]
        if np.iscomplexobj(vals):
            ax.fill_between(s, np.imag(vals), color="gold", alpha=0.6, label="imag")
            ax.plot(s, np.real(vals), color="C0", lw=0.8, label="real")
            ax.legend(fontsize="small")
        else:
            ax.fill_between(s, vals, color="gold", alpha=0.6)
            ax.plot(s, vals, color="k", lw=0.8)
        ax.set_title(f"t = {t_idx * dt:.4g}", fontsize="small")
        ax.set_ylabel(f"K_{component + 1}")
    axes[-1, 0].set_xlabel("s")
    _save(fig, path)


def decay_heatmap(path, lags, profiles):
    fig, ax = plt.subplots(figsize=(7, 4))
    m = profiles.shape[1]
    im = ax.imshow(profiles.T, origin="lower", aspect="auto", cmap="viridis",
                   extent=[lags[0], lags[-1] if len(lags) > 1 else 1.0, 0.5, m + 0.5], vmin=0, vmax=1)
    fig.colorbar(im, ax=ax, label="scaled |K|")
    ax.set_xlabel("lag")
    ax.set_ylabel("component")
    _save(fig, path)


def memory_lengths(path, tau):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(np.arange(1, len(tau) + 1), tau, color="C0")
    ax.set_xlabel("component")
    ax.set_ylabel("memory length (1%)")
    _save(fig, path)


def scaling_loglog(path, m_values, tau_values, slope=None, intercept=None):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(m_values, tau_values, "o", label="cut-off memory length")
    if slope is not None and np.isfinite(slope):
        mm = np.geomspace(min(m_values), max(m_values), 50)
        ax.loglog(mm, np.exp(intercept) * mm**slope, "--", label=f"slope {slope:.3g}")
    ax.set_xlabel("m")
    ax.set_ylabel("tau")
    ax.legend(fontsize="small")
    _save(fig, path)


def contour(path, times, values, label="|w_k|"):
    fig, ax = plt.subplots(figsize=(7, 4))
    m = values.shape[1]
    pc = ax.pcolormesh(times, np.arange(1, m + 1), values.T, shading="auto", cmap="magma")
    fig.colorbar(pc, ax=ax, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("k")
    _save(fig, path)
