"""Report figures written next to the CSV outputs of the CLI."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps repeated runs byte-identical
_PNG_METADATA = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_convergence(traces, path, labels=None):
    """Relative change and step bound per iteration, one line per trace."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for i, trace in enumerate(traces):
        label = labels[i] if labels else f"channel {i}"
        it = trace.column("iter")
        axes[0].semilogy(it, np.maximum(trace.column("delta"), 1e-300), label=label)
        axes[1].semilogy(it, np.maximum(trace.column("step_norm"), 1e-300), label=f"{label} step")
        axes[1].semilogy(it, trace.column("step_bound"), "--", label=f"{label} bound")
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("relative change")
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("Frobenius step")
    for ax in axes:
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=7)
    _save(fig, path)


def plot_r_sweep(rows, path, value="psnr", ylabel="PSNR (dB)"):
    """One line per (instance, method) of ``value`` against ``r``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    groups = {}
    for row in rows:
        groups.setdefault((row["instance"], row["method"]), []).append(row)
    for (instance, method), grp in sorted(groups.items()):
        grp = sorted(grp, key=lambda row: row["r"])
        ys = [row[value] for row in grp]
        if any(y is None for y in ys):
            continue
        ax.plot([row["r"] for row in grp], ys, marker="o", ms=3, label=f"{instance} / {method}")
    ax.set_xlabel("r (truncated singular values)")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if ax.lines:
        ax.legend(fontsize=7)
    _save(fig, path)


def plot_weights(W, path):
    """Heatmap of the weight visualisation matrix."""
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(W, cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, label="p_i q_j")
    ax.set_xticks([])
    ax.set_yticks([])
    _save(fig, path)
