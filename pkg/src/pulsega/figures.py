"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamp or version in the PNG, so reruns write identical bytes
_META = {"Software": None}

plt.rcParams.update({
    "figure.figsize": (6.0, 4.0),
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "savefig.dpi": 120,
})


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_convergence(best, mean, path):
    fig, ax = plt.subplots()
    gens = np.arange(len(best))
    ax.plot(gens, best, label="best")
    ax.plot(gens, mean, "--", label="mean")
    ax.set_xlabel("generation")
    ax.set_ylabel("fitness")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_operator_weights(weights: dict, path):
    fig, ax = plt.subplots()
    for name, w in weights.items():
        ax.plot(np.arange(len(w)), w, label=name.replace("_", " "))
    ax.set_xlabel("generation")
    ax.set_ylabel("operator fitness")
    ax.set_ylim(0, 1)
    ax.legend(frameon=False, ncol=2)
    return _save(fig, path)


def plot_variation(matrix, num_phase_genes: int, path):
    """Gene number against generation; light means high variation."""
    fig, ax = plt.subplots()
    im = ax.imshow(matrix.T, aspect="auto", origin="lower", cmap="gray", vmin=0,
                   vmax=max(float(np.max(matrix)), 1e-12), interpolation="nearest")
    if num_phase_genes < matrix.shape[1]:
        ax.axhline(num_phase_genes - 0.5, color="tab:red", lw=0.8)
    ax.set_xlabel("generation")
    ax.set_ylabel("gene")
    fig.colorbar(im, ax=ax, label="variation")
    return _save(fig, path)


def plot_husimi(grid, path):
    fig, ax = plt.subplots()
    t, f = grid.time_axis, grid.freq_axis
    ax.imshow(grid.values, aspect="auto", origin="lower", cmap="Greys",
              extent=(t[0], t[-1], f[0], f[-1]), interpolation="nearest")
    ax.set_xlabel("time (fs)")
    ax.set_ylabel("frequency (THz)")
    return _save(fig, path)


def plot_spectrum(spectrum, path):
    fig, ax = plt.subplots()
    ax.plot(spectrum.frequencies, spectrum.power_spectrum())
    ax.set_xlabel("frequency (THz)")
    ax.set_ylabel("counts")
    return _save(fig, path)
