"""Static SVG figures of a solved grid. Output is byte-stable for fixed input."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .verify import boundary_transversality  # noqa: E402

plt.rcParams["svg.hashsalt"] = "bishop-fill"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def heatmaps(grid, path):
    nodes = [n for n in grid.ordered_nodes() if n.disc is not None]
    s = np.array([n.s for n in nodes])
    t = np.array([n.t for n in nodes])
    fields = {"energy": [n.disc.energy for n in nodes],
              "min boundary pairing": [boundary_transversality(n.disc) for n in nodes],
              "log10 residual": [np.log10(max(n.disc.residual, 1e-17)) for n in nodes]}
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    for ax, (name, v) in zip(axes, fields.items()):
        pc = ax.tripcolor(s, t, np.asarray(v, dtype=float), shading="gouraud")
        ax.set_aspect("equal")
        ax.set_title(name)
        ax.set_xlabel("s")
        ax.set_ylabel("t")
        fig.colorbar(pc, ax=ax, shrink=0.8)
    return _save(fig, path)


def boundary_slices(grid, path, n=512):
    """Boundary loops (thetafun, sfun) in leaf-space coordinates of S~^0 (the t = 0 ray)."""
    phi = 2 * np.pi * np.arange(n + 1) / n
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = [(0, 0)] + [(0, j) for j in range(1, grid.n_rings + 1)]
    for k in keys:
        node = grid.nodes.get(k)
        if node is None or node.disc is None:
            continue
        a = node.disc.ansatz
        ax.plot(a.thetafun(phi), a.sfun(phi), lw=0.8)
    ax.set_xlabel("leaf angle")
    ax.set_ylabel("s")
    ax.set_title("disc boundaries on the level t = 0")
    return _save(fig, path)


def chi_graphs(grid, path, n=256, count=6):
    """chi1 against theta for a spread of nodes."""
    th = 2 * np.pi * np.arange(n + 1) / n
    nodes = [nd for nd in grid.ordered_nodes() if nd.disc is not None]
    pick = nodes[:: max(1, len(nodes) // count)][:count]
    fig, ax = plt.subplots(figsize=(5, 5))
    for nd in pick:
        ax.plot(th, nd.disc.ansatz.thetafun(th), lw=0.8, label=f"s={nd.s:.2f}, t={nd.t:.2f}")
    ax.set_xlabel("theta")
    ax.set_ylabel("chi1")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_all(grid, out):
    return [heatmaps(grid, os.path.join(out, "heatmaps.svg")),
            boundary_slices(grid, os.path.join(out, "boundary_slices.svg")),
            chi_graphs(grid, os.path.join(out, "chi_graphs.svg"))]
