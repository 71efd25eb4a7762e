"""SVG figures for reports.  Output is byte-stable: fixed hash salt, no date."""
from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "uniconvex"
matplotlib.rcParams["svg.fonttype"] = "none"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return str(path)


def plot_functions_1d(path, funcs, labels=None, title="", chords=()):
    """Overlay tabulated 1D functions (finite values only) and highlighted chords.

    ``chords`` holds ``((x0, y0), (x1, y1))`` segments, e.g. a modulus witness.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = labels or [f.name for f in funcs]
    for f, lab in zip(funcs, labels):
        x = f.coords[:, 0]
        order = np.argsort(x)
        y = np.where(f.dom, f.values, np.nan)[order]
        ax.plot(x[order], y, lw=1.2, label=lab)
    for (x0, y0), (x1, y1) in chords:
        ax.plot([x0, x1], [y0, y1], "o--", color="crimson", lw=1.0, ms=3)
    ax.set_xlabel("x")
    ax.legend(frameon=False)
    ax.set_title(title)
    return _save(fig, path)


def plot_heatmap(path, f, title="", cmap="viridis"):
    """Values of a 2D tabulated function on its lattice, ``+inf`` left blank."""
    s = f.support
    lat = s.lattice - s.lattice.min(axis=0)
    img = np.full(tuple(lat.max(axis=0) + 1), np.nan)
    img[lat[:, 0], lat[:, 1]] = np.where(f.dom, f.values, np.nan)
    lo, hi = s.coords.min(axis=0), s.coords.max(axis=0)
    fig, ax = plt.subplots(figsize=(5, 4.4))
    im = ax.imshow(img.T, origin="lower", extent=(lo[0], hi[0], lo[1], hi[1]), cmap=cmap)
    fig.colorbar(im, ax=ax)
    ax.set_title(title)
    return _save(fig, path)


def plot_balls(path, balls, labels, title=""):
    """Closed polygons (vertex arrays in angular order) for 2D unit balls."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for v, lab in zip(balls, labels):
        v = np.asarray(v, dtype=float)
        order = np.argsort(np.arctan2(v[:, 1], v[:, 0]))
        v = v[order]
        v = np.vstack([v, v[:1]])
        ax.plot(v[:, 0], v[:, 1], lw=1.2, label=lab)
    ax.set_aspect("equal")
    ax.legend(frameon=False)
    ax.set_title(title)
    return _save(fig, path)


def plot_brackets(path, brackets: dict, title=""):
    """Horizontal bars ``[lo, hi]`` per named quantity; infinite ends drawn as arrows."""
    names = list(brackets)
    fig, ax = plt.subplots(figsize=(6, 0.6 * len(names) + 1.2))
    finite = [v for b in brackets.values() for v in b if np.isfinite(v)]
    top = max(finite) * 1.2 if finite else 1.0
    for k, name in enumerate(names):
        lo, hi = brackets[name]
        right = hi if np.isfinite(hi) else top
        ax.plot([lo, right], [k, k], lw=4, solid_capstyle="butt")
        if not np.isfinite(hi):
            ax.annotate("", xy=(top, k), xytext=(lo, k), arrowprops={"arrowstyle": "->"})
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names)
    ax.set_xlabel("eps")
    ax.set_title(title)
    return _save(fig, path)


def plot_tree(path, tree, body=None, title=""):
    """Nodes and parent-child edges of a dyadic tree in 1D or 2D."""
    fig, ax = plt.subplots(figsize=(5, 5))
    if body is not None and body.shape[1] == 2:
        ax.scatter(body[:, 0], body[:, 1], s=2, c="0.8")
    for key, p in sorted(tree.nodes.items()):
        p = np.atleast_1d(p)
        y = p[1] if p.size > 1 else -len(key)
        if key:
            q = np.atleast_1d(tree.nodes[key[:-1]])
            qy = q[1] if q.size > 1 else -len(key) + 1
            ax.plot([q[0], p[0]], [qy, y], c="C0", lw=0.8)
        ax.scatter([p[0]], [y], s=10, c="C1")
    ax.set_title(title)
    return _save(fig, path)
