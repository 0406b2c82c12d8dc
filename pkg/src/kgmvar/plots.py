"""Figure rendering for reports. Uses the Agg backend (file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .grid import ScalarField


def save_heatmap(f: ScalarField, path, title: str = "") -> None:
    """Render a field as a heatmap; 3D fields show the middle axial slice."""
    d = f.domain
    vals = f.values
    if d.dim == 3:
        vals = vals[:, :, vals.shape[2] // 2]
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(
        vals.T,
        origin="lower",
        extent=(0.0, d.lengths[0], 0.0, d.lengths[1]),
        aspect="auto",
        cmap="viridis",
    )
    fig.colorbar(im, ax=ax)
    if title:
        ax.set_title(title)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_lines(xs, series: dict, path, xlabel: str = "", title: str = "", logy: bool = False) -> None:
    """One line per named series over a shared abscissa."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, ys in series.items():
        ax.plot(xs, ys, marker="o", label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
