"""Matplotlib renderings of sweeps, written next to the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import SweepResult  # noqa: E402

FIGSIZE = (6.4, 4.2)


def plot_sweep(result: SweepResult, path) -> None:
    """Line plot: one line per tick of the first axis against the second."""
    (s_name, labels), (x_name, xs) = result.axes
    dashed = set(result.metadata.get("dashed", []))
    fig, ax = plt.subplots(figsize=FIGSIZE)
    colours = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for i, label in enumerate(labels):
        colour = colours[(i // 2 if dashed else i) % len(colours)]
        name = label if isinstance(label, str) else f"{s_name}={label:g}"
        ax.plot(xs, result.cells[i], color=colour, lw=1.5,
                ls="--" if label in dashed else "-", label=name)
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel(x_name)
    ax.set_ylabel(result.metadata.get("ylabel", result.value_name))
    if result.metadata.get("title"):
        ax.set_title(result.metadata["title"])
    ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_ordering(result: SweepResult, path) -> None:
    """Agreement map of an ordering grid (R on y, T on x)."""
    (_, Rs), (_, Ts) = result.axes
    fig, ax = plt.subplots(figsize=FIGSIZE)
    cmap = matplotlib.colors.ListedColormap(["0.7", "tab:red", "tab:green"])
    ax.imshow(result.cells, origin="lower", aspect="auto", cmap=cmap, vmin=-1.5, vmax=1.5,
              extent=(Ts[0] - 0.5, Ts[-1] + 0.5, 0, len(Rs)))
    ticks = np.linspace(0, len(Rs) - 1, min(len(Rs), 6)).astype(int)
    ax.set_yticks(ticks + 0.5)
    ax.set_yticklabels([f"{Rs[i]:g}" for i in ticks])
    T = np.asarray(Ts, dtype=float)
    md = result.metadata
    boundary_R = md["r_ref"] * (1.0 + md["k"] * T)
    # overlay R/r = 1 + kT in index coordinates of the R axis
    ax.plot(T, np.interp(boundary_R, Rs, np.arange(len(Rs)) + 0.5, left=np.nan, right=np.nan),
            color="k", lw=1)
    ax.set_xlabel("T")
    ax.set_ylabel("R")
    frac = md.get("agreement_fraction")
    ax.set_title(f"Ordering agreement (gamma={md['gamma']:g}, k={md['k']:g}): {frac:.3f}")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
