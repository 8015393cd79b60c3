"""SVG figures from result files: trajectories, capture-time heatmaps, boundary overlays."""
from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .scenario_io import read_boundary_csv, read_map_csv  # noqa: E402

# fixed hash salt and no timestamp keep SVG bytes reproducible
plt.rcParams["svg.hashsalt"] = "simcapture"
_SVG_META = {"Date": None, "Creator": None}


class MissingResultError(FileNotFoundError):
    pass


def _need(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise MissingResultError(f"result file not found: {p}")
    return p


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata=_SVG_META, bbox_inches="tight")
    plt.close(fig)
    return buf.getvalue()


def trajectory_svg(trace_csv, target=(0.0, 0.0)) -> str:
    data = np.loadtxt(_need(trace_csv), delimiter=",", skiprows=1, ndmin=2)
    n_agents = (data.shape[1] - 2) // 2
    fig, ax = plt.subplots(figsize=(5, 5))
    for a in range(n_agents):
        x, y = data[:, 1 + 2 * a], data[:, 2 + 2 * a]
        intruder = a == n_agents - 1
        ax.plot(x, y, "r--" if intruder else "-", lw=1.5, label="intruder" if intruder else f"defender {a + 1}")
        ax.plot(x[0], y[0], "o", color=ax.lines[-1].get_color(), ms=4)
    ax.plot(data[-1, -3], data[-1, -2], "k*", ms=12, label="end")
    ax.plot(*target, "ks", ms=6, label="target")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(fontsize=7, loc="best")
    return _svg(fig)


def heatmap_svg(map_csv, boundary_csv=None, target=(0.0, 0.0)) -> str:
    """Capture time per intruder start; non-capture cells stay white."""
    m = read_map_csv(_need(map_csv))
    xs, ys, t = m["xs"], m["ys"], m["t_star"]
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    cmap = plt.get_cmap("viridis").copy()
    cmap.set_bad("white")
    dx = xs[1] - xs[0] if len(xs) > 1 else 1.0
    dy = ys[1] - ys[0] if len(ys) > 1 else 1.0
    im = ax.imshow(np.ma.masked_invalid(t), origin="lower", cmap=cmap, interpolation="nearest",
                   extent=(xs[0] - dx / 2, xs[-1] + dx / 2, ys[0] - dy / 2, ys[-1] + dy / 2))
    fig.colorbar(im, ax=ax, label="capture time")
    if boundary_csv is not None:
        for poly in read_boundary_csv(_need(boundary_csv)).values():
            ax.plot(poly[:, 0], poly[:, 1], "k-", lw=1)
    ax.plot(*target, "k.", ms=8)
    ax.set_xlabel("intruder start x")
    ax.set_ylabel("intruder start y")
    return _svg(fig)


def overlay_svg(sweep_boundary_csv, target=(0.0, 0.0), title: str | None = None) -> str:
    """One colour per sweep setting, all boundaries on shared axes."""
    groups = read_boundary_csv(_need(sweep_boundary_csv))
    settings = list(dict.fromkeys(k[0] for k in groups))
    colors = plt.get_cmap("tab10")
    fig, ax = plt.subplots(figsize=(5, 5))
    for i, s in enumerate(settings):
        first = True
        for (setting, _), poly in groups.items():
            if setting != s:
                continue
            ax.plot(poly[:, 0], poly[:, 1], "-", color=colors(i % 10), lw=1.5, label=s if first else None)
            first = False
    ax.plot(*target, "k.", ms=8)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    if settings:
        ax.legend(fontsize=7, loc="best")
    return _svg(fig)


def emit_plots(out_dir, target=(0.0, 0.0)) -> list[Path]:
    """Render every figure whose source files exist in ``out_dir``."""
    out = Path(out_dir)
    written = []
    if (out / "trace.csv").is_file():
        written.append(_write(out / "trajectory.svg", trajectory_svg(out / "trace.csv", target)))
    if (out / "map.csv").is_file():
        b = out / "boundary.csv"
        written.append(_write(out / "heatmap.svg", heatmap_svg(out / "map.csv", b if b.is_file() else None, target)))
    if (out / "sweep_boundaries.csv").is_file():
        written.append(_write(out / "sweep_overlay.svg", overlay_svg(out / "sweep_boundaries.csv", target)))
    if not written:
        raise MissingResultError(f"no result files in {out}")
    return written


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path
