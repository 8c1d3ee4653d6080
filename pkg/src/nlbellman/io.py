"""CSV, JSON and SVG persistence."""

from __future__ import annotations

import csv
import html
import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .experiments import SweepResult
from .returns import OrderingVerdict

VERDICT_COLUMNS = ["R", "T", "G0", "prefers_G", "prefers_H", "agree", "boundary"]


def fmt(x) -> str:
    """17 significant digits for floats, lowercase booleans, plain ints."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _write_rows(path, header, rows):
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_csv(result: SweepResult | Sequence[OrderingVerdict], path) -> None:
    """Write a sweep (one row per cell, axis columns first) or a verdict list."""
    if isinstance(result, SweepResult):
        names = result.axis_names
        ticks = [t for _, t in result.axes]
        rows = (list(idx_ticks) + [result.cells[idx]]
                for idx, idx_ticks in _cells(ticks))
        _write_rows(path, names + [result.value_name], rows)
    else:
        rows = ([v.R, v.T, v.g_return, v.prefers_later_by_G, v.prefers_later_by_hyperbolic,
                 v.agree, v.boundary] for v in result)
        _write_rows(path, VERDICT_COLUMNS, rows)


def _cells(ticks):
    for idx in np.ndindex(*[len(t) for t in ticks]):
        yield idx, [t[i] for t, i in zip(ticks, idx)]


def _parse(s: str):
    if s in ("true", "false"):
        return s == "true"
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def read_csv(path) -> tuple[list[str], list[list]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[_parse(x) for x in row] for row in rows[1:]]


def write_json(obj, path) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if hasattr(o, "__dataclass_fields__"):
        return asdict(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from exc


# --- SVG -------------------------------------------------------------------

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


class UnsupportedShape(ValueError):
    pass


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def emit_svg_lineplot(result: SweepResult, path, width: int = 640, height: int = 420) -> None:
    """Self-contained SVG line plot of a two-axis sweep.

    The first axis selects series, the second is the x-axis. Series listed in
    ``result.metadata["dashed"]`` get a dashed stroke.
    """
    if len(result.axes) != 2:
        raise UnsupportedShape(f"line plot needs exactly 2 axes, got {len(result.axes)}")
    (s_name, labels), (x_name, xs) = result.axes
    xs = np.asarray(xs, dtype=float)
    cells = result.cells
    dashed = set(result.metadata.get("dashed", []))

    ml, mr, mt, mb = 60, 170, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(min(cells.min(), 0.0)), float(max(cells.max(), 0.0))
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x):
        return ml + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return mt + (y_hi - y) / (y_hi - y_lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    title = result.metadata.get("title")
    if title:
        out.append(f'<text x="{ml + pw / 2:.2f}" y="18" text-anchor="middle" font-size="13">'
                   f'{html.escape(str(title))}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    for t in _nice_ticks(x_lo, x_hi):
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + 4}" stroke="#333"/>')
        out.append(f'<text x="{x:.2f}" y="{mt + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y_lo, y_hi):
        y = py(t)
        out.append(f'<line x1="{ml - 4}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" stroke="#333"/>')
        out.append(f'<text x="{ml - 6}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
    y0 = py(0.0)
    out.append(f'<line class="zero" x1="{ml}" y1="{y0:.2f}" x2="{ml + pw}" y2="{y0:.2f}" '
               f'stroke="#999" stroke-width="1"/>')
    out.append(f'<text x="{ml + pw / 2:.2f}" y="{height - 8}" text-anchor="middle">'
               f'{html.escape(x_name)}</text>')
    ylabel = html.escape(str(result.metadata.get("ylabel", result.value_name)))
    out.append(f'<text x="14" y="{mt + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2:.2f})">{ylabel}</text>')

    for i, label in enumerate(labels):
        colour = PALETTE[(i // 2 if dashed else i) % len(PALETTE)]
        dash = ' stroke-dasharray="6,4"' if label in dashed else ""
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, cells[i]))
        name = html.escape(f"{s_name}={label}" if not isinstance(label, str) else label)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5"{dash} '
                   f'points="{pts}"><title>{name}</title></polyline>')
        ly = mt + 12 + 14 * i
        lx = ml + pw + 10
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{colour}" '
                   f'stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{lx + 25}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    try:
        Path(path).write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
