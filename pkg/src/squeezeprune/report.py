"""Hand-written SVG line charts of a pruning run."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

PANEL_W, PANEL_H = 360, 240
MARGIN = dict(left=64, right=16, top=32, bottom=44)
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
STAT_PANELS = [("filters", "Filters"), ("learnables", "Learnables"), ("embedding_dim", "Embedding size"),
               ("model_bytes", "Model size (bytes)")]


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    ticks, t = [], start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    if ticks[-1] < hi:
        ticks.append(round(t, 10))
    return ticks


def _fmt_tick(v: float) -> str:
    if abs(v) >= 10000:
        return f"{v:.3g}"
    return f"{v:g}"


def panel_svg(title: str, xs: Sequence[float], series: dict[str, Sequence[float]], x_label: str,
              ox: float = 0, oy: float = 0) -> str:
    """One chart panel as an SVG ``<g>``; ``None`` y values leave gaps."""
    left, top = ox + MARGIN["left"], oy + MARGIN["top"]
    w = PANEL_W - MARGIN["left"] - MARGIN["right"]
    h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]
    ys = [y for s in series.values() for y in s if y is not None]
    xt = nice_ticks(min(xs), max(xs)) if xs else [0, 1]
    yt = nice_ticks(min(ys), max(ys)) if ys else [0, 1]

    def sx(x):
        return left + (x - xt[0]) / (xt[-1] - xt[0]) * w

    def sy(y):
        return top + h - (y - yt[0]) / (yt[-1] - yt[0]) * h

    out = [f'<g class="panel"><text x="{left + w / 2:.1f}" y="{oy + 20}" text-anchor="middle" '
           f'font-size="14">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#444"/>']
    for t in xt:
        out.append(f'<line x1="{sx(t):.1f}" y1="{top + h}" x2="{sx(t):.1f}" y2="{top + h + 4}" stroke="#444"/>'
                   f'<text x="{sx(t):.1f}" y="{top + h + 16}" text-anchor="middle" font-size="10">'
                   f'{_fmt_tick(t)}</text>')
    for t in yt:
        out.append(f'<line x1="{left}" y1="{sy(t):.1f}" x2="{left + w}" y2="{sy(t):.1f}" stroke="#ddd"/>'
                   f'<text x="{left - 4}" y="{sy(t) + 3:.1f}" text-anchor="end" font-size="10">'
                   f'{_fmt_tick(t)}</text>')
    out.append(f'<text x="{left + w / 2:.1f}" y="{top + h + 34}" text-anchor="middle" font-size="11">'
               f'{escape(x_label)}</text>')
    for i, (name, values) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        runs, run = [], []
        for x, y in zip(xs, values):
            if y is None:
                if run:
                    runs.append(run)
                run = []
            else:
                run.append(f"{sx(x):.1f},{sy(y):.1f}")
        if run:
            runs.append(run)
        for r in runs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(r)}"/>')
        if len(series) > 1:
            out.append(f'<text x="{left + 6}" y="{top + 14 + 12 * i}" font-size="10" fill="{color}">'
                       f'{escape(name)}</text>')
    out.append("</g>")
    return "\n".join(out)


def figure_svg(panels: list[tuple[str, dict[str, Sequence[float]]]], xs: Sequence[float], x_label: str,
               columns: int = 2) -> str:
    rows = math.ceil(len(panels) / columns)
    width, height = PANEL_W * min(columns, len(panels)), PANEL_H * rows
    body = [panel_svg(title, xs, series, x_label, (i % columns) * PANEL_W, (i // columns) * PANEL_H)
            for i, (title, series) in enumerate(panels)]
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n")


def read_log(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _column(rows: list[dict], key: str) -> list[float | None]:
    return [float(r[key]) if r.get(key) not in (None, "") else None for r in rows]


def render_prune_report(log_path, out_dir) -> list[Path]:
    """Write loss/accuracy, EER and model-statistics charts for a prune log."""
    rows = read_log(log_path)
    if not rows:
        raise ValueError(f"{log_path}: empty prune log")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    xs = [100 * float(r["pruned_fraction"]) for r in rows]
    x_label = "Pruned filters (%)"
    written = []

    figures = {
        "loss_accuracy.svg": [("Scoring mini-batch loss", {"loss": _column(rows, "minibatch_loss")}),
                              ("Validation accuracy", {"accuracy": _column(rows, "val_accuracy")})],
        "model_stats.svg": [(title, {key: _column(rows, key)}) for key, title in STAT_PANELS],
    }
    eer_keys = [k for k in rows[0] if k.startswith("eer")]
    if eer_keys:
        figures["eer.svg"] = [("EER", {k: _column(rows, k) for k in eer_keys})]
    for name, panels in figures.items():
        path = out / name
        path.write_text(figure_svg(panels, xs, x_label))
        written.append(path)
    return written
