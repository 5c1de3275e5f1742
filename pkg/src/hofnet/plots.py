"""Static SVG line charts rendered from CSV text. Output bytes depend only on
the input, so charts can be pinned as golden files."""
from __future__ import annotations

import csv
import io
import math
from xml.sax.saxutils import escape

from .exceptions import FormatError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

WIDTH, HEIGHT = 640, 360
PAD_L, PAD_R, PAD_T, PAD_B = 70, 150, 40, 50


def read_rows(text):
    """Parse CSV text into (header, rows); needs a header and one data row."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("CSV is empty") from None
    header = [h.strip() for h in header]
    if not header or not all(header):
        raise FormatError("CSV header has empty column names")
    rows = [r for r in reader if any(c.strip() for c in r)]
    if not rows:
        raise FormatError("CSV has a header but no data rows")
    for i, r in enumerate(rows, 2):
        if len(r) != len(header):
            raise FormatError(f"line {i}: expected {len(header)} fields, got {len(r)}")
    return header, [dict(zip(header, (c.strip() for c in r))) for r in rows]


def _num(row, key, lineno):
    try:
        v = float(row[key])
    except KeyError:
        raise FormatError(f"missing column {key!r}") from None
    except ValueError:
        raise FormatError(f"row {lineno}: {key}={row[key]!r} is not a number") from None
    return v


def _fmt(v):
    return f"{v:.2f}"


def _tick_label(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.2e}"
    return f"{v:.4g}"


def line_chart(series, title="", xlabel="", ylabel="", log_y=False):
    """SVG text for ``series``: an ordered mapping of name -> list of (x, y)."""
    pts = [(x, y) for s in series.values() for x, y in s]
    if not pts:
        raise FormatError("nothing to plot")
    if log_y:
        if any(y <= 0 for _, y in pts):
            raise FormatError("log scale needs positive values")
        tf = math.log10
    else:
        tf = float
    xs = [x for x, _ in pts]
    ys = [tf(y) for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = WIDTH - PAD_L - PAD_R, HEIGHT - PAD_T - PAD_B
    sx = lambda x: PAD_L + (x - x0) / (x1 - x0) * pw
    sy = lambda y: PAD_T + (1 - (tf(y) - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{PAD_L}" y="{PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for i in range(5):
        fy = y0 + (y1 - y0) * i / 4
        fx = x0 + (x1 - x0) * i / 4
        py = PAD_T + (1 - i / 4) * ph
        px = PAD_L + i / 4 * pw
        label_y = 10 ** fy if log_y else fy
        out.append(f'<line x1="{PAD_L}" y1="{_fmt(py)}" x2="{PAD_L + pw}" y2="{_fmt(py)}" stroke="#ddd"/>')
        out.append(f'<text x="{PAD_L - 6}" y="{_fmt(py + 4)}" text-anchor="end">{_tick_label(label_y)}</text>')
        out.append(f'<text x="{_fmt(px)}" y="{PAD_T + ph + 16}" text-anchor="middle">{_tick_label(fx)}</text>')
    out.append(f'<text x="{PAD_L + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{PAD_T + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {PAD_T + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for i, (name, s) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in s)
        if len(s) > 1:
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in s:
            out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2.5" fill="{color}"/>')
        ly = PAD_T + 14 + 16 * i
        out.append(f'<line x1="{WIDTH - PAD_R + 10}" y1="{ly - 4}" x2="{WIDTH - PAD_R + 28}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - PAD_R + 32}" y="{ly}">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(text, x, y, group=None, title="", log_y=False):
    """Chart columns ``y`` (a name or list of names) against column ``x``.

    With ``group``, one series is drawn per distinct value of that column
    (only the first ``y`` column is used).
    """
    _, rows = read_rows(text)
    ycols = [y] if isinstance(y, str) else list(y)
    series = {}
    for lineno, row in enumerate(rows, 2):
        xv = _num(row, x, lineno)
        if group is not None:
            if group not in row:
                raise FormatError(f"missing column {group!r}")
            series.setdefault(row[group], []).append((xv, _num(row, ycols[0], lineno)))
        else:
            for col in ycols:
                series.setdefault(col, []).append((xv, _num(row, col, lineno)))
    for s in series.values():
        s.sort()
    ylabel = ycols[0] if len(ycols) == 1 else "value"
    return line_chart(series, title=title, xlabel=x, ylabel=ylabel, log_y=log_y)


def _positive(csv_text, cols):
    _, rows = read_rows(csv_text)
    try:
        return all(float(r[c]) > 0 for r in rows for c in cols)
    except (KeyError, ValueError):
        return False


def loss_curve(metrics_csv):
    cols = ["loss", "chamfer_fwd", "chamfer_bwd"]
    return plot_csv(metrics_csv, "step", cols, title="training loss",
                    log_y=_positive(metrics_csv, cols))


def resolution_curve(eval_csv):
    return plot_csv(eval_csv, "n_points", "chamfer_sym", group="shape_id",
                    title="Chamfer distance vs. reconstruction resolution")


def bench_chart(bench_csv):
    return plot_csv(bench_csv, "n", "seconds", group="backend",
                    title="wall time per backend", log_y=_positive(bench_csv, ["seconds"]))
