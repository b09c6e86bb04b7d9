"""Minimal deterministic SVG figures: heatmaps and line plots.

No plotting library is needed; the output depends only on the data, so two
runs with the same inputs produce byte-identical files.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN = dict(left=80, right=110, top=40, bottom=60)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

# perceptually ordered dark-to-bright ramp (sampled viridis anchors)
_RAMP = np.array([
    [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
    [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44], [253, 231, 37],
], dtype=float)


def _fmt(x):
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _color(v):
    v = min(max(float(v), 0.0), 1.0) * (len(_RAMP) - 1)
    k = min(int(v), len(_RAMP) - 2)
    r, g, b = _RAMP[k] + (v - k) * (_RAMP[k + 1] - _RAMP[k])
    return f"#{int(round(r)):02x}{int(round(g)):02x}{int(round(b)):02x}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(t) for t in np.arange(start, hi + step * 1e-9, step)]


def _label(t):
    return f"{t:.6g}"


class _Canvas:
    def __init__(self, xlim, ylim, title, xlabel, ylabel):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.px0, self.px1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.py0, self.py1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]
        self.xlabel, self.ylabel = xlabel, ylabel

    def sx(self, x):
        span = self.x1 - self.x0 or 1.0
        return self.px0 + (x - self.x0) / span * (self.px1 - self.px0)

    def sy(self, y):
        span = self.y1 - self.y0 or 1.0
        return self.py0 + (y - self.y0) / span * (self.py1 - self.py0)

    def axes(self):
        p = self.parts
        p.append(f'<rect x="{self.px0}" y="{self.py1}" width="{self.px1 - self.px0}" '
                 f'height="{self.py0 - self.py1}" fill="none" stroke="black"/>')
        for t in _ticks(self.x0, self.x1):
            x = _fmt(self.sx(t))
            p.append(f'<line x1="{x}" y1="{self.py0}" x2="{x}" y2="{self.py0 + 5}" stroke="black"/>')
            p.append(f'<text x="{x}" y="{self.py0 + 18}" text-anchor="middle">{_label(t)}</text>')
        for t in _ticks(self.y0, self.y1):
            y = _fmt(self.sy(t))
            p.append(f'<line x1="{self.px0 - 5}" y1="{y}" x2="{self.px0}" y2="{y}" stroke="black"/>')
            p.append(f'<text x="{self.px0 - 8}" y="{y}" text-anchor="end" '
                     f'dominant-baseline="middle">{_label(t)}</text>')
        p.append(f'<text x="{(self.px0 + self.px1) / 2}" y="{HEIGHT - 18}" '
                 f'text-anchor="middle">{escape(self.xlabel)}</text>')
        yc = (self.py0 + self.py1) / 2
        p.append(f'<text x="20" y="{yc}" text-anchor="middle" '
                 f'transform="rotate(-90 20 {yc})">{escape(self.ylabel)}</text>')

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def heatmap(z, x, y, title="", xlabel="", ylabel="", max_cells=128):
    """Heatmap of ``z[iy, ix]`` (rows follow ``y``), scaled to its maximum.

    Large matrices are block-subsampled to at most ``max_cells`` per side.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sy_, sx_ = max(1, -(-z.shape[0] // max_cells)), max(1, -(-z.shape[1] // max_cells))
    z, x, y = z[::sy_, ::sx_], x[::sx_], y[::sy_]
    peak = np.max(z) if z.size and np.max(z) > 0 else 1.0
    xlim = (float(min(x[0], x[-1])), float(max(x[0], x[-1]))) if x.size else (0.0, 1.0)
    ylim = (float(min(y[0], y[-1])), float(max(y[0], y[-1]))) if y.size else (0.0, 1.0)
    cv = _Canvas(xlim, ylim, title, xlabel, ylabel)
    dx = (cv.px1 - cv.px0) / max(x.size, 1)
    dy = (cv.py0 - cv.py1) / max(y.size, 1)
    xorder = np.argsort(x)
    yorder = np.argsort(y)
    for r, iy in enumerate(yorder):
        ypix = cv.py0 - (r + 1) * dy
        for c, ix in enumerate(xorder):
            cv.parts.append(f'<rect x="{_fmt(cv.px0 + c * dx)}" y="{_fmt(ypix)}" '
                            f'width="{_fmt(dx + 0.05)}" height="{_fmt(dy + 0.05)}" '
                            f'fill="{_color(z[iy, ix] / peak)}"/>')
    # color bar
    bx = cv.px1 + 20
    for k in range(50):
        yy = cv.py0 - (k + 1) * (cv.py0 - cv.py1) / 50
        cv.parts.append(f'<rect x="{bx}" y="{_fmt(yy)}" width="16" '
                        f'height="{_fmt((cv.py0 - cv.py1) / 50 + 0.05)}" fill="{_color((k + 0.5) / 50)}"/>')
    cv.parts.append(f'<text x="{bx + 22}" y="{cv.py1 + 4}">1</text>')
    cv.parts.append(f'<text x="{bx + 22}" y="{cv.py0}">0</text>')
    cv.axes()
    return cv.render()


def line_plot(series, title="", xlabel="", ylabel="", ylim=None, hlines=()):
    """Line plot of ``series``: a sequence of (label, x, y)."""
    xs = [np.asarray(s[1], dtype=float) for s in series if len(s[1])]
    ys = [np.asarray(s[2], dtype=float) for s in series if len(s[2])]
    if xs:
        xlim = (float(min(a.min() for a in xs)), float(max(a.max() for a in xs)))
    else:
        xlim = (0.0, 1.0)
    if ylim is None:
        ylim = (min([0.0] + [float(a.min()) for a in ys]), max([1e-300] + [float(a.max()) for a in ys]))
    cv = _Canvas(xlim, ylim, title, xlabel, ylabel)
    for h in hlines:
        y = _fmt(cv.sy(h))
        cv.parts.append(f'<line x1="{cv.px0}" y1="{y}" x2="{cv.px1}" y2="{y}" '
                        'stroke="gray" stroke-dasharray="4 3"/>')
    for k, (label, x, y) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(cv.sx(a))},{_fmt(cv.sy(b))}" for a, b in zip(x, y))
        if pts:
            cv.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = cv.py1 + 16 * (k + 1)
        cv.parts.append(f'<line x1="{cv.px1 + 8}" y1="{ly}" x2="{cv.px1 + 24}" y2="{ly}" '
                        f'stroke="{color}" stroke-width="2"/>')
        cv.parts.append(f'<text x="{cv.px1 + 28}" y="{ly + 4}">{escape(str(label))}</text>')
    cv.axes()
    return cv.render()
