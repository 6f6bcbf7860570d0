"""Standalone SVG plots: log-log axes, shaded percentile bands, overlays.

Hand-rolled rather than pulling in a plotting stack: the outputs are
simple layered charts (one shaded band, marker series, overlay lines)
with deterministic structure that tests can parse back as XML.
"""

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#000000", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


class PlotError(ValueError):
    """Unplottable input (empty series, band inversion, log of <= 0)."""


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    kind: str = "line"  # "line" | "markers" | "band"
    lo: np.ndarray | None = None  # band only
    hi: np.ndarray | None = None
    color: str | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.kind not in ("line", "markers", "band"):
            raise PlotError(f"unknown series kind {self.kind!r}")
        if self.x.size == 0 or self.x.shape != self.y.shape:
            raise PlotError("series needs matching non-empty x and y")
        if self.kind == "band":
            if self.lo is None or self.hi is None:
                raise PlotError("band series needs lo and hi")
            self.lo = np.asarray(self.lo, dtype=np.float64)
            self.hi = np.asarray(self.hi, dtype=np.float64)
            if self.lo.shape != self.x.shape or self.hi.shape != self.x.shape:
                raise PlotError("band lo/hi must match x")
            if np.any(self.lo > self.hi):
                raise PlotError("band has lo > hi")


@dataclass
class AxesSpec:
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    xlog: bool = False
    ylog: bool = False
    width: int = 640
    height: int = 460
    margin: tuple[int, int, int, int] = (56, 16, 20, 46)  # left right top bottom


def _check_positive(series: list[Series], axes: AxesSpec) -> None:
    for s in series:
        vals = [("x", s.x), ("y", s.y)]
        if s.kind == "band":
            vals += [("lo", s.lo), ("hi", s.hi)]
        for name, arr in vals:
            if axes.xlog and name == "x" and np.any(arr <= 0):
                raise PlotError("log x axis requires positive x data")
            if axes.ylog and name != "x" and np.any(arr <= 0):
                raise PlotError("log y axis requires positive y data")


def _limits(series: list[Series], axes: AxesSpec):
    xs = np.concatenate([s.x for s in series])
    ys = []
    for s in series:
        ys.append(s.y)
        if s.kind == "band":
            ys += [s.lo, s.hi]
    ys = np.concatenate(ys)
    return xs.min(), xs.max(), ys.min(), ys.max()


def _scale(lo, hi, log):
    if log:
        llo, lhi = math.log10(lo), math.log10(hi)
        if lhi - llo < 1e-12:
            llo, lhi = llo - 0.5, lhi + 0.5
        return lambda v: (np.log10(v) - llo) / (lhi - llo), llo, lhi
    if hi - lo < 1e-300:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.04 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    return lambda v: (np.asarray(v, dtype=float) - lo) / (hi - lo), lo, hi


def _ticks(lo, hi, log):
    if log:
        decades = range(math.floor(lo), math.ceil(hi) + 1)
        return [(10.0**d, f"1e{d}") for d in decades if lo - 1e-9 <= d <= hi + 1e-9]
    step = 10 ** math.floor(math.log10(max(hi - lo, 1e-300)))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append((v, f"{v:g}"))
        v += step
    return out


def emit_svg_plot(series: list[Series], axes: AxesSpec, path: str) -> None:
    """Write a standalone SVG chart of the given series."""
    if not series:
        raise PlotError("no series to plot")
    _check_positive(series, axes)
    xmin, xmax, ymin, ymax = _limits(series, axes)
    sx, _, _ = _scale(xmin, xmax, axes.xlog)
    sy, ylo, yhi = _scale(ymin, ymax, axes.ylog)
    ml, mr, mt, mb = axes.margin
    pw = axes.width - ml - mr
    ph = axes.height - mt - mb

    def X(v):
        return ml + sx(v) * pw

    def Y(v):
        return mt + (1.0 - sy(v)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{axes.width}" '
        f'height="{axes.height}" viewBox="0 0 {axes.width} {axes.height}">',
        f'<rect x="0" y="0" width="{axes.width}" height="{axes.height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        'stroke="#222" stroke-width="1"/>',
    ]
    # ticks and labels
    xlim = (math.log10(xmin), math.log10(xmax)) if axes.xlog else _scale(xmin, xmax, False)[1:]
    for v, label in _ticks(*xlim, axes.xlog):
        px = float(X(v))
        parts.append(f'<line x1="{px:.2f}" y1="{mt + ph}" x2="{px:.2f}" '
                     f'y2="{mt + ph + 5}" stroke="#222"/>')
        parts.append(f'<text x="{px:.2f}" y="{mt + ph + 18}" font-size="11" '
                     f'text-anchor="middle">{escape(label)}</text>')
    for v, label in _ticks(ylo, yhi, axes.ylog):
        py = float(Y(v))
        parts.append(f'<line x1="{ml - 5}" y1="{py:.2f}" x2="{ml}" '
                     f'y2="{py:.2f}" stroke="#222"/>')
        parts.append(f'<text x="{ml - 8}" y="{py + 4:.2f}" font-size="11" '
                     f'text-anchor="end">{escape(label)}</text>')
    if axes.xlabel:
        parts.append(f'<text x="{ml + pw / 2}" y="{axes.height - 8}" '
                     f'font-size="13" text-anchor="middle">{escape(axes.xlabel)}</text>')
    if axes.ylabel:
        cy = mt + ph / 2
        parts.append(f'<text x="14" y="{cy}" font-size="13" text-anchor="middle" '
                     f'transform="rotate(-90 14 {cy})">{escape(axes.ylabel)}</text>')
    if axes.title:
        parts.append(f'<text x="{ml + pw / 2}" y="{mt - 6}" font-size="14" '
                     f'text-anchor="middle">{escape(axes.title)}</text>')

    def poly_points(xs, ys):
        return " ".join(f"{float(X(x)):.2f},{float(Y(y)):.2f}" for x, y in zip(xs, ys))

    legend_y = mt + 14
    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        if s.kind == "band":
            pts = poly_points(np.concatenate([s.x, s.x[::-1]]),
                              np.concatenate([s.lo, s.hi[::-1]]))
            parts.append(f'<polygon class="band" points="{pts}" fill="{color}" '
                         'fill-opacity="0.25" stroke="none"/>')
        elif s.kind == "markers":
            circles = "".join(
                f'<circle cx="{float(X(x)):.2f}" cy="{float(Y(y)):.2f}" r="3.2" '
                f'fill="{color}"/>'
                for x, y in zip(s.x, s.y)
            )
            parts.append(f'<g class="markers">{circles}</g>')
        else:
            parts.append(f'<polyline class="line" points="{poly_points(s.x, s.y)}" '
                         f'fill="none" stroke="{color}" stroke-width="1.6"/>')
        if s.label:
            parts.append(f'<text x="{ml + pw - 8}" y="{legend_y}" font-size="11" '
                         f'text-anchor="end" fill="{color}">{escape(s.label)}</text>')
            legend_y += 14
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")


def _label_color(label: int) -> str:
    hue = (label * 2654435761) % 360
    return f"hsl({hue},65%,52%)"


def render_lattice_svg(labels: np.ndarray, path: str, cell: int = 8) -> None:
    """Grid rendering of labeled clusters; occupied sites colored by a hash
    of their cluster label. 3-D lattices render as a row of z slices."""
    if labels.ndim == 2:
        slices = [labels]
    elif labels.ndim == 3:
        slices = [labels[z] for z in range(labels.shape[0])]
    else:
        raise PlotError(f"cannot render {labels.ndim}-D lattice")
    rows = slices[0].shape[0]
    cols = slices[0].shape[1]
    gap = cell * 2
    width = len(slices) * (cols * cell + gap) - gap
    height = rows * cell
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for si, plane in enumerate(slices):
        x0 = si * (cols * cell + gap)
        for r in range(rows):
            for c in range(cols):
                label = int(plane[r, c])
                if label < 0:
                    continue
                parts.append(
                    f'<rect x="{x0 + c * cell}" y="{r * cell}" width="{cell}" '
                    f'height="{cell}" fill="{_label_color(label)}"/>'
                )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
