"""Deterministic SVG rendering for profiles and series.

Hand-rolled SVG keeps the output byte-reproducible and the element
structure auditable: the heatmap emits exactly one ``<rect>`` per
admissible profile cell and nothing else uses rects, so a consumer can
count cells straight off the markup. Colors use a diverging blue-white-red
scale centered at zero; when significance flags are present,
non-significant cells are rendered blank.
"""

from __future__ import annotations

import numpy as np

from .estimators import MemorisationProfile
from .views import Series

_MARGIN_LEFT = 70.0
_MARGIN_TOP = 34.0
_MARGIN_RIGHT = 30.0
_MARGIN_BOTTOM = 56.0

# diverging anchors: blue (negative) -> white (zero) -> red (positive)
_NEG = (33, 102, 172)
_MID = (247, 247, 247)
_POS = (178, 24, 43)


def _lerp(a: tuple[int, int, int], b: tuple[int, int, int], t: float) -> str:
    rgb = tuple(round(x + (y - x) * t) for x, y in zip(a, b))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def diverging_color(value: float, vmax: float) -> str:
    """Map a value in [-vmax, vmax] onto the blue-white-red scale."""
    if vmax <= 0:
        return _lerp(_MID, _MID, 0.0)
    t = max(-1.0, min(1.0, value / vmax))
    return _lerp(_MID, _POS, t) if t >= 0 else _lerp(_MID, _NEG, -t)


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _tick_subset(values: list[int], max_ticks: int = 12) -> list[int]:
    if len(values) <= max_ticks:
        return list(range(len(values)))
    step = -(-len(values) // max_ticks)
    idx = list(range(0, len(values), step))
    if idx[-1] != len(values) - 1:
        idx.append(len(values) - 1)
    return idx


def profile_heatmap_svg(profile: MemorisationProfile, epoch_boundary: int | None = None,
                        cell_px: float = 10.0, title: str | None = None) -> str:
    """Render a profile as an SVG heatmap string.

    Treatment steps run down the vertical axis, checkpoints along the
    horizontal axis. Cells in the structural-zero region are absent. When
    the profile carries significance flags, only significant cells are
    colored and the color scale spans the significant estimates.
    """
    gs = profile.treatment_steps
    cs = profile.checkpoint_steps
    col = {c: j for j, c in enumerate(cs)}
    row = {g: i for i, g in enumerate(gs)}

    masked = profile.has_bands()
    shown = [cell.estimate for cell in profile.cells if not masked or cell.significant]
    vmax = max((abs(v) for v in shown), default=0.0)

    width = _MARGIN_LEFT + cell_px * len(cs) + _MARGIN_RIGHT
    height = _MARGIN_TOP + cell_px * len(gs) + _MARGIN_BOTTOM
    x0, y0 = _MARGIN_LEFT, _MARGIN_TOP

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<text x="{_fmt(x0)}" y="20" font-family="sans-serif" font-size="13">'
        f'{title or "memorisation profile"}'
        f' (scale max {vmax:.4g}, {profile.metric_name})</text>',
    ]

    for cell in profile.cells:
        x = x0 + col[cell.c] * cell_px
        y = y0 + row[cell.g] * cell_px
        blank = masked and not cell.significant
        fill = "#ffffff" if blank else diverging_color(cell.estimate, vmax)
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell_px)}" height="{_fmt(cell_px)}" '
            f'fill="{fill}"><title>g={cell.g} c={cell.c} estimate={cell.estimate:.6g}'
            + (f" se={cell.se:.6g}" if cell.se is not None else "")
            + "</title></rect>"
        )

    # frame drawn with a path so rect count stays one per cell
    x1, y1 = x0 + cell_px * len(cs), y0 + cell_px * len(gs)
    parts.append(
        f'<path d="M {_fmt(x0)} {_fmt(y0)} H {_fmt(x1)} V {_fmt(y1)} H {_fmt(x0)} Z" '
        'fill="none" stroke="#444444" stroke-width="1"/>'
    )

    for j in _tick_subset(cs):
        x = x0 + (j + 0.5) * cell_px
        parts.append(f'<line x1="{_fmt(x)}" y1="{_fmt(y1)}" x2="{_fmt(x)}" y2="{_fmt(y1 + 4)}" stroke="#444444"/>')
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y1 + 16)}" font-family="sans-serif" font-size="9" '
            f'text-anchor="middle">{cs[j]}</text>'
        )
    for i in _tick_subset(gs):
        y = y0 + (i + 0.5) * cell_px
        parts.append(f'<line x1="{_fmt(x0 - 4)}" y1="{_fmt(y)}" x2="{_fmt(x0)}" y2="{_fmt(y)}" stroke="#444444"/>')
        parts.append(
            f'<text x="{_fmt(x0 - 7)}" y="{_fmt(y + 3)}" font-family="sans-serif" font-size="9" '
            f'text-anchor="end">{gs[i]}</text>'
        )

    if epoch_boundary is not None and cs:
        # linear position even between grid points
        steps = np.asarray(cs, dtype=np.float64)
        frac = float(np.interp(epoch_boundary, steps, np.arange(len(cs)) + 0.5,
                               left=0.0, right=len(cs)))
        x = x0 + frac * cell_px
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(y0)}" x2="{_fmt(x)}" y2="{_fmt(y1)}" '
            'stroke="#222222" stroke-width="1" stroke-dasharray="5 4"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y0 - 4)}" font-family="sans-serif" font-size="9" '
            f'text-anchor="middle">epoch {epoch_boundary}</text>'
        )

    parts.append(
        f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(height - 16)}" font-family="sans-serif" '
        'font-size="11" text-anchor="middle">checkpoint step</text>'
    )
    parts.append(
        f'<text x="16" y="{_fmt((y0 + y1) / 2)}" font-family="sans-serif" font-size="11" '
        f'text-anchor="middle" transform="rotate(-90 16 {_fmt((y0 + y1) / 2)})">treatment step</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def series_svg(series: Series, title: str | None = None,
               width: float = 560.0, height: float = 240.0) -> str:
    """Render a series as a simple SVG line chart.

    Points with significance flags are drawn filled when significant and
    hollow otherwise; a grey rule marks zero. An empty series (possible
    when no treatment step coincides with a checkpoint) renders a stub.
    """
    pts = series.points
    if not pts:
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="60" '
            f'viewBox="0 0 {_fmt(width)} 60">'
            f'<text x="10" y="32" font-family="sans-serif" font-size="12">'
            f'{title or series.kind.value}: no points</text></svg>\n'
        )
    xs = np.asarray([p.index for p in pts], dtype=np.float64)
    ys = np.asarray([p.value for p in pts], dtype=np.float64)

    x0, x1 = _MARGIN_LEFT, width - _MARGIN_RIGHT
    y0, y1 = _MARGIN_TOP, height - _MARGIN_BOTTOM
    xspan = float(xs.max() - xs.min()) or 1.0
    lo = min(float(ys.min()), 0.0)
    hi = max(float(ys.max()), 0.0)
    yspan = (hi - lo) or 1.0

    def px(x: float) -> float:
        return x0 + (x - float(xs.min())) / xspan * (x1 - x0)

    def py(y: float) -> float:
        return y1 - (y - lo) / yspan * (y1 - y0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<text x="{_fmt(x0)}" y="20" font-family="sans-serif" font-size="13">'
        f'{title or series.kind.value}</text>',
        f'<line x1="{_fmt(x0)}" y1="{_fmt(py(0.0))}" x2="{_fmt(x1)}" y2="{_fmt(py(0.0))}" '
        'stroke="#bbbbbb" stroke-width="1"/>',
        f'<path d="M {_fmt(x0)} {_fmt(y0)} V {_fmt(y1)} H {_fmt(x1)}" fill="none" '
        'stroke="#444444" stroke-width="1"/>',
    ]

    poly = " ".join(f"{_fmt(px(float(x)))},{_fmt(py(float(y)))}" for x, y in zip(xs, ys))
    parts.append(f'<polyline points="{poly}" fill="none" stroke="#2166ac" stroke-width="1.5"/>')
    for p in pts:
        cx, cy = px(float(p.index)), py(float(p.value))
        if p.se is not None:
            fill = "#2166ac" if p.significant else "#ffffff"
            parts.append(
                f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="2.6" fill="{fill}" '
                'stroke="#2166ac" stroke-width="1"/>'
            )
        else:
            parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="2.2" fill="#2166ac"/>')

    ticks = _tick_subset([int(x) for x in xs], 10)
    for i in ticks:
        x = px(float(xs[i]))
        parts.append(f'<line x1="{_fmt(x)}" y1="{_fmt(y1)}" x2="{_fmt(x)}" y2="{_fmt(y1 + 4)}" stroke="#444444"/>')
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y1 + 16)}" font-family="sans-serif" font-size="9" '
            f'text-anchor="middle">{int(xs[i])}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        yv = lo + frac * yspan
        parts.append(
            f'<text x="{_fmt(x0 - 6)}" y="{_fmt(py(yv) + 3)}" font-family="sans-serif" font-size="9" '
            f'text-anchor="end">{yv:.3g}</text>'
        )
    label = "event time (c - g)" if series.kind.value == "persistent" else "treatment step"
    parts.append(
        f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(height - 14)}" font-family="sans-serif" '
        f'font-size="11" text-anchor="middle">{label}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
