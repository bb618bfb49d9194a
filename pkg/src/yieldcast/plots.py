"""Minimal SVG line charts for backtest output."""

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 420
MARGIN = dict(left=70, right=20, top=40, bottom=50)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")


def _scale(values, lo, hi, out_lo, out_hi):
    if hi == lo:
        return np.full(len(values), 0.5 * (out_lo + out_hi))
    return out_lo + (np.asarray(values, dtype=float) - lo) / (hi - lo) * (out_hi - out_lo)


def line_chart(lines, title, xlabel="", ylabel="", x_ticks=None):
    """Render ``{name: (xs, ys)}`` as an SVG document string.

    ``x_ticks`` is an optional list of ``(x, label)`` pairs.
    """
    xs_all = np.concatenate([np.asarray(x, dtype=float) for x, _ in lines.values()])
    ys_all = np.concatenate([np.asarray(y, dtype=float) for _, y in lines.values()])
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())
    y_lo, y_hi = float(ys_all.min()), float(ys_all.max())
    pad = 0.05 * (y_hi - y_lo) if y_hi > y_lo else 1.0
    y_lo, y_hi = y_lo - pad, y_hi + pad
    left, right = MARGIN["left"], WIDTH - MARGIN["right"]
    top, bottom = MARGIN["top"], HEIGHT - MARGIN["bottom"]

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        v = y_lo + frac * (y_hi - y_lo)
        py = bottom - frac * (bottom - top)
        out.append(f'<text x="{left - 6}" y="{py + 4:.1f}" text-anchor="end">{v:.4g}</text>')
    for x, label in x_ticks or []:
        px = float(_scale([x], x_lo, x_hi, left, right)[0])
        out.append(f'<text x="{px:.1f}" y="{bottom + 16}" text-anchor="middle">{escape(str(label))}</text>')
    out.append(f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(top + bottom) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(top + bottom) / 2:.1f})">{escape(ylabel)}</text>')

    for i, (name, (xs, ys)) in enumerate(lines.items()):
        color = PALETTE[i % len(PALETTE)]
        px = _scale(xs, x_lo, x_hi, left, right)
        py = _scale(ys, y_lo, y_hi, bottom, top)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        out.append(f'<polyline data-series="{escape(name)}" fill="none" stroke="{color}" '
                   f'stroke-width="1.2" points="{pts}"/>')
        ly = top + 14 * (i + 1)
        out.append(f'<line x1="{right - 110}" y1="{ly - 4}" x2="{right - 90}" y2="{ly - 4}" stroke="{color}"/>')
        out.append(f'<text x="{right - 85}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def squared_error_chart(term_label, dates, errors_by_method):
    """Squared error through time at one maturity, one line per method."""
    idx = np.arange(len(dates))
    ticks = [(int(i), dates[int(i)].isoformat()) for i in np.linspace(0, len(dates) - 1, min(4, len(dates)))]
    lines = {name: (idx, err) for name, err in errors_by_method.items()}
    return line_chart(lines, f"{term_label} performance", "date", "squared error (percent^2)", ticks)


def curve_overlay_chart(date, terms, actual, predicted_by_method):
    """Actual curve against each method's forecast for a single day."""
    terms = np.asarray(terms, dtype=float)
    lines = {"actual": (terms, actual)}
    lines.update({name: (terms, p) for name, p in predicted_by_method.items()})
    ticks = [(t, f"{t:g}") for t in terms[[0, len(terms) // 2, -1]]]
    return line_chart(lines, f"Estimates for {date.isoformat()}", "term (months)", "yield (percent)", ticks)
