"""Self-contained SVG figures: learning curve and horizon box plots.

Output depends only on the input values (fixed number formatting, no
timestamps), so identical inputs give identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

W, H = 720, 400
PAD_L, PAD_R, PAD_T, PAD_B = 60, 20, 40, 50


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
    ]


def placeholder_svg(title, notice):
    parts = _header(title)
    parts.append(f'<text x="{W / 2:.1f}" y="{H / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13" fill="#888">{escape(notice)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _axes(parts, x_lo, x_hi, y_lo, y_hi, xlabel, ylabel, n_ticks=5):
    x0, x1, y0, y1 = PAD_L, W - PAD_R, H - PAD_B, PAD_T
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    sy = _scale(y_lo, y_hi, y0, y1)
    for v in np.linspace(y_lo, y_hi, n_ticks):
        y = sy(v)
        parts.append(f'<text x="{x0 - 6}" y="{y + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.1f}</text>')
        parts.append(f'<line x1="{x0}" y1="{y:.1f}" x2="{x1}" y2="{y:.1f}" stroke="#eee"/>')
    parts.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    parts.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>')


def moving_average(values, window=100):
    """Trailing mean over up to ``window`` previous values (shorter at the start)."""
    v = np.asarray(values, dtype=np.float64)
    c = np.concatenate(([0.0], np.cumsum(v)))
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def learning_curve_svg(returns, window=100, title="Agent learning curve"):
    returns = np.asarray(returns, dtype=np.float64)
    if returns.size == 0:
        return placeholder_svg(title, "no episodes recorded")
    ma = moving_average(returns, window)
    y_lo, y_hi = float(returns.min()), float(returns.max())
    parts = _header(title)
    _axes(parts, 1, len(returns), y_lo, y_hi, "episode", "return")
    sx = _scale(1, max(len(returns), 2), PAD_L, W - PAD_R)
    sy = _scale(y_lo, y_hi, H - PAD_B, PAD_T)
    pts = " ".join(f"{sx(i + 1):.2f},{sy(r):.2f}" for i, r in enumerate(returns))
    parts.append(f'<polyline class="returns" fill="none" stroke="#9ecae1" stroke-width="0.6" points="{pts}"/>')
    pts = " ".join(f"{sx(i + 1):.2f},{sy(r):.2f}" for i, r in enumerate(ma))
    parts.append(f'<polyline class="moving-average" fill="none" stroke="#08519c" stroke-width="2" points="{pts}"/>')
    parts.append(f'<text x="{W - PAD_R}" y="{PAD_T - 6}" text-anchor="end" font-family="sans-serif" font-size="11">'
                 f'{window}-episode moving average</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def box_stats(values):
    v = np.sort(np.asarray(values, dtype=np.float64))
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return {"q1": q1, "median": med, "q3": q3, "lo": inside.min(), "hi": inside.max(),
            "outliers": v[(v < lo_fence) | (v > hi_fence)]}


def boxplot_svg(groups, title="Longest prediction horizon by evaluation mode", ylabel="horizon (s)"):
    """``groups`` maps a label to a list of values; one box per non-empty group."""
    groups = {k: [x for x in v if x is not None] for k, v in groups.items()}
    groups = {k: v for k, v in groups.items() if v}
    if not groups:
        return placeholder_svg(title, "no horizons to plot")
    allv = np.concatenate([np.asarray(v, dtype=np.float64) for v in groups.values()])
    y_lo, y_hi = float(allv.min()), float(allv.max())
    pad = 0.1 * (y_hi - y_lo) if y_hi > y_lo else 1.0
    y_lo, y_hi = y_lo - pad, y_hi + pad
    parts = _header(title)
    _axes(parts, 0, 1, y_lo, y_hi, "evaluation mode", ylabel)
    sy = _scale(y_lo, y_hi, H - PAD_B, PAD_T)
    slot = (W - PAD_L - PAD_R) / len(groups)
    for i, (label, vals) in enumerate(groups.items()):
        s = box_stats(vals)
        cx = PAD_L + slot * (i + 0.5)
        half = min(40.0, slot * 0.3)
        parts.append('<g class="box">')
        parts.append(f'<line x1="{cx:.1f}" y1="{sy(s["lo"]):.2f}" x2="{cx:.1f}" y2="{sy(s["q1"]):.2f}" stroke="black"/>')
        parts.append(f'<line x1="{cx:.1f}" y1="{sy(s["q3"]):.2f}" x2="{cx:.1f}" y2="{sy(s["hi"]):.2f}" stroke="black"/>')
        parts.append(f'<rect x="{cx - half:.1f}" y="{sy(s["q3"]):.2f}" width="{2 * half:.1f}" '
                     f'height="{max(sy(s["q1"]) - sy(s["q3"]), 0.5):.2f}" fill="#c6dbef" stroke="black"/>')
        parts.append(f'<line x1="{cx - half:.1f}" y1="{sy(s["median"]):.2f}" x2="{cx + half:.1f}" '
                     f'y2="{sy(s["median"]):.2f}" stroke="#d62728" stroke-width="2"/>')
        for o in s["outliers"]:
            parts.append(f'<circle cx="{cx:.1f}" cy="{sy(o):.2f}" r="3" fill="none" stroke="black"/>')
        parts.append("</g>")
        parts.append(f'<text x="{cx:.1f}" y="{H - PAD_B + 16}" text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{escape(label)} (median {s["median"]:.2f})</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plots(curve_returns, reports, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"learning_curve": out / "learning_curve.svg", "horizons": out / "horizons.svg"}
    paths["learning_curve"].write_text(learning_curve_svg(curve_returns))
    labels = {"loso": "Subject independent", "dependent": "Subject dependent"}
    groups = {labels[m]: [r.longest_horizon_s for r in reports if r.mode == m] for m in ("loso", "dependent")}
    paths["horizons"].write_text(boxplot_svg(groups))
    return paths
