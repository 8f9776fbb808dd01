"""Hand-emitted SVG scatter plots with probit-scaled axes.

No plotting dependency: the output is deterministic, diff-able XML with one
circle per model pair (agreement) and, in validation mode, one per model
(accuracy), plus the fitted lines and R-squared annotations.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from aline import metrics
from aline.bundle import PredictionBundle
from aline.linefit import BundleStats, fit_agreement_line_from_stats, fit_line

WIDTH, HEIGHT = 640, 520
MARGIN = 60
TICK_PROBS = (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999)

AGREEMENT_COLOR = "#1f77b4"
ACCURACY_COLOR = "#e377c2"


def _scale(v, vmin, vmax, pix_min, pix_max):
    if vmax == vmin:
        return (pix_min + pix_max) / 2.0
    return pix_min + (v - vmin) / (vmax - vmin) * (pix_max - pix_min)


def render_bundle_plot(bundle: PredictionBundle) -> str:
    """SVG scatter of probit ID vs OOD pairwise agreement (and accuracy)."""
    stats = BundleStats.from_bundle(bundle)
    agl = fit_agreement_line_from_stats(stats)
    ax = np.array([p[2] for p in agl.pair_points])
    ay = np.array([p[3] for p in agl.pair_points])
    acc_fit = None
    acc_x = acc_y = None
    if stats.ood_accuracy is not None:
        acc_x, _ = metrics.probit_counting_clamps(stats.id_accuracy)
        acc_y, _ = metrics.probit_counting_clamps(stats.ood_accuracy)
        if len(acc_x) >= 2 and np.ptp(acc_x) > 0:
            acc_fit = fit_line(acc_x, acc_y)

    all_x = np.concatenate([ax, acc_x]) if acc_x is not None else ax
    all_y = np.concatenate([ay, acc_y]) if acc_y is not None else ay
    pad_x = max(0.05, 0.1 * max(np.ptp(all_x), 1e-9))
    pad_y = max(0.05, 0.1 * max(np.ptp(all_y), 1e-9))
    xmin, xmax = all_x.min() - pad_x, all_x.max() + pad_x
    ymin, ymax = all_y.min() - pad_y, all_y.max() + pad_y

    def px(v):
        return _scale(v, xmin, xmax, MARGIN, WIDTH - MARGIN)

    def py(v):
        return _scale(v, ymin, ymax, HEIGHT - MARGIN, MARGIN)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" '
        'stroke="black"/>',
    ]
    # probability-labeled ticks placed at their probit positions
    for prob in TICK_PROBS:
        t = metrics.probit(prob)
        if xmin <= t <= xmax:
            x = px(t)
            parts.append(
                f'<line x1="{x:.2f}" y1="{HEIGHT - MARGIN}" x2="{x:.2f}" '
                f'y2="{HEIGHT - MARGIN + 6}" stroke="black"/>'
            )
            parts.append(
                f'<text x="{x:.2f}" y="{HEIGHT - MARGIN + 20}" font-size="11" '
                f'text-anchor="middle">{prob:g}</text>'
            )
        if ymin <= t <= ymax:
            y = py(t)
            parts.append(
                f'<line x1="{MARGIN - 6}" y1="{y:.2f}" x2="{MARGIN}" y2="{y:.2f}" '
                'stroke="black"/>'
            )
            parts.append(
                f'<text x="{MARGIN - 10}" y="{y + 4:.2f}" font-size="11" '
                f'text-anchor="end">{prob:g}</text>'
            )
    id_name, ood_name = (escape(s) for s in bundle.dataset_names)
    parts.append(
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" font-size="13" text-anchor="middle">'
        f"{id_name} (probit scale)</text>"
    )
    parts.append(
        f'<text x="18" y="{HEIGHT / 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 18 {HEIGHT / 2})">{ood_name} (probit scale)</text>'
    )

    def line_path(fit, color, dash=""):
        y0 = fit.slope * xmin + fit.bias
        y1 = fit.slope * xmax + fit.bias
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        return (
            f'<line x1="{px(xmin):.2f}" y1="{py(y0):.2f}" x2="{px(xmax):.2f}" '
            f'y2="{py(y1):.2f}" stroke="{color}" stroke-width="1.5"{dash_attr}/>'
        )

    parts.append(line_path(agl.fit, AGREEMENT_COLOR))
    for x, y in zip(ax, ay):
        parts.append(
            f'<circle class="agreement" cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" '
            f'fill="{AGREEMENT_COLOR}" fill-opacity="0.7"/>'
        )
    parts.append(
        f'<text x="{WIDTH - MARGIN - 5}" y="{MARGIN + 15}" font-size="12" '
        f'text-anchor="end" fill="{AGREEMENT_COLOR}">'
        f"agreement: slope={agl.fit.slope:.3f} R&#178;={agl.fit.r_squared:.3f}</text>"
    )
    if acc_fit is not None:
        parts.append(line_path(acc_fit, ACCURACY_COLOR, dash="5,3"))
        parts.append(
            f'<text x="{WIDTH - MARGIN - 5}" y="{MARGIN + 32}" font-size="12" '
            f'text-anchor="end" fill="{ACCURACY_COLOR}">'
            f"accuracy: slope={acc_fit.slope:.3f} R&#178;={acc_fit.r_squared:.3f}</text>"
        )
    if acc_x is not None:
        for x, y in zip(acc_x, acc_y):
            parts.append(
                f'<circle class="accuracy" cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" '
                f'fill="{ACCURACY_COLOR}" fill-opacity="0.8"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
