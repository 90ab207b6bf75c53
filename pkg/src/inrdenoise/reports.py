"""CSV and SVG emitters for experiment outputs.

The SVG writer is a small deterministic hand-rolled chart (fixed ids, no
timestamps) so repeated runs produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
from typing import Sequence

from .metrics import MetricsRecord, fmt_metric

METRICS_HEADER = ["iteration", "loss", "psnr_clean", "ssim_clean", "psnr_noisy", "sigma_hat"]


def metrics_row(r: MetricsRecord) -> list[str]:
    return [str(r.iteration), fmt_metric(r.loss), fmt_metric(r.psnr_clean),
            fmt_metric(r.ssim_clean), fmt_metric(r.psnr_noisy), fmt_metric(r.sigma_hat)]


def write_metrics_csv(records: Sequence[MetricsRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_HEADER)
        for r in records:
            w.writerow(metrics_row(r))


def write_rows_csv(header: Sequence[str], rows: Sequence[Sequence], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        for row in rows:
            w.writerow(["" if v is None else v for v in row])


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#7f7f7f"]


def svg_line_chart(series: dict[str, list[tuple[float, float]]],
                   title: str, x_label: str, y_label: str) -> str:
    """Render named polylines into a standalone SVG document string."""
    width, height = 760, 460
    ml, mr, mt, mb = 64, 150, 40, 48
    pw, ph = width - ml - mr, height - mt - mb

    pts = [p for line in series.values() for p in line]
    if not pts:
        raise ValueError("svg_line_chart needs at least one data point")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(x: float) -> float:
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y: float) -> float:
        return mt + ph - (y - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    # axes and ticks
    parts.append(f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" '
                 'stroke="black" stroke-width="1"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" '
                 'stroke="black" stroke-width="1"/>')
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        parts.append(f'<text x="{sx(xv):.1f}" y="{mt + ph + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{xv:.0f}</text>')
        parts.append(f'<text x="{ml - 8}" y="{sy(yv) + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{yv:.2f}</text>')
        parts.append(f'<line x1="{ml}" y1="{sy(yv):.1f}" x2="{ml + pw}" y2="{sy(yv):.1f}" '
                     'stroke="#dddddd" stroke-width="0.5"/>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">{x_label}</text>')
    parts.append(f'<text x="18" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 18 {mt + ph / 2:.1f})">{y_label}</text>')

    for i, (name, line) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in line)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     'stroke-width="1.6"/>')
        ly = mt + 16 + 18 * i
        parts.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 34}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{ml + pw + 40}" y="{ly}" font-family="sans-serif" '
                     f'font-size="12">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def write_svg(svg: str, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(svg)
