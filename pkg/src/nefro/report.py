"""SVG bar charts written as plain markup, plus the chart sets for each stage."""

from __future__ import annotations

import math
from html import escape
from pathlib import Path

from .modelsel import DIMENSIONS, ComponentComparison
from .nefropt.evaluate import REFERENCE_ACCURACY_PCT, REFERENCE_CTF_PCT, STYLE, MatrixResult

PALETTE = ("#3b6ea5", "#d9822b", "#5a9e4b", "#b0413e", "#7d5ba6", "#8c8c8c")
PANEL_W, PANEL_H = 320, 220
MARGIN = dict(left=56, right=12, top=34, bottom=46)

SELECTION_METRICS = (
    ("rmv", "RMV (CV R²)"),
    ("rsd", "Residual SD"),
    ("gain_pct", "Outlier-removal gain (%)"),
    ("rmv_cv_sd", "SD of CV RMV"),
)


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        return "nan"
    return f"{v:.3g}"


def _nice_range(values) -> tuple[float, float]:
    vals = [v for v in values if math.isfinite(v)] or [0.0]
    lo, hi = min(0.0, min(vals)), max(0.0, max(vals))
    if hi == lo:
        hi = lo + 1.0
    pad = 0.08 * (hi - lo)
    return lo - (pad if lo < 0 else 0.0), hi + pad


def bar_panel(x0: float, y0: float, title: str, categories, series: dict[str, list[float]],
              y_label: str = "", ref_band: tuple[float, float] | None = None,
              width: float = PANEL_W) -> str:
    """One panel of grouped bars; ``series`` maps legend label to one value per category."""
    left, top = x0 + MARGIN["left"], y0 + MARGIN["top"]
    w = width - MARGIN["left"] - MARGIN["right"]
    h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]
    all_vals = [v for vs in series.values() for v in vs]
    if ref_band:
        all_vals += list(ref_band)
    lo, hi = _nice_range(all_vals)

    def ypix(v):
        return top + h * (hi - v) / (hi - lo)

    parts = [f'<text x="{x0 + width / 2:.1f}" y="{y0 + 18}" text-anchor="middle" '
             f'font-size="13" font-weight="bold">{escape(title)}</text>']
    if ref_band:
        ya, yb = ypix(ref_band[1]), ypix(ref_band[0])
        parts.append(f'<rect x="{left}" y="{ya:.1f}" width="{w}" height="{yb - ya:.1f}" '
                     f'fill="#e8e8e8"><title>reference band</title></rect>')
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + h}" stroke="#333"/>')
    parts.append(f'<line x1="{left}" y1="{ypix(0):.1f}" x2="{left + w}" y2="{ypix(0):.1f}" stroke="#333"/>')
    for t in (lo, (lo + hi) / 2, hi):
        parts.append(f'<text x="{left - 4}" y="{ypix(t) + 4:.1f}" text-anchor="end" font-size="10">{_fmt(t)}</text>')
    if y_label:
        cy = top + h / 2
        parts.append(f'<text x="{x0 + 12}" y="{cy:.1f}" font-size="10" text-anchor="middle" '
                     f'transform="rotate(-90 {x0 + 12} {cy:.1f})">{escape(y_label)}</text>')
    n_cat, n_ser = max(1, len(categories)), max(1, len(series))
    slot = w / n_cat
    bw = 0.8 * slot / n_ser
    for i, cat in enumerate(categories):
        cx = left + slot * i
        parts.append(f'<text x="{cx + slot / 2:.1f}" y="{top + h + 14}" text-anchor="middle" '
                     f'font-size="10">{escape(str(cat))}</text>')
        for j, (name, vals) in enumerate(series.items()):
            v = vals[i]
            if not math.isfinite(v):
                continue
            bx = cx + 0.1 * slot + j * bw
            ya, yb = sorted((ypix(v), ypix(0)))
            parts.append(f'<rect x="{bx:.1f}" y="{ya:.1f}" width="{bw:.1f}" height="{yb - ya:.1f}" '
                         f'fill="{PALETTE[j % len(PALETTE)]}"><title>{escape(name)} {escape(str(cat))}: '
                         f'{_fmt(v)}</title></rect>')
    if len(series) > 1:
        for j, name in enumerate(series):
            lx = left + j * (w / len(series))
            ly = y0 + PANEL_H - 12
            parts.append(f'<rect x="{lx:.1f}" y="{ly - 8}" width="8" height="8" fill="{PALETTE[j % len(PALETTE)]}"/>')
            parts.append(f'<text x="{lx + 11:.1f}" y="{ly}" font-size="10">{escape(name)}</text>')
    return "\n".join(parts)


def svg_document(panels: list[str], n_cols: int, n_panels: int, title: str) -> str:
    rows = max(1, math.ceil(n_panels / n_cols))
    width, height = PANEL_W * min(n_cols, n_panels), PANEL_H * rows + 30
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
        f'<title>{escape(title)}</title>\n'
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="15">{escape(title)}</text>\n'
        f'<g transform="translate(0,30)">\n' + "\n".join(panels) + "\n</g>\n</svg>\n"
    )


def grid(panel_specs: list[dict], title: str, n_cols: int = 2) -> str:
    panels = [bar_panel(PANEL_W * (i % n_cols), PANEL_H * (i // n_cols), **spec)
              for i, spec in enumerate(panel_specs)]
    return svg_document(panels, n_cols, len(panel_specs), title)


def selection_charts(cmp: ComponentComparison) -> dict[str, str]:
    """One chart per grouping dimension with a panel per metric, and the normalised-RSD view."""
    out = {}
    for dim, levels in DIMENSIONS.items():
        specs = [dict(title=label, categories=levels, y_label=key,
                      series={dim: [cmp.means[dim, lvl][key] for lvl in levels]})
                 for key, label in SELECTION_METRICS]
        out[f"selection_{dim}.svg"] = grid(specs, f"Model quality by {dim}")
    bws = DIMENSIONS["bandwidth_mhz"]
    specs = [
        dict(title="Normalized RSD", categories=[f"{b} MHz" for b in bws], y_label="rsd_normalized",
             series={"z-scored": [cmp.means["bandwidth_mhz", b]["rsd_normalized"] for b in bws]}),
        dict(title="Raw RSD", categories=[f"{b} MHz" for b in bws], y_label="rsd",
             series={"raw": [cmp.means["bandwidth_mhz", b]["rsd"] for b in bws]}),
    ]
    out["normalized_rsd_bandwidth.svg"] = grid(specs, "Normalized RSD and bandwidth")
    return out


def evaluation_charts(matrix: MatrixResult) -> dict[str, str]:
    """Per-scenario accuracy vs CTF pairs for each objective, plus group means."""
    out = {}
    for obj, style in STYLE.items():
        evals = sorted((e for e in matrix.evals if e.objective is obj), key=lambda e: e.scenario_id)
        cats = [f"TS{e.scenario_id}" for e in evals]
        series = {
            "Accuracy %": [e.accuracy_pct for e in evals],
            "CTF %": [e.ctf_pct for e in evals],
            "Iteration CTF %": [e.ctf_iter_pct for e in evals],
        }
        width = max(PANEL_W, 40 * len(cats) + MARGIN["left"] + MARGIN["right"])
        panel = bar_panel(0, 0, f"{style} ({obj.value})", cats, series, "%", width=width)
        out[f"eval_{obj.value.lower()}.svg"] = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" '
            f'viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif">\n'
            f'<title>Accuracy and CTF per scenario, {style}</title>\n{panel}\n</svg>\n'
        )
    means = matrix.group_means()
    groups = sorted(means)
    cats = [f"{g[0]} {g[1]}" for g in groups]
    specs = [
        dict(title="Mean CTF (wall time)", categories=cats, y_label="%",
             series={"CTF": [means[g]["ctf_pct"] for g in groups]}, ref_band=REFERENCE_CTF_PCT),
        dict(title="Mean accuracy", categories=cats, y_label="%",
             series={"Accuracy": [means[g]["accuracy_pct"] for g in groups]}, ref_band=REFERENCE_ACCURACY_PCT),
        dict(title="Mean iteration CTF", categories=cats, y_label="%",
             series={"Iteration CTF": [means[g]["ctf_iter_pct"] for g in groups]}),
    ]
    out["eval_groups.svg"] = grid(specs, "Group means (grey: reference band)", n_cols=3)
    return out


def write_charts(out_dir: Path, charts: dict[str, str]) -> list[Path]:
    paths = []
    for name, text in sorted(charts.items()):
        p = Path(out_dir) / name
        p.write_bytes(text.encode("utf-8"))
        paths.append(p)
    return paths
