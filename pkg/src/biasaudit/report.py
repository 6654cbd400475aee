"""Rendering: publication-style SVG figures, CSV tables, Markdown summary.

Renderers are pure functions of already-computed report data (binned
histograms, KDE curves, summary statistics); they never recompute
statistics, so a report JSON on disk is enough to reproduce every figure
byte for byte. All output is SVG 1.1 and UTF-8 CSV.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError

PALETTE = (
    "#4C72B0", "#DD8452", "#55A868", "#C44E52", "#8172B3",
    "#937860", "#DA8BC3", "#8C8C8C", "#CCB974", "#64B5CD",
)
SEX_COLORS = {"Female": "#C44E52", "Male": "#4C72B0"}


class FigureKind(Enum):
    AGE_HIST_DENSITY = "age_hist_density"
    MAE_BARS = "mae_bars"
    REL_DIFF_BARS = "rel_diff_bars"
    KDE_GRID = "kde_grid"
    ERROR_HISTOGRAMS = "error_histograms"


@dataclass(frozen=True)
class FigureSpec:
    kind: FigureKind
    output: Path
    panel_width: int = 300
    panel_height: int = 210


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _esc(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


class _Svg:
    """Tiny deterministic SVG writer with fixed coordinate formatting."""

    def __init__(self, width: float, height: float):
        self.width = width
        self.height = height
        self.parts: list[str] = []

    def rect(self, x, y, w, h, fill, opacity=None, stroke=None):
        attrs = f'x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="{fill}"'
        if opacity is not None:
            attrs += f' fill-opacity="{opacity}"'
        if stroke is not None:
            attrs += f' stroke="{stroke}"'
        self.parts.append(f"<rect {attrs}/>")

    def line(self, x1, y1, x2, y2, stroke="#333333", width=1.0, dash=None):
        attrs = (
            f'x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{width}"'
        )
        if dash:
            attrs += f' stroke-dasharray="{dash}"'
        self.parts.append(f"<line {attrs}/>")

    def polyline(self, xs, ys, stroke, width=1.5):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"/>'
        )

    def text(self, x, y, content, size=11, anchor="start", color="#222222"):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'font-family="Helvetica,Arial,sans-serif" text-anchor="{anchor}" '
            f'fill="{color}">{_esc(content)}</text>'
        )

    def tostring(self) -> str:
        body = "\n".join(self.parts)
        return (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{_fmt(self.width)}" height="{_fmt(self.height)}" '
            f'viewBox="0 0 {_fmt(self.width)} {_fmt(self.height)}">\n'
            f"{body}\n</svg>\n"
        )


@dataclass
class _Axes:
    """Maps data coordinates into one panel's pixel box."""

    x0: float
    y0: float
    w: float
    h: float
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def px(self, x: float) -> float:
        span = self.xmax - self.xmin or 1.0
        return self.x0 + (x - self.xmin) / span * self.w

    def py(self, y: float) -> float:
        span = self.ymax - self.ymin or 1.0
        return self.y0 + self.h - (y - self.ymin) / span * self.h

    def frame(self, svg: _Svg, title: str = ""):
        svg.rect(self.x0, self.y0, self.w, self.h, fill="none", stroke="#999999")
        if title:
            svg.text(self.x0 + 4, self.y0 - 5, title, size=12)

    def ticks(self, svg: _Svg, nx: int = 4, ny: int = 3):
        for i in range(nx + 1):
            x = self.xmin + (self.xmax - self.xmin) * i / nx
            svg.line(self.px(x), self.y0 + self.h, self.px(x), self.y0 + self.h + 3, stroke="#666666")
            svg.text(self.px(x), self.y0 + self.h + 13, f"{x:g}", size=9, anchor="middle")
        for i in range(ny + 1):
            y = self.ymin + (self.ymax - self.ymin) * i / ny
            svg.line(self.x0 - 3, self.py(y), self.x0, self.py(y), stroke="#666666")
            svg.text(self.x0 - 5, self.py(y) + 3, f"{y:.3g}", size=9, anchor="end")


def _write(path: str | Path, content: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None
    return path


# ---------------------------------------------------------------------------
# figure renderers over report data


def svg_age_distribution(fig: dict) -> str:
    edges = fig["bin_edges"]
    panels = fig["panels"]
    cols = 2
    rows = (len(panels) + cols - 1) // cols
    pw, ph, mx, my, top = 320, 200, 55, 45, 30
    svg = _Svg(cols * (pw + mx) + 25, rows * (ph + my) + top + 10)

    for idx, panel in enumerate(panels):
        r, c = divmod(idx, cols)
        ymax = 0.0
        for series in panel["series"]:
            if series["density"]:
                ymax = max(ymax, max(series["density"]))
            if series["kde"]:
                ymax = max(ymax, max(series["kde"]["density"]))
        ax = _Axes(
            x0=mx + c * (pw + mx), y0=top + r * (ph + my), w=pw, h=ph,
            xmin=edges[0], xmax=edges[-1], ymin=0.0, ymax=(ymax or 1.0) * 1.08,
        )
        ax.frame(svg, panel["title"])
        ax.ticks(svg)
        for series in panel["series"]:
            color = SEX_COLORS.get(series["label"], PALETTE[0])
            for b, dens in enumerate(series["density"]):
                if dens <= 0:
                    continue
                x_left = ax.px(edges[b])
                x_right = ax.px(edges[b + 1])
                y_top = ax.py(dens)
                svg.rect(x_left, y_top, x_right - x_left, ax.y0 + ax.h - y_top,
                         fill=color, opacity=0.35)
            if series["kde"]:
                g = series["kde"]["grid"]
                d = series["kde"]["density"]
                svg.polyline([ax.px(x) for x in g], [ax.py(y) for y in d], stroke=color)
        # legend (top-right inside the panel)
        ly = ax.y0 + 12
        for series in panel["series"]:
            color = SEX_COLORS.get(series["label"], PALETTE[0])
            svg.rect(ax.x0 + ax.w - 92, ly - 8, 10, 10, fill=color, opacity=0.7)
            svg.text(ax.x0 + ax.w - 78, ly, f'{series["label"]} (n={series["count"]})', size=9)
            ly += 14
    return svg.tostring()


def svg_mae_bars(summary: dict) -> str:
    labels = summary["labels"]
    n = len(labels)
    pw, ph, mx, my, top = 360, 230, 60, 70, 35
    svg = _Svg(2 * (pw + mx) + 30, ph + my + top)

    def bar_panel(col: int, title: str, values: Sequence[float], sds: Sequence[float], zero_line: bool):
        vmax = max(v + s for v, s in zip(values, sds))
        vmin = min(0.0, min(v - s for v, s in zip(values, sds)))
        ax = _Axes(x0=mx + col * (pw + mx), y0=top, w=pw, h=ph,
                   xmin=0.0, xmax=float(n), ymin=vmin * 1.1 if vmin < 0 else 0.0,
                   ymax=(vmax or 1.0) * 1.12)
        ax.frame(svg, title)
        for i in range(4):
            y = ax.ymin + (ax.ymax - ax.ymin) * i / 3
            svg.text(ax.x0 - 5, ax.py(y) + 3, f"{y:.3g}", size=9, anchor="end")
            svg.line(ax.x0 - 3, ax.py(y), ax.x0, ax.py(y), stroke="#666666")
        if zero_line:
            svg.line(ax.px(0.0), ax.py(0.0), ax.px(float(n)), ax.py(0.0),
                     stroke="#444444", width=1.0, dash="4,3")
        for i, (v, s) in enumerate(zip(values, sds)):
            color = PALETTE[i % len(PALETTE)]
            x_left = ax.px(i + 0.18)
            x_right = ax.px(i + 0.82)
            y_v = ax.py(v)
            y_0 = ax.py(0.0)
            svg.rect(min(x_left, x_right), min(y_v, y_0), abs(x_right - x_left),
                     abs(y_0 - y_v), fill=color, opacity=0.85)
            # error bar
            xc = ax.px(i + 0.5)
            svg.line(xc, ax.py(v - s), xc, ax.py(v + s), stroke="#222222", width=1.2)
            svg.line(xc - 4, ax.py(v - s), xc + 4, ax.py(v - s), stroke="#222222", width=1.2)
            svg.line(xc - 4, ax.py(v + s), xc + 4, ax.py(v + s), stroke="#222222", width=1.2)
            svg.text(xc, ax.y0 + ax.h + 12 + (i % 2) * 11, labels[i], size=8, anchor="middle")

    bar_panel(0, "MAE per subgroup (years)",
              [summary["mean_mae"][lbl] for lbl in labels],
              [summary["sd_mae"][lbl] for lbl in labels], zero_line=False)
    bar_panel(1, "Difference vs pooled MAE (years)",
              [summary["relative_diff"][lbl] for lbl in labels],
              [summary["relative_diff_sd"][lbl] for lbl in labels], zero_line=True)
    svg.text(15, svg.height - 8,
             f'n={summary["sample_size"]} per subgroup, {summary["repeats"]} repeated draws; '
             f'pooled MAE {summary["pooled_mae"]:.3f} years', size=10)
    return svg.tostring()


def _normalize_kde_bundles(kde_bundles: dict) -> dict[str, dict[int, list[tuple[str, Optional[dict]]]]]:
    """Accept both the report-dict form and the FeatureArm dataclass form."""
    out: dict[str, dict[int, list[tuple[str, Optional[dict]]]]] = {}
    for attr, modes in kde_bundles.items():
        out[attr] = {}
        for mode, entries in modes.items():
            levels: list[tuple[str, Optional[dict]]] = []
            for entry in entries:
                if isinstance(entry, dict):
                    levels.append((entry["level"], entry["curve"]))
                else:
                    lbl, curve = entry
                    levels.append((lbl, None if curve is None else
                                   {"grid": list(curve.grid), "density": list(curve.density)}))
            out[attr][int(mode)] = levels
    return out


def svg_kde_grid(kde_bundles: dict, attr_order: Sequence[str] = ("age", "race", "sex")) -> str:
    bundles = _normalize_kde_bundles(kde_bundles)
    attrs = [a for a in attr_order if bundles.get(a)]
    attrs += [a for a in bundles if a not in attrs and bundles[a]]
    if not attrs:
        raise DataError("no KDE bundles to render")
    modes = sorted(next(iter(bundles.values())).keys())
    pw, ph, mx, my, top = 250, 160, 55, 50, 35
    svg = _Svg(len(modes) * (pw + mx) + 60, len(attrs) * (ph + my) + top)

    for col, mode in enumerate(modes):
        # shared x range per mode column
        xmin, xmax = np.inf, -np.inf
        for attr in attrs:
            for _, curve in bundles[attr].get(mode, []):
                if curve is None:
                    continue
                xmin = min(xmin, curve["grid"][0])
                xmax = max(xmax, curve["grid"][-1])
        if not np.isfinite(xmin):
            xmin, xmax = 0.0, 1.0
        for row, attr in enumerate(attrs):
            entries = bundles[attr].get(mode, [])
            ymax = 0.0
            for _, curve in entries:
                if curve is not None and curve["density"]:
                    ymax = max(ymax, max(curve["density"]))
            ax = _Axes(x0=mx + col * (pw + mx), y0=top + row * (ph + my), w=pw, h=ph,
                       xmin=float(xmin), xmax=float(xmax), ymin=0.0, ymax=(ymax or 1.0) * 1.08)
            title = f"mode {mode}" if row == 0 else ""
            ax.frame(svg, title)
            ax.ticks(svg, nx=3, ny=2)
            if col == 0:
                svg.text(12, ax.y0 + ax.h / 2, attr, size=11)
            for i, (lbl, curve) in enumerate(entries):
                if curve is None:
                    continue
                color = PALETTE[i % len(PALETTE)]
                svg.polyline([ax.px(x) for x in curve["grid"]],
                             [ax.py(y) for y in curve["density"]], stroke=color, width=1.3)
            if col == len(modes) - 1:
                ly = ax.y0 + 10
                for i, (lbl, _) in enumerate(entries):
                    svg.rect(ax.x0 + ax.w + 6, ly - 7, 9, 9, fill=PALETTE[i % len(PALETTE)])
                    svg.text(ax.x0 + ax.w + 19, ly + 1, lbl, size=8)
                    ly += 12
    return svg.tostring()


def svg_error_histograms(fig: dict) -> str:
    edges = fig["bin_edges"]
    panels = fig["panels"]
    cols = 3
    rows = (len(panels) + cols - 1) // cols
    pw, ph, mx, my, top = 260, 170, 55, 45, 30
    svg = _Svg(cols * (pw + mx) + 25, rows * (ph + my) + top)
    for idx, panel in enumerate(panels):
        r, c = divmod(idx, cols)
        ymax = max(panel["density"]) if panel["density"] else 1.0
        ax = _Axes(x0=mx + c * (pw + mx), y0=top + r * (ph + my), w=pw, h=ph,
                   xmin=edges[0], xmax=edges[-1], ymin=0.0, ymax=(ymax or 1.0) * 1.1)
        ax.frame(svg, panel["label"])
        ax.ticks(svg, nx=3, ny=2)
        color = PALETTE[idx % len(PALETTE)]
        for b, dens in enumerate(panel["density"]):
            if dens <= 0:
                continue
            x_left = ax.px(edges[b])
            x_right = ax.px(edges[b + 1])
            y_top = ax.py(dens)
            svg.rect(x_left, y_top, x_right - x_left, ax.y0 + ax.h - y_top, fill=color, opacity=0.8)
        if panel.get("shapiro_p") is not None:
            svg.text(ax.x0 + ax.w - 6, ax.y0 + 12, f'normality p={panel["shapiro_p"]:.2e}',
                     size=8, anchor="end")
    return svg.tostring()


# ---------------------------------------------------------------------------
# public operations


def render_age_distribution(partition, out: str | Path, grid_points: int = 256,
                            bandwidth_rule="scott") -> Path:
    """Histogram + density overview of cohort ages (one panel per race plus all)."""
    from .pipeline import AuditConfig, _age_distribution_figure

    if partition.total_included() == 0:
        raise DataError("cannot render an empty partition")
    cfg = AuditConfig(grid_points=max(2, grid_points), bandwidth_rule=bandwidth_rule)
    fig = _age_distribution_figure(partition, cfg)
    return _write(out, svg_age_distribution(fig))


def render_mae_bars(summary, out: str | Path) -> Path:
    """MAE and relative-difference bars with repeat-SD error bars."""
    from .pipeline import _mae_summary_dict
    from .resample import RepeatedMaeSummary

    data = _mae_summary_dict(summary) if isinstance(summary, RepeatedMaeSummary) else summary
    if data is None:
        raise DataError("no MAE summary to render")
    return _write(out, svg_mae_bars(data))


def render_kde_grid(kde_bundles, out: str | Path) -> Path:
    """Grid of density curves: rows are attributes, columns are modes."""
    return _write(out, svg_kde_grid(kde_bundles))


def render_error_histograms(fig: dict, out: str | Path) -> Path:
    return _write(out, svg_error_histograms(fig))


def render_report_figures(report: dict, out_dir: str | Path) -> list[Path]:
    """Render every available figure for a report dict; returns written paths."""
    out_dir = Path(out_dir)
    written: list[Path] = []
    perf = report.get("performance") or {}
    if perf.get("present"):
        fig = perf.get("figure_data", {})
        if fig.get("age_distribution"):
            written.append(_write(out_dir / "age_distribution.svg",
                                  svg_age_distribution(fig["age_distribution"])))
        if fig.get("error_histograms"):
            written.append(_write(out_dir / "error_histograms.svg",
                                  svg_error_histograms(fig["error_histograms"])))
        if perf.get("mae_summary"):
            written.append(_write(out_dir / "mae_bars.svg", svg_mae_bars(perf["mae_summary"])))
    feat = report.get("feature") or {}
    if feat.get("present") and feat.get("kde_bundles"):
        written.append(_write(out_dir / "kde_grid.svg", svg_kde_grid(feat["kde_bundles"])))
    return written


def render_figure(spec: FigureSpec, report: dict) -> Path:
    """Dispatch one FigureSpec against report data."""
    perf = report.get("performance") or {}
    feat = report.get("feature") or {}
    if spec.kind is FigureKind.AGE_HIST_DENSITY:
        return _write(spec.output, svg_age_distribution(perf["figure_data"]["age_distribution"]))
    if spec.kind in (FigureKind.MAE_BARS, FigureKind.REL_DIFF_BARS):
        return _write(spec.output, svg_mae_bars(perf["mae_summary"]))
    if spec.kind is FigureKind.KDE_GRID:
        return _write(spec.output, svg_kde_grid(feat["kde_bundles"]))
    if spec.kind is FigureKind.ERROR_HISTOGRAMS:
        return _write(spec.output, svg_error_histograms(perf["figure_data"]["error_histograms"]))
    raise ConfigError(f"unknown figure kind {spec.kind}")


# ---------------------------------------------------------------------------
# CSV tables


def _csv_text(rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _num(v) -> str:
    return "" if v is None else repr(v)


def _shift_table_rows(table: dict) -> list[list]:
    comparisons = table["comparisons"]
    header = ["mode"]
    for comp in comparisons:
        header.append(f"{comp} p")
        header.append(f"{comp} significant")
    rows = [header]
    by_mode: dict[int, dict[str, dict]] = {}
    for row in table["rows"]:
        by_mode.setdefault(row["mode"], {})[row["comparison"]] = row
    for mode in table["modes"]:
        out = [str(mode)]
        for comp in comparisons:
            row = by_mode.get(mode, {}).get(comp)
            if row is None or row.get("skipped_reason"):
                out.extend(["", "skipped"])
            else:
                out.append(_num(row["adjusted_p"]))
                out.append("true" if row["significant"] else "false")
        rows.append(out)
    return rows


def _pairwise_rows(pair: dict) -> list[list]:
    labels = pair["labels"]
    rows = [["matrix", "group", *labels]]
    for name in ("p", "t"):
        for i, lbl in enumerate(labels):
            rows.append([name, lbl, *[_num(v) for v in pair[name][i]]])
    return rows


def emit_tables(report: dict, out_dir: str | Path) -> list[Path]:
    """Write the report's tabular content as CSV files; returns written paths."""
    out_dir = Path(out_dir)
    written: list[Path] = []
    perf = report.get("performance") or {}
    feat = report.get("feature") or {}

    if perf.get("present"):
        rows = [["subgroup", "count", "mae", "sd"]]
        for lbl, s in perf["error_summary"].items():
            rows.append([lbl, str(s["count"]), _num(s["mae"]), _num(s["sd"])])
        written.append(_write(out_dir / "subgroup_summary.csv", _csv_text(rows)))

        if perf.get("mae_summary"):
            m = perf["mae_summary"]
            rows = [["subgroup", "mean_mae", "sd_mae", "relative_diff", "relative_diff_sd"]]
            for lbl in m["labels"]:
                rows.append([lbl, _num(m["mean_mae"][lbl]), _num(m["sd_mae"][lbl]),
                             _num(m["relative_diff"][lbl]), _num(m["relative_diff_sd"][lbl])])
            rows.append(["(pooled)", _num(m["pooled_mae"]), _num(m["pooled_mae_sd"]), "", ""])
            written.append(_write(out_dir / "mae_summary.csv", _csv_text(rows)))

        for pass_name in ("full", "balanced"):
            battery = perf.get(pass_name)
            if not battery:
                continue
            for factor in ("race", "sex"):
                pair = battery[f"conover_{factor}"]
                written.append(_write(out_dir / f"posthoc_{pass_name}_{factor}.csv",
                                      _csv_text(_pairwise_rows(pair))))

    if feat.get("present"):
        if feat.get("shift_all_subjects"):
            written.append(_write(out_dir / "ks_all_subjects.csv",
                                  _csv_text(_shift_table_rows(feat["shift_all_subjects"]))))
        if feat.get("shift_equal_size"):
            written.append(_write(out_dir / "ks_equal_size.csv",
                                  _csv_text(_shift_table_rows(feat["shift_equal_size"]))))
    return written


# ---------------------------------------------------------------------------
# Markdown summary


def _md_shift_table(table: dict) -> list[str]:
    comps = table["comparisons"]
    lines = ["| mode | " + " | ".join(comps) + " |",
             "|---" * (len(comps) + 1) + "|"]
    by_mode: dict[int, dict[str, dict]] = {}
    for row in table["rows"]:
        by_mode.setdefault(row["mode"], {})[row["comparison"]] = row
    for mode in table["modes"]:
        cells = []
        for comp in comps:
            row = by_mode.get(mode, {}).get(comp)
            if row is None or row.get("skipped_reason"):
                cells.append("(skipped)")
            else:
                mark = " *" if row["significant"] else ""
                cells.append(f'{row["adjusted_p"]:.3g}{mark}')
        lines.append(f"| {mode} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append(f'`*` significant at alpha = {table["alpha"]:g} '
                 f'(BY-adjusted over {table["family_size"]} tests)')
    return lines


def to_markdown(report: dict) -> str:
    """Human-readable summary of an audit report dict."""
    lines: list[str] = ["# Subgroup bias audit", ""]
    prov = report.get("provenance", {})
    if prov.get("cohort"):
        c = prov["cohort"]
        lines += [
            f'- subjects included: {c["included"]}, excluded: {c["excluded"]} '
            f'({", ".join(f"{k}: {v}" for k, v in c["exclusion_reasons"].items()) or "none"})',
            "- subgroup sizes: "
            + ", ".join(f'{k} {v}' for k, v in c["subgroup_counts"].items()),
            "",
        ]
    if prov.get("seed") is not None:
        lines.append(f'- seed: {prov["seed"]}, backend: {prov.get("backend", "?")}')
        lines.append("")

    perf = report.get("performance") or {}
    if perf.get("present"):
        lines += ["## Performance arm", ""]
        for pass_name, title in (("full", "Full cohort"), ("balanced", "Balanced sample")):
            battery = perf.get(pass_name)
            if not battery:
                continue
            gate = battery["gate"]
            lines += [
                f"### {title}",
                "",
                f'- assumption gate: **{gate["outcome"]}** '
                f'(min normality p = {gate["min_shapiro_p"]:.3g}, '
                f'homogeneity p = {gate["levene_p"]:.3g})',
                f'- Kruskal-Wallis: H = {battery["kruskal_wallis"]["statistic"]:.4g}, '
                f'p = {battery["kruskal_wallis"]["p_value"]:.3g}',
            ]
            for factor in ("race", "sex"):
                pair = battery[f"conover_{factor}"]
                cells = []
                labels = pair["labels"]
                for i in range(len(labels)):
                    for j in range(i + 1, len(labels)):
                        cells.append(f'{labels[i]} vs {labels[j]}: {pair["p"][i][j]:.3g}')
                suffix = " (degenerate separation)" if pair["degenerate"] else ""
                lines.append(f'- post-hoc {factor}{suffix}: ' + "; ".join(cells))
            lines.append("")
        if perf.get("mae_summary"):
            m = perf["mae_summary"]
            lines += [
                "### Repeated balanced sampling",
                "",
                f'n = {m["sample_size"]} per subgroup, {m["repeats"]} repeats, '
                f'pooled MAE = {m["pooled_mae"]:.3f} ± {m["pooled_mae_sd"]:.3f} years',
                "",
                "| subgroup | MAE | SD | diff vs pooled |",
                "|---|---|---|---|",
            ]
            for lbl in m["labels"]:
                lines.append(
                    f'| {lbl} | {m["mean_mae"][lbl]:.3f} | {m["sd_mae"][lbl]:.3f} | '
                    f'{m["relative_diff"][lbl]:+.3f} |'
                )
            lines.append("")

    feat = report.get("feature") or {}
    if feat.get("present"):
        ev = ", ".join(f"{v:.3g}" for v in feat["explained_variance"])
        lines += [
            "## Feature arm",
            "",
            f'- {feat["n_subjects"]} subjects with features '
            f'({feat["n_missing_features"]} skipped without), dimension {feat["dim"]}',
            f'- modes used: {feat["modes_used"]} (explained variance: {ev})',
            "",
        ]
        if feat.get("shift_all_subjects"):
            lines += ["### Distribution shifts, all subjects", ""]
            lines += _md_shift_table(feat["shift_all_subjects"])
            lines.append("")
        if feat.get("shift_equal_size"):
            lines += [f'### Distribution shifts, equal-size samples '
                      f'(n = {feat["equal_sample_size"]} per subgroup)', ""]
            lines += _md_shift_table(feat["shift_equal_size"])
            lines.append("")
    else:
        lines += ["## Feature arm", "", "absent", ""]
    return "\n".join(lines) + "\n"
