"""Report rendering: delimited tables plus matplotlib figures written side by side."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .calibration import SweepPoint
from .evaluation import MetricTable, TradeoffPoint
from .records import DatasetManifest

FUNNEL_STAGE_LABELS = (
    ("ingest", "Initial"),
    ("prefilter", "Pre-Removal"),
    ("consensus", "Consensus"),
    ("mm_clip", "MM CLIP"),
    ("importance", "Importance"),
)


def funnel_table(manifest: DatasetManifest) -> list[tuple[str, int]]:
    """Five-row filtering summary: Initial, Pre-Removal, Consensus, MM CLIP, Importance.

    Falls back to raw funnel stages when the postfilter sub-stage detail is absent.
    """
    counts = dict(manifest.funnel.stages)
    counts.update({k: v for k, v in manifest.stage_detail.items() if isinstance(v, int)})
    rows = []
    for key, label in FUNNEL_STAGE_LABELS:
        if key in counts:
            rows.append((label, int(counts[key])))
    if not rows:
        rows = [(name, int(count)) for name, count in manifest.funnel.stages]
    return rows


def write_tsv(rows: list[tuple], header: tuple, path) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join("" if v is None else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def emit_funnel_report(manifest: DatasetManifest, out_dir) -> dict:
    """Write the per-stage survival table (TSV), raw funnel, and a bar-chart figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = funnel_table(manifest)
    table_path = out_dir / "funnel.tsv"
    write_tsv(table, ("stage", "count"), table_path)
    raw_path = out_dir / "funnel_raw.tsv"
    write_tsv(list(manifest.funnel.stages), ("stage", "count"), raw_path)

    figure_path = out_dir / "funnel.png"
    fig, ax = plt.subplots(figsize=(6, 3.2))
    labels = [name for name, _ in table]
    values = [count for _, count in table]
    ax.bar(labels, values, color="#4878a8")
    ax.set_ylabel("surviving pairs")
    ax.set_title("Filtering funnel")
    for index, value in enumerate(values):
        ax.text(index, value, f"{value:,}", ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(figure_path, dpi=120)
    plt.close(fig)
    return {"table": table, "table_path": str(table_path), "figure_path": str(figure_path), "raw_path": str(raw_path)}


def emit_sweep_report(points: list[SweepPoint], filter_name: str, out_dir, suggested: float | None = None) -> dict:
    """Write the threshold sweep as CSV plus the success-vs-filtered curve figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [(p.threshold, p.filtered_pct, p.success_pct_retained) for p in points]
    table_path = out_dir / f"sweep_{filter_name}.csv"
    lines = ["threshold,filtered_pct,success_pct_retained"]
    lines += [f"{t},{f},{'' if s is None else s}" for t, f, s in rows]
    table_path.write_text("\n".join(lines) + "\n")

    figure_path = out_dir / f"sweep_{filter_name}.png"
    usable = [p for p in points if p.success_pct_retained is not None]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot([p.filtered_pct for p in usable], [p.success_pct_retained for p in usable], marker="o", color="#4878a8")
    ax.set_xlabel("filtered images [%]")
    ax.set_ylabel("successful removals retained [%]")
    ax.set_title(f"{filter_name} threshold sweep")
    if suggested is not None:
        ax.axvline(
            next((p.filtered_pct for p in usable if p.threshold == suggested), usable[-1].filtered_pct),
            linestyle="--", color="#a84848", label=f"suggested {suggested:g}",
        )
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(figure_path, dpi=120)
    plt.close(fig)
    return {"table_path": str(table_path), "figure_path": str(figure_path)}


def emit_tradeoff_report(points: list[TradeoffPoint], out_dir, name: str = "tradeoff") -> dict:
    """Write the consistency-vs-adherence curve as CSV plus a figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table_path = out_dir / f"{name}.csv"
    lines = ["s_image,clip_image_similarity,directional_similarity"]
    lines += [f"{p.s_image},{p.clip_image_similarity},{p.directional_similarity}" for p in points]
    table_path.write_text("\n".join(lines) + "\n")

    figure_path = out_dir / f"{name}.png"
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(
        [p.directional_similarity for p in points],
        [p.clip_image_similarity for p in points],
        marker="o", color="#4878a8",
    )
    for p in points:
        ax.annotate(f"{p.s_image:g}", (p.directional_similarity, p.clip_image_similarity), fontsize=7)
    ax.set_xlabel("directional similarity")
    ax.set_ylabel("similarity to input image")
    ax.set_title("Consistency-instruction trade-off")
    fig.tight_layout()
    fig.savefig(figure_path, dpi=120)
    plt.close(fig)
    return {"table_path": str(table_path), "figure_path": str(figure_path)}


def emit_metric_report(table: MetricTable, out_dir, name: str = "metrics") -> dict:
    """Write per-pair metric rows and aggregates as TSVs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metric_names = sorted({key for row in table.rows for key in row.values})
    rows = []
    for row in table.rows:
        rows.append((row.pair_id, *[row.values.get(m) for m in metric_names], row.error or ""))
    rows_path = out_dir / f"{name}.tsv"
    write_tsv(rows, ("pair_id", *metric_names, "error"), rows_path)
    agg_path = out_dir / f"{name}_aggregate.tsv"
    write_tsv(sorted(table.aggregates.items()), ("metric", "mean"), agg_path)
    return {"rows_path": str(rows_path), "aggregate_path": str(agg_path)}
