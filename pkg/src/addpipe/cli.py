"""Command-line orchestrator for the dataset pipeline, evaluation, and calibration service."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .backends import EndpointConfig, make_remote_backends, make_stub_backends
from .config import PipelineConfig, load_config
from .errors import PipelineError
from .manifest import read_manifest
from .pipeline import STAGE_SEQUENCE, Workspace, run_stage
from .records import DatasetManifest, FunnelStats


class Context:
    def __init__(self, config: PipelineConfig, workspace: Workspace, backend_kind: str):
        self.config = config
        self.workspace = workspace
        self.backend_kind = backend_kind

    def backends(self):
        if self.backend_kind == "stub":
            return make_stub_backends(self.config.seed, self.config.backends.embed_dim)
        remote = self.config.backends.remote
        return make_remote_backends(
            EndpointConfig(
                base_url=remote.base_url,
                token_env=remote.token_env,
                timeout_s=remote.timeout_s,
                retries=remote.retries,
                backoff_s=remote.backoff_s,
                max_in_flight=remote.max_in_flight,
                embed_dim=self.config.backends.embed_dim,
            )
        )


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Pipeline config file (YAML).")
@click.option("--workspace", type=click.Path(file_okay=False), default="workspace", show_default=True, help="Working directory for manifests, blobs, and reports.")
@click.option("--backends", "backend_kind", type=click.Choice(["stub", "remote"]), default=None, help="Backend implementation (overrides config).")
@click.option("--seed", type=int, default=None, help="Global seed (overrides config).")
@click.option("--workers", type=int, default=None, help="Worker pool size (overrides config).")
@click.pass_context
def main(ctx, config_path, workspace, backend_kind, seed, workers):
    """Dataset curation, instruction synthesis, and evaluation pipeline."""
    config = load_config(config_path)
    if seed is not None:
        config.seed = seed
    if workers is not None:
        config.workers = workers
    kind = backend_kind or config.backends.kind
    ctx.obj = Context(config, Workspace(Path(workspace)), kind)


def _run(ctx_obj: Context, stage: str, force: bool, **kwargs):
    try:
        pm = run_stage(stage, ctx_obj.workspace, ctx_obj.config, ctx_obj.backends(), force=force, **kwargs)
    except PipelineError as exc:
        raise click.ClickException(str(exc))
    name, count = pm.funnel.last()
    click.echo(f"{stage}: {count} surviving pairs (funnel stage '{name}')")
    return pm


@main.command()
@click.option("-n", "--count", default=200, show_default=True, help="Number of synthetic records.")
@click.option("--size", default=64, show_default=True, help="Image side length in pixels.")
@click.option("--out", type=click.Path(file_okay=False), default="corpus", show_default=True)
@click.pass_obj
def synth(ctx_obj, count, size, out):
    """Generate a synthetic fixture corpus (images + COCO-style annotations)."""
    from .synthetic import make_synthetic_corpus

    paths = make_synthetic_corpus(out, n=count, seed=ctx_obj.config.seed, size=size)
    click.echo(f"annotations: {paths['annotation_file']}")
    click.echo(f"images:      {paths['image_dir']}")
    click.echo(f"references:  {paths['reference_file']}")


@main.command()
@click.option("--annotations", "annotation_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--images", "image_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--source-tag", default="coco", show_default=True)
@click.option("--dedup/--no-dedup", default=False, show_default=True, help="Drop byte-identical duplicate masks.")
@click.option("--force", is_flag=True)
@click.pass_obj
def ingest(ctx_obj, annotation_file, image_dir, source_tag, dedup, force):
    """Ingest a COCO-style annotated corpus into the workspace."""
    _run(ctx_obj, "ingest", force, annotation_file=annotation_file, image_dir=image_dir,
         source_tag=source_tag, dedup=dedup)


def _stage_command(stage: str, help_text: str):
    @main.command(name=stage, help=help_text)
    @click.option("--force", is_flag=True, help="Run even on a config-digest mismatch.")
    @click.pass_obj
    def _cmd(ctx_obj, force):
        _run(ctx_obj, stage, force)

    return _cmd


_stage_command("prefilter", "Apply geometry and view-quality mask filters; dilate survivors.")
_stage_command("remove", "Generate inpainted removal candidates per surviving pair.")
_stage_command("postfilter", "Verify removals (consensus, multimodal gate), blend, and filter importance.")
_stage_command("instructions", "Synthesize addition instructions for surviving pairs.")
_stage_command("assemble", "Assemble the final dataset manifest.")


@main.command()
@click.pass_obj
def report(ctx_obj):
    """Render the funnel report (TSV + figure) for the assembled dataset."""
    from .reports import emit_funnel_report

    manifest = read_manifest(ctx_obj.workspace.dataset_path)
    out = emit_funnel_report(manifest, ctx_obj.workspace.reports_dir)
    for label, count in out["table"]:
        click.echo(f"{label:>12}: {count}")
    click.echo(f"table:  {out['table_path']}")
    click.echo(f"figure: {out['figure_path']}")


@main.command()
@click.option("--outputs", type=click.Path(exists=True, file_okay=False), required=True, help="Directory of edited images named <pair_id>.png.")
@click.option("--references", type=click.Path(exists=True, file_okay=False), required=True, help="Directory of reference images named <pair_id>.png.")
@click.option("--metrics", default="l1,l2,clip-i,dino,cmmd", show_default=True)
@click.option("--bandwidth", default=10.0, show_default=True, help="CMMD Gaussian kernel bandwidth.")
@click.option("--scale", default=1000.0, show_default=True, help="CMMD output scale.")
@click.pass_obj
def eval(ctx_obj, outputs, references, metrics, bandwidth, scale):
    """Evaluate edited outputs against references (pixel, embedding, CMMD metrics)."""
    from .evaluation import evaluate_pairs
    from .rasters import load_image
    from .reports import emit_metric_report

    requested = [m.strip() for m in metrics.split(",") if m.strip()]
    metric_keys = tuple(
        {"l1": "l1", "l2": "l2", "clip-i": "clip_i", "dino": "clip_i", "clip-t": "clip_t"}.get(m)
        for m in requested
        if m != "cmmd"
    )
    metric_keys = tuple(k for k in metric_keys if k)
    out_images = {p.stem: load_image(p) for p in sorted(Path(outputs).glob("*.png"))}
    ref_images = {p.stem: load_image(p) for p in sorted(Path(references).glob("*.png"))}
    try:
        table = evaluate_pairs(
            out_images, ref_images, ctx_obj.backends().embedder,
            metrics=metric_keys, cmmd_bandwidth=bandwidth, cmmd_scale=scale,
            with_cmmd="cmmd" in requested,
        )
    except ValueError as exc:
        raise click.ClickException(str(exc))
    paths = emit_metric_report(table, ctx_obj.workspace.reports_dir)
    for metric, value in sorted(table.aggregates.items()):
        click.echo(f"{metric}: {value:.6f}")
    click.echo(f"rows:      {paths['rows_path']}")
    click.echo(f"aggregate: {paths['aggregate_path']}")


@main.command()
@click.option("--filter", "filter_name", type=click.Choice(["consensus", "mm_clip", "importance"]), required=True)
@click.option("--epsilon", default=0.05, show_default=True, help="Plateau slope threshold.")
@click.pass_obj
def sweep(ctx_obj, filter_name, epsilon):
    """Sweep a filter threshold over annotated candidates; write curve + suggestion."""
    from .calibration import FILTER_ORIENTATION, suggest_threshold, sweep_threshold
    from .errors import CalibrationError
    from .reports import emit_sweep_report
    from .service import CalibrationData

    data = CalibrationData(ctx_obj.workspace)
    scores = data.scores_for(filter_name)
    labels = {k: v for k, v in data.store.effective_labels().items() if k in scores}
    if not labels:
        raise click.ClickException("no annotations recorded yet; label candidates first (serve-calibration)")
    try:
        points = sweep_threshold(labels, scores, data.default_thresholds(filter_name), FILTER_ORIENTATION[filter_name])
        suggestion = suggest_threshold(points, epsilon=epsilon)
    except CalibrationError as exc:
        raise click.ClickException(str(exc))
    paths = emit_sweep_report(points, filter_name, ctx_obj.workspace.reports_dir, suggested=suggestion.threshold)
    flag = " (no plateau found)" if suggestion.no_plateau else ""
    click.echo(f"suggested {filter_name} threshold: {suggestion.threshold:g}{flag}")
    click.echo(f"curve: {paths['table_path']}")
    click.echo(f"plot:  {paths['figure_path']}")


@main.command(name="serve-calibration")
@click.option("--port", default=8777, show_default=True)
@click.option("--ui-dist", type=click.Path(file_okay=False), default=None, help="Static UI bundle directory to serve at /.")
@click.pass_obj
def serve_calibration(ctx_obj, port, ui_dist):
    """Run the calibration HTTP service (annotation + sweep API, optional UI)."""
    import os

    from .service import serve

    token_env = ctx_obj.config.calibration.auth_token_env
    token = os.environ.get(token_env) if token_env else None
    click.echo(f"serving calibration API on http://127.0.0.1:{port}")
    serve(ctx_obj.workspace.root, port=port, ui_dist=ui_dist, token=token)


@main.command(name="emit-train-manifest")
@click.option("--dataset", type=click.Path(), default=None, help="Dataset manifest path (defaults to the workspace's).")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default: workspace/train_manifest.json).")
@click.pass_obj
def emit_train_manifest(ctx_obj, dataset, out):
    """Write the external-trainer handoff file (dataset path, dropout, hyperparams)."""
    from .editing import TrainingManifest, emit_training_manifest

    dataset_path = Path(dataset) if dataset else ctx_obj.workspace.dataset_path
    out_path = Path(out) if out else ctx_obj.workspace.root / "train_manifest.json"
    manifest = TrainingManifest(dataset_path=str(dataset_path), dropout=ctx_obj.config.editing.dropout)
    emit_training_manifest(manifest, out_path)
    click.echo(f"training manifest: {out_path}")


@main.command(name="toy-guidance")
@click.option("--s-text", default=3.0, show_default=True)
@click.option("--s-image", default=1.0, show_default=True)
@click.option("--steps", default=30, show_default=True, help="Training epochs for the toy run.")
@click.option("--seed", default=None, type=int, help="Override the global seed for this run.")
@click.option("--samples", default=1000, show_default=True)
@click.pass_obj
def toy_guidance(ctx_obj, s_text, s_image, steps, seed, samples):
    """Train the 2-D toy denoiser and report guided vs unguided mode hit-rates."""
    from .editing import GuidanceScales, TrainHyperparams
    from .toy_harness import make_toy_denoiser, make_two_mode_dataset, mode_hit_rate, sample_toy, toy_train

    run_seed = ctx_obj.config.seed if seed is None else seed
    dataset = make_two_mode_dataset(n=4000, seed=run_seed)
    hyper = TrainHyperparams(lr=1e-3, epochs=steps, per_worker_batch=256, grad_accum=1, workers=1, effective_batch=256)
    model, curve = toy_train(dataset, make_toy_denoiser(run_seed), ctx_obj.config.editing.dropout, hyper, seed=run_seed)
    click.echo(f"loss: first epoch {curve[0]:.4f} -> last epoch {curve[-1]:.4f}")
    rng = np.random.default_rng(run_seed)
    sources = rng.normal(0.0, 0.1, size=(samples, 2))
    guided = sample_toy(model, samples, 0, sources, GuidanceScales(s_T=s_text, s_I=s_image), seed=run_seed)
    unguided = sample_toy(model, samples, 0, sources, GuidanceScales(s_T=0.0, s_I=s_image), seed=run_seed)
    hit_guided = mode_hit_rate(guided, 0)
    hit_unguided = mode_hit_rate(unguided, 0)
    click.echo(f"hit-rate at s_T={s_text:g}: {hit_guided:.3f}")
    click.echo(f"hit-rate at s_T=0:   {hit_unguided:.3f}")
    click.echo(f"gap: {100 * (hit_guided - hit_unguided):.1f} percentage points")


if __name__ == "__main__":
    main()
