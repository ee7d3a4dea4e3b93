"""Command-line entry point: one subcommand per pipeline stage plus `serve`."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import pipeline
from .config import ProjectConfig
from .errors import PipelineError
from .pipeline import Project


def _open_project(ctx) -> Project:
    root = Path(ctx.obj["project"])
    config_path = ctx.obj["config"]
    try:
        project = Project.open(root, config_path)
        if ctx.obj["seed"] is not None:
            project.config.sampling_seed = ctx.obj["seed"]
        return project
    except PipelineError as exc:
        raise click.ClickException(str(exc))


def _run(stage_fn, *args, **kwargs):
    try:
        summary = stage_fn(*args, **kwargs)
    except PipelineError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))
    return summary


@click.group()
@click.option("--project", required=True, type=click.Path(), help="Project directory.")
@click.option("--config", type=click.Path(exists=True), default=None, help="Config JSON (default: <project>/config.json).")
@click.option("--jobs", default=1, show_default=True, help="Intra-stage parallelism.")
@click.option("--seed", default=None, type=int, help="Override the sampling seed.")
@click.pass_context
def main(ctx, project, config, jobs, seed):
    """Chat-recording moderation audit pipeline."""
    ctx.ensure_object(dict)
    ctx.obj.update(project=project, config=config, jobs=jobs, seed=seed)


@main.command()
@click.pass_context
def ingest(ctx):
    """Extract, crop, and SSIM-deduplicate frames for every session."""
    _run(pipeline.stage_ingest, _open_project(ctx))


@main.command()
@click.pass_context
def variants(ctx):
    """Write the 6 image variants and the background-suppressed image."""
    _run(pipeline.stage_variants, _open_project(ctx))


@main.command()
@click.pass_context
def ocr(ctx):
    """Run the OCR confidence cascade over every frame."""
    _run(pipeline.stage_ocr, _open_project(ctx), jobs=ctx.obj["jobs"])


@main.command()
@click.pass_context
def transcribe(ctx):
    """Collect accepted OCR lines per session (pre-anonymization)."""
    _run(pipeline.stage_transcribe, _open_project(ctx))


@main.command()
@click.pass_context
def anonymize(ctx):
    """Pseudonymize speakers, redact PII, dedup near-identical lines."""
    _run(pipeline.stage_anonymize, _open_project(ctx))


@main.command()
@click.pass_context
def modevents(ctx):
    """Detect masked spans and build per-user review profiles."""
    _run(pipeline.stage_modevents, _open_project(ctx))


@main.command()
@click.pass_context
def chunk(ctx):
    """Cut the corpus into 50-line conversations."""
    _run(pipeline.stage_chunk, _open_project(ctx))


@main.command()
@click.pass_context
def classify(ctx):
    """Label conversations through the configured classifier endpoint."""
    _run(pipeline.stage_classify, _open_project(ctx), jobs=ctx.obj["jobs"])


@main.command()
@click.option("--ground-truth", "ground_truth", required=True, type=click.Path(exists=True), help="Directory of <session>.txt manual transcripts.")
@click.option("--search-rgb", is_flag=True, help="Also search suppression thresholds per game and store them in the config.")
@click.pass_context
def eval(ctx, ground_truth, search_rgb):
    """Score accepted OCR text against manual transcripts."""
    project = _open_project(ctx)
    if search_rgb:
        _run(_eval_search_rgb, project, Path(ground_truth), ctx.obj["jobs"])
    _run(pipeline.stage_eval, project, Path(ground_truth))


def _eval_search_rgb(project: Project, gt_dir: Path, jobs: int):
    """Per-game RGB threshold search on the ground-truth sessions."""
    from .imgproc import candidate_thresholds, search_thresholds
    from .ingest import load_image_rgb
    from .ocr import CommandAdapter

    adapter = CommandAdapter(project.config.ocr_adapter)

    def runner(image):
        return adapter.run(image).text_lines()

    meta = project.session_meta()
    by_game: dict[str, tuple[list[str], list]] = {}
    for gt_path in sorted(gt_dir.glob("*.txt")):
        session_id = gt_path.stem
        if session_id not in meta:
            continue
        game = meta[session_id][0]
        gt_lines, frames = by_game.setdefault(game, ([], []))
        gt_lines.extend(l for l in gt_path.read_text().splitlines() if l.strip())
        frames.extend(
            load_image_rgb(path) for _, path in pipeline._frame_paths(project, session_id)
        )
    summary = {}
    candidates = candidate_thresholds(tuple(project.config.rgb_candidate_values))
    for game in sorted(by_game):
        gt_lines, frames = by_game[game]
        result = search_thresholds(
            gt_lines, frames, runner, candidates=candidates, tau=project.config.tau, jobs=jobs
        )
        project.config.rgb_thresholds[game] = list(result.best.as_tuple())
        summary[game] = {"threshold": list(result.best.as_tuple())}
    project.config.save(project.root / "config.json")
    return summary


@main.command()
@click.option("--workflow", type=click.Choice(["rq1", "rq2"]), default="rq1", show_default=True)
@click.pass_context
def sample(ctx, workflow):
    """Draw the next stratified review candidates."""
    _run(pipeline.stage_sample, _open_project(ctx), workflow)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8400, show_default=True)
@click.pass_context
def serve(ctx, host, port):
    """Serve the review API for the annotation UI."""
    import uvicorn

    from .server import create_app

    app = create_app(_open_project(ctx))
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("init-config")
@click.pass_context
def init_config(ctx):
    """Write a default config.json into the project directory."""
    root = Path(ctx.obj["project"])
    root.mkdir(parents=True, exist_ok=True)
    path = root / "config.json"
    if path.exists():
        raise click.ClickException(f"{path} already exists")
    ProjectConfig().save(path)
    click.echo(str(path))


if __name__ == "__main__":
    main()
