"""Command-line interface for dataset generation, reconstruction, and serving."""

from __future__ import annotations

import os
import sys

import click
import yaml

from . import harness, model as modellib
from .noise import PRESET_NAMES


def _load_model(name: str):
    if name in modellib.BUILTIN_CATEGORIES:
        return modellib.load_builtin(name)
    if os.path.exists(name):
        with open(name) as fh:
            return modellib.normalize_to_container(modellib.parse_model(fh.read()))
    raise harness.HarnessError(f"unknown model {name!r}: not a builtin nor a spec path")


def _fail_validation(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


@click.group()
def main():
    """Articulated-object reconstruction pipeline."""


@main.command("gen-data")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
def gen_data(config_path, out_dir, seed):
    """Render a multi-pose multi-view dataset of NMAP bundles."""
    with open(config_path) as fh:
        config = yaml.safe_load(fh) or {}
    try:
        manifest = harness.cmd_gen_data(config, out_dir, seed)
    except (harness.HarnessError, modellib.ModelSpecError, ValueError) as exc:
        _fail_validation(str(exc))
    n = len(manifest.bundle_files())
    click.echo(f"wrote {n} bundles + manifest to {out_dir}")


@main.command()
@click.argument("bundles", nargs=-1, type=click.Path(exists=True))
@click.option("--noise", type=click.Choice(PRESET_NAMES), default="clean", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--model", "model_spec", type=click.Path(exists=True), default=None,
              help="Model spec path (defaults to model.yaml beside the bundles).")
def reconstruct(bundles, noise, out_dir, seed, model_spec):
    """Reconstruct a canonical session from NMAP bundle files."""
    try:
        session = harness.cmd_reconstruct(
            list(bundles), noise, out_dir, seed=seed, model_spec_path=model_spec
        )
    except (harness.HarnessError, ValueError) as exc:
        _fail_validation(str(exc))
    click.echo(
        f"session {session.session_id}: cloud {session.cloud.size} pts, "
        f"mesh {session.mesh.n_vertices}V/{session.mesh.n_faces}F -> {out_dir}"
    )


@main.command("view-sweep")
@click.option("--model", "model_name", default="laptop", show_default=True)
@click.option("--views", default="1,2,4", show_default=True, help="Comma-separated view counts.")
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--noise", type=click.Choice(PRESET_NAMES), default="mild", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="CSV output path.")
@click.option("--assert", "assert_trend", is_flag=True,
              help="Exit 3 unless the multiview accuracy trend holds.")
def view_sweep(model_name, views, trials, noise, seed, out_path, assert_trend):
    """Measure reconstruction accuracy as views are added."""
    try:
        model = _load_model(model_name)
        view_counts = [int(v) for v in views.split(",")]
        report, verdict = harness.cmd_view_sweep(model, view_counts, trials, noise, seed)
    except (harness.HarnessError, ValueError) as exc:
        _fail_validation(str(exc))
    if out_path:
        with open(out_path, "wb") as fh:
            fh.write(report.to_csv())
    click.echo(report.summary_table("views", ["cd", "iou"]))
    for key, value in verdict.items():
        if key != "means":
            click.echo(f"{key}: {value}")
    if assert_trend and not verdict["pass"]:
        sys.exit(3)


@main.command()
@click.option("--model", "model_name", default="laptop", show_default=True)
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--noise", type=click.Choice(PRESET_NAMES), default="heavy", show_default=True)
@click.option("--views", default="2", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="CSV output path.")
def ablate(model_name, trials, noise, views, seed, out_path):
    """Compare weighted vs unweighted vote aggregation (and estimate combining)."""
    try:
        model = _load_model(model_name)
        view_counts = [int(v) for v in views.split(",")]
        report, summary = harness.cmd_ablate(model, trials, noise, seed, view_counts=view_counts)
    except (harness.HarnessError, ValueError) as exc:
        _fail_validation(str(exc))
    if out_path:
        with open(out_path, "wb") as fh:
            fh.write(report.to_csv())
    click.echo(report.summary_table("variant", ["center_error"]))
    click.echo(yaml.safe_dump(summary, sort_keys=True).strip())


@main.command()
@click.argument("session_dir", type=click.Path(exists=True))
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(session_dir, port, host):
    """Serve a reconstructed session over HTTP for interactive reposing."""
    import uvicorn

    from .service import create_app

    try:
        session = harness.Session.load(session_dir)
    except harness.HarnessError as exc:
        _fail_validation(str(exc))
    app = create_app(session)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
