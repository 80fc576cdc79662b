"""Command-line entry points for suites, comparisons, the store, and the service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .harness import (
    MismatchedSuites,
    MissingTranscript,
    SuiteReport,
    compare_icl,
    run_suite,
    seed_demo_db,
)
from .rag import DemoStore
from .world import MissingFixture, TASK_NAMES, dump_world_png, load_builtin_task, perturbed_world


@click.group()
def main():
    """Meta-action planning stack."""


def _parse_tasks(tasks: str) -> list[str]:
    return [t.strip() for t in tasks.split(",") if t.strip()]


@main.command()
@click.option("--tasks", default=",".join(TASK_NAMES), show_default=True, help="Comma-separated task names.")
@click.option("--trials", default=20, show_default=True, type=int)
@click.option("--icl", type=click.Choice(["on", "off"]), required=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--transcripts", type=click.Path(exists=True, file_okay=False), default=None, help="Transcript directory (defaults to the packaged set).")
@click.option("--scenes", type=click.Path(exists=True, file_okay=False), default=None, help="Scene fixture directory overriding the packaged tasks.")
@click.option("--db", type=click.Path(), default=None, help="Demonstration store file for retrieval.")
@click.option("--out", type=click.Path(), default=None, help="Write the report JSON here.")
@click.option("--log-dir", type=click.Path(), default=None, help="Write per-trial episode logs here.")
def run(tasks, trials, icl, seed, transcripts, scenes, db, out, log_dir):
    """Run a task suite and print the success table."""
    try:
        report = run_suite(
            _parse_tasks(tasks),
            trials,
            icl == "on",
            seed,
            transcripts_dir=transcripts,
            db_path=db,
            scenes_dir=scenes,
            log_dir=log_dir,
        )
    except (MissingTranscript, MissingFixture) as exc:
        raise click.ClickException(f"missing fixture: {exc}")
    if out:
        report.save(out)
    click.echo(report.render_text())


@main.command()
@click.argument("report_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("report_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(), default=None)
def compare(report_a, report_b, out):
    """Compare two suite reports (without-ICL first, with-ICL second)."""
    try:
        table = compare_icl(SuiteReport.load(report_a), SuiteReport.load(report_b))
    except MismatchedSuites as exc:
        raise click.ClickException(str(exc))
    if out:
        Path(out).write_text(json.dumps(table.to_dict(), indent=2) + "\n", encoding="utf-8")
    click.echo(table.render_text())


@main.group()
def db():
    """Demonstration store maintenance."""


@db.command()
@click.option("--db", "db_path", type=click.Path(exists=True, dir_okay=False), required=True)
def compact(db_path):
    """Fold amendments and rewrite the store file."""
    store = DemoStore(db_path)
    store.compact()
    click.echo(f"compacted {db_path}: {len(store)} records")


@main.command("seed-db")
@click.option("--db", "db_path", type=click.Path(), required=True)
@click.option("--tasks", default=",".join(TASK_NAMES), show_default=True)
@click.option("--transcripts", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--scenes", type=click.Path(exists=True, file_okay=False), default=None)
def seed_db(db_path, tasks, transcripts, scenes):
    """Bootstrap a demonstration store from the good transcripts."""
    store = seed_demo_db(db_path, _parse_tasks(tasks), transcripts, scenes)
    click.echo(f"seeded {db_path}: {len(store)} records")


@main.command()
@click.option("--db", "db_path", type=click.Path(), required=True)
@click.option("--transcripts", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--scenes", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--quorum", default=1, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8234, show_default=True, type=int)
def serve(db_path, transcripts, scenes, quorum, host, port):
    """Serve the annotation API."""
    import uvicorn

    from .harness import default_transcript_dir
    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        db_path=db_path,
        transcripts_dir=transcripts or default_transcript_dir(),
        scenes_dir=scenes,
        quorum=quorum,
    )
    uvicorn.run(create_app(config), host=host, port=port)


@main.command("dump-world")
@click.option("--task", type=click.Choice(TASK_NAMES), required=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", type=click.Path(), required=True)
def dump_world(task, seed, out):
    """Write a top-down AABB debug plot of a task's (perturbed) world."""
    spec = load_builtin_task(task)
    dump_world_png(perturbed_world(spec, seed), out)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    sys.exit(main())
