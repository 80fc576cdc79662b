import json

from click.testing import CliRunner

from metaplan.cli import main


def test_run_and_compare_round_trip(tmp_path):
    runner = CliRunner()
    db = tmp_path / "demos.jsonl"
    seeded = runner.invoke(main, ["seed-db", "--db", str(db)])
    assert seeded.exit_code == 0, seeded.output
    assert "4 records" in seeded.output

    out_with = tmp_path / "with.json"
    out_without = tmp_path / "without.json"
    result = runner.invoke(
        main,
        ["run", "--trials", "2", "--icl", "on", "--seed", "1", "--db", str(db), "--out", str(out_with)],
    )
    assert result.exit_code == 0, result.output
    assert "overall" in result.output
    result = runner.invoke(
        main, ["run", "--trials", "2", "--icl", "off", "--seed", "1", "--out", str(out_without)]
    )
    assert result.exit_code == 0, result.output

    compare = runner.invoke(main, ["compare", str(out_without), str(out_with)])
    assert compare.exit_code == 0, compare.output
    assert "overall" in compare.output and "+75.0" in compare.output

    report = json.loads(out_with.read_text())
    assert report["schema"] == "report/1"
    assert report["overall"]["successes"] == 8


def test_run_rejects_missing_transcripts(tmp_path):
    runner = CliRunner()
    empty = tmp_path / "empty"
    empty.mkdir()
    result = runner.invoke(
        main, ["run", "--trials", "1", "--icl", "on", "--transcripts", str(empty)]
    )
    assert result.exit_code != 0
    assert "missing fixture" in result.output


def test_compare_rejects_mismatched_reports(tmp_path):
    runner = CliRunner()
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    runner.invoke(main, ["run", "--trials", "1", "--icl", "off", "--out", str(a)])
    runner.invoke(main, ["run", "--trials", "2", "--icl", "off", "--out", str(b)])
    result = runner.invoke(main, ["compare", str(a), str(b)])
    assert result.exit_code != 0


def test_db_compact_command(tmp_path):
    runner = CliRunner()
    db = tmp_path / "demos.jsonl"
    runner.invoke(main, ["seed-db", "--db", str(db)])
    result = runner.invoke(main, ["db", "compact", "--db", str(db)])
    assert result.exit_code == 0
    assert "4 records" in result.output


def test_dump_world_writes_png(tmp_path):
    runner = CliRunner()
    out = tmp_path / "world.png"
    result = runner.invoke(main, ["dump-world", "--task", "make_coffee", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert out.exists() and out.stat().st_size > 1000
