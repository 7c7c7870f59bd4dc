import json
import sqlite3

import pytest

from creepdb.cli import EXIT_FATAL, EXIT_OK, EXIT_USAGE, main


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    """Fixture corpus + one pipeline run shared by the CLI tests."""
    from creepdb import fixtures

    root = tmp_path_factory.mktemp("cli")
    paths = fixtures.write_corpus(root / "fx")
    db = root / "out.db"
    code = main(
        [
            "run",
            "--corpus",
            str(paths["manifest"]),
            "--backend",
            f"scripted:{paths['replies']}",
            "--db",
            str(db),
        ]
    )
    assert code == EXIT_OK
    return {"paths": paths, "db": db, "root": root}


def test_unknown_subcommand_is_usage_error():
    assert main(["frobnicate"]) == EXIT_USAGE


def test_unknown_flag_is_usage_error(cli_env):
    assert main(["stats", "--db", str(cli_env["db"]), "--bogus"]) == EXIT_USAGE


def test_ingest(cli_env, capsys):
    code = main(["ingest", "--corpus", str(cli_env["paths"]["manifest"])])
    assert code == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["bundles"] == 6


def test_ingest_missing_manifest_fatal(tmp_path):
    assert main(["ingest", "--corpus", str(tmp_path / "nope.jsonl")]) == EXIT_FATAL


def test_run_report_printed(cli_env, tmp_path, capsys):
    code = main(
        [
            "run",
            "--corpus",
            str(cli_env["paths"]["manifest"]),
            "--backend",
            f"scripted:{cli_env['paths']['replies']}",
            "--db",
            str(tmp_path / "r.db"),
        ]
    )
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["counts"]["stored"] == 4
    assert report["counts"]["screened_pass"] == 5


def test_search(cli_env, capsys):
    code = main(
        [
            "search",
            "--corpus",
            str(cli_env["paths"]["manifest"]),
            "--query",
            "creep",
            "--backend",
            f"scripted:{cli_env['paths']['replies']}",
        ]
    )
    assert code == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["ids"] == ["d001", "d002", "d003", "d004", "d005"]


def test_screen_and_eval(cli_env, tmp_path, capsys):
    decisions = tmp_path / "d.csv"
    code = main(
        [
            "screen",
            "--corpus",
            str(cli_env["paths"]["manifest"]),
            "--backend",
            f"scripted:{cli_env['paths']['replies']}",
            "--out",
            str(decisions),
        ]
    )
    assert code == EXIT_OK
    code = main(
        ["eval", "--decisions", str(decisions), "--truth", str(cli_env["paths"]["truth"]), "--json"]
    )
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["confusion"] == {"tp": 5, "fp": 0, "tn": 1, "fn": 0}
    assert payload["metrics"]["precision"] == 1.0
    assert payload["metrics"]["f1"] == 1.0


def test_validate_prints_verdicts(cli_env, capsys):
    code = main(
        [
            "validate",
            "--corpus",
            str(cli_env["paths"]["manifest"]),
            "--backend",
            f"scripted:{cli_env['paths']['replies']}",
        ]
    )
    assert code == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["d001"]["verdict"] == "Valid"
    assert out["d004"]["verdict"] == "Flagged"


def test_extract_writes_curves(cli_env, tmp_path, capsys):
    out_dir = tmp_path / "traces"
    code = main(
        [
            "extract",
            "--corpus",
            str(cli_env["paths"]["manifest"]),
            "--backend",
            f"scripted:{cli_env['paths']['replies']}",
            "--bundle",
            "d001",
            "--out",
            str(out_dir),
        ]
    )
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["d001"]["curve_points"] > 100
    assert (out_dir / "d001_curve.csv").exists()


def test_export_csv_and_curves(cli_env, tmp_path):
    out = tmp_path / "e.csv"
    curves = tmp_path / "curves"
    code = main(
        ["export", "--db", str(cli_env["db"]), "--out", str(out), "--curves", str(curves)]
    )
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("record_id,doi,material")
    assert len(lines) == 6  # header + 5 records (4 valid + 1 flagged)
    assert len(list(curves.glob("record_*_curve.csv"))) == 5


def test_export_data_format(cli_env, tmp_path):
    out = tmp_path / "e.json"
    code = main(["export", "--db", str(cli_env["db"]), "--format", "data", "--out", str(out)])
    assert code == EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["schema_version"] == 1
    assert len(payload["records"]) == 5


def test_export_filters(cli_env, tmp_path):
    out = tmp_path / "f.csv"
    code = main(
        [
            "export",
            "--db",
            str(cli_env["db"]),
            "--out",
            str(out),
            "--category",
            "steel_iron",
            "--t-min-k",
            "870",
            "--t-max-k",
            "880",
        ]
    )
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert "X46Cr13" in lines[1]


def test_stats_output(cli_env, capsys):
    code = main(["stats", "--db", str(cli_env["db"]), "--json"])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["n_records"] == 5
    assert payload["category_shares"]["steel_iron"] == pytest.approx(0.2)


def test_strict_run_flags_doc_failures(cli_env, tmp_path):
    # break one scripted reply, then demand --strict
    script = json.loads(cli_env["paths"]["replies"].read_text())
    script["screening"]["d003"] = {"_fail": "offline"}
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(script))
    code = main(
        [
            "run",
            "--corpus",
            str(cli_env["paths"]["manifest"]),
            "--backend",
            f"scripted:{broken}",
            "--db",
            str(tmp_path / "s.db"),
            "--strict",
        ]
    )
    assert code == 1


def test_db_file_is_sqlite(cli_env):
    with sqlite3.connect(cli_env["db"]) as conn:
        tables = {r[0] for r in conn.execute("SELECT name FROM sqlite_master WHERE type='table'")}
    assert {"papers", "records", "audit"} <= tables
