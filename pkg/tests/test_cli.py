import json

import pytest

from permplace.cli import run

FIXED_ARGS = None  # populated per-test via helpers


@pytest.fixture(scope="module")
def paths(fixtures_dir):
    return {
        "threads": str(fixtures_dir / "threads.app.json"),
        "viewstub": str(fixtures_dir / "viewstub.app.json"),
        "framework": str(fixtures_dir / "framework.json"),
        "spec": str(fixtures_dir / "fixture.spec.json"),
        "groups": str(fixtures_dir / "groups.json"),
        "corpus": str(fixtures_dir / "corpus"),
        "ident": str(fixtures_dir / "ident_table.json"),
    }


def analyze_args(paths, app="threads", extra=()):
    return [
        "analyze",
        paths[app],
        "--spec",
        paths["spec"],
        "--framework",
        paths["framework"],
        *extra,
    ]


def test_analyze_exit_zero(paths, tmp_path, capsys):
    out = tmp_path / "report.json"
    assert run(analyze_args(paths, extra=["-o", str(out)])) == 0
    payload = json.loads(out.read_text())
    assert payload["app"] == "threads"
    assert payload["mode"] == "cfa1"
    assert [cb["method"] for cb in payload["callbacks"]] == ["app.Host#callback1()"]


def test_analyze_stdout_default(paths, capsys):
    assert run(analyze_args(paths)) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["summary"]["sensitivesDetected"] == 1


def test_analyze_cfa0(paths, tmp_path):
    out = tmp_path / "r.json"
    assert run(analyze_args(paths, extra=["--cfa", "0", "-o", str(out)])) == 0
    payload = json.loads(out.read_text())
    assert len(payload["callbacks"]) == 2


def test_analyze_text_format(paths, capsys):
    assert run(analyze_args(paths, extra=["--format", "text"])) == 0
    text = capsys.readouterr().out
    assert "insert request at stmt 3" in text


def test_analyze_deterministic(paths, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(analyze_args(paths, extra=["-o", str(a)])) == 0
    assert run(analyze_args(paths, extra=["-o", str(b)])) == 0
    assert a.read_bytes() == b.read_bytes()


def test_analyze_no_augment_changes_viewstub(paths, tmp_path):
    with_aug = tmp_path / "aug.json"
    without = tmp_path / "noaug.json"
    assert run(analyze_args(paths, app="viewstub", extra=["-o", str(with_aug)])) == 0
    assert (
        run(analyze_args(paths, app="viewstub", extra=["--no-augment", "-o", str(without)])) == 0
    )
    assert json.loads(with_aug.read_text())["summary"]["sensitivesDetected"] == 1
    assert json.loads(without.read_text())["summary"]["sensitivesDetected"] == 0


def test_analyze_dump_callgraph(paths, tmp_path):
    out = tmp_path / "r.json"
    cg = tmp_path / "cg.json"
    assert run(analyze_args(paths, extra=["-o", str(out), "--dump-callgraph", str(cg)])) == 0
    edges = json.loads(cg.read_text())
    assert any(e["provenance"] == "entry" for e in edges)
    assert all(set(e) == {"site", "target", "provenance"} for e in edges)


def test_bad_cfa_value_is_usage_error(paths, capsys):
    assert run(analyze_args(paths, extra=["--cfa", "2"])) == 2


def test_unknown_command_is_usage_error(capsys):
    assert run(["frobnicate"]) == 2


def test_missing_app_file_is_input_error(paths, capsys):
    assert run(analyze_args({**paths, "threads": "/no/such/file.json"})) == 1
    assert "error" in capsys.readouterr().err


def test_malformed_app_is_input_error(tmp_path, paths, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["analyze", str(bad), "--spec", paths["spec"]]) == 1


def test_dangerous_only_requires_groups(paths, capsys):
    assert run(analyze_args(paths, extra=["--dangerous-only"])) == 1


def test_collect(paths, tmp_path):
    out = tmp_path / "usage.csv"
    summary = tmp_path / "summary.json"
    code = run(
        [
            "collect",
            paths["corpus"],
            "--spec",
            paths["spec"],
            "--groups",
            paths["groups"],
            "--framework",
            paths["framework"],
            "-o",
            str(out),
            "--summary",
            str(summary),
        ]
    )
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "app,permission,label,group,sites"
    assert len(lines) == 7  # five apps, six (app, permission) rows
    data = json.loads(summary.read_text())
    assert data["apps"] == 5
    assert data["coverage"]["percent"] == 67


def test_collect_empty_dir_is_input_error(tmp_path, paths):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run(["collect", str(empty), "--spec", paths["spec"]]) == 1


def test_cha_reach(paths, tmp_path):
    out = tmp_path / "part.json"
    code = run(
        [
            "cha-reach",
            paths["viewstub"],
            "--spec",
            paths["spec"],
            "--framework",
            paths["framework"],
            "--no-augment",
            "-o",
            str(out),
        ]
    )
    assert code == 0
    part = json.loads(out.read_text())
    assert [s["site"] for s in part["cha_reachable_undetected"]] == [
        "app.MyView#callSensitive()/4"
    ]
    assert part["detected"] == []


def test_compare_specs(paths, tmp_path):
    out = tmp_path / "cmp.json"
    code = run(
        [
            "compare-specs",
            paths["corpus"],
            "--spec-a",
            paths["spec"],
            "--spec-b",
            paths["spec"],
            "--framework",
            paths["framework"],
            "--groups",
            paths["groups"],
            "-o",
            str(out),
        ]
    )
    assert code == 0
    result = json.loads(out.read_text())
    assert result["a"] == result["b"]
    assert result["diff"]["unique_to_a"] == []


def test_mine_doc(paths, tmp_path):
    out = tmp_path / "cands.csv"
    code = run(
        [
            "mine-doc",
            paths["framework"],
            "--ident-table",
            paths["ident"],
            "-o",
            str(out),
        ]
    )
    assert code == 0
    text = out.read_text()
    assert text.startswith("element,permission,unique,needs_expansion,snippet")
    assert "android.location.LocationManager#getLastKnownLocation" in text


def test_spec_validate_ok(paths, capsys):
    assert run(["spec", "validate", paths["spec"]]) == 0
    assert "7 entries, OK" in capsys.readouterr().err


def test_spec_validate_rejects_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.spec.json"
    bad.write_text(json.dumps([{"kind": "method", "key": "A#f()", "permissions": []}]))
    assert run(["spec", "validate", str(bad)]) == 1


def test_spec_merge(paths, tmp_path, capsys):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    out = tmp_path / "merged.json"
    a.write_text(
        json.dumps([{"kind": "method", "key": "A#f()", "permissions": ["android.permission.CAMERA"]}])
    )
    b.write_text(
        json.dumps([{"kind": "method", "key": "A#g()", "permissions": ["android.permission.CAMERA"]}])
    )
    assert run(["spec", "merge", str(a), str(b), "-o", str(out)]) == 0
    merged = json.loads(out.read_text())
    assert {e["key"] for e in merged} == {"A#f()", "A#g()"}


def test_spec_merge_conflict_is_input_error(tmp_path, capsys):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    a.write_text(
        json.dumps([{"kind": "method", "key": "A#f()", "permissions": ["android.permission.CAMERA"]}])
    )
    b.write_text(
        json.dumps(
            [{"kind": "method", "key": "A#f()", "permissions": ["android.permission.RECORD_AUDIO"]}]
        )
    )
    assert run(["spec", "merge", str(a), str(b)]) == 1


def test_console_script_installed():
    import shutil
    import subprocess

    exe = shutil.which("permplace")
    assert exe is not None
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "analyze" in proc.stdout
