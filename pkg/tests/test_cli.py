import json
import subprocess
import sys

import pytest

from sparselab import calibration
from sparselab.cli import (
    EXIT_FAIL,
    EXIT_PASS,
    EXIT_USAGE,
    SCHEMA,
    UsageError,
    build_config,
    main,
    rows_to_csv,
)


def out_args(path):
    return ["--set", f"out={path}"]


def test_grid_check_passes_and_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["grid-check", "--trials", "200"]
    assert main(args + out_args(a)) == EXIT_PASS
    assert main(args + out_args(b)) == EXIT_PASS
    ca = (a / "grid-check.csv").read_bytes()
    assert ca == (b / "grid-check.csv").read_bytes()
    ja, jb = (json.loads((p / "grid-check.json").read_text()) for p in (a, b))
    assert ja["config"].pop("out") != jb["config"].pop("out")
    assert ja == jb
    cfg = build_config("grid-check", {"trials": "200"})
    text = ca.decode()
    assert f"# config_hash={cfg.hash}" in text
    assert f"# calibration_version={calibration.version()}" in text
    doc = json.loads((a / "grid-check.json").read_text())
    assert doc["pass"] and doc["summary"]["failures"] == 0


def test_weights_reports_oracle_gap(tmp_path):
    # the dyadic characteristic undershoots the interval oracle for strong weights
    rc = main(["weights", "--n", "1024", "--deltas", "0.5,0.75"] + out_args(tmp_path))
    assert rc == EXIT_FAIL
    doc = json.loads((tmp_path / "weights.json").read_text())
    assert doc["failing"] and all(r["ap"] <= r["oracle_ap"] for r in doc["rows"])


def test_sparse_small(tmp_path):
    rc = main(["sparse", "--n", "1024", "--trials", "2", "--refine", "false"]
              + out_args(tmp_path))
    assert rc == EXIT_PASS


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["weights", "--not_a_key", "1"],
    ["weights", "--n", "abc"],
    ["weights", "--d", "3"],
    ["sparse", "--kernel", "beurling:1", "--d", "2"],
    ["decompose", "--kernel", "smooth-dini:hilbert"],
    ["weights", "--set", "novalue"],
    ["weights", "--n"],
])
def test_usage_errors(argv, tmp_path, capsys):
    assert main(argv + out_args(tmp_path)) == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err
    assert not (tmp_path / "weights.csv").exists()


def test_config_file_and_override_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("trials=50\ndims=1\n")
    out = tmp_path / "o"
    assert main(["grid-check", "--config", str(cfg_file), "--trials", "60"]
                + out_args(out)) == EXIT_PASS
    doc = json.loads((out / "grid-check.json").read_text())
    assert doc["config"]["trials"] == 60 and doc["config"]["dims"] == [1]


def test_hash_ignores_output_dir_but_not_values():
    a = build_config("weights", {"out": "x"})
    b = build_config("weights", {"out": "y"})
    c = build_config("weights", {"n": "2048"})
    assert a.hash == b.hash != c.hash
    with pytest.raises(UsageError):
        build_config("nope", {})


def test_schema_entries_are_documented():
    for key, (parser, _default, doc) in SCHEMA.items():
        assert callable(parser) and doc


def test_rows_to_csv_union_of_columns():
    text = rows_to_csv([{"a": 1, "b": True}, {"a": 0.5, "c": "x"}], ["h=1"])
    assert text.splitlines() == ["# h=1", "a,b,c", "1,1,", "0.5,,x"]


def test_help(capsys):
    assert main(["--help"]) == EXIT_PASS
    assert "grid-check" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "sparselab", "grid-check", "--trials", "20",
                        "--dims", "1", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == EXIT_PASS, r.stderr
    assert "PASS" in r.stdout
