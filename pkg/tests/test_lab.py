import csv
import json

import pytest

from fslab.cli import main
from fslab.lab import ConfigError, ExperimentConfig, build_config, run_experiment


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out), "--jobs", "1"])
    return code, out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_ap_check_rows(tmp_path):
    code, out = run(tmp_path, "ap-check")
    assert code == 0
    rows = read_rows(out)
    assert rows[0] == ["n", "kappa", "count", "bound", "slack", "pass"]
    assert rows[1] == ["16", "1/4", "109", "128", "0", "true"]
    assert [r[3] for r in rows[1:]] == ["128", "1024", "8192"]


def test_csv_uses_crlf_and_full_precision(tmp_path):
    code, out = run(tmp_path, "content", "--seed", "7", "--level", "8", "--set", "count=3")
    raw = out.read_bytes()
    assert raw.count(b"\r\n") == 4
    rows = read_rows(out)
    assert all(r[-1] == "true" for r in rows[1:])
    value = rows[1][3]
    assert float(value) == float("%.17g" % float(value))


def test_sidecar_metadata(tmp_path):
    code, out = run(tmp_path, "content", "--seed", "7", "--level", "8", "--set", "count=2")
    meta = json.loads((tmp_path / "out.csv.json").read_text())
    assert meta["config"]["seed"] == 7 and meta["config"]["kind"] == "content-duality"
    assert len(meta["config_hash"]) == 64
    assert {"fslab", "numpy", "scipy", "python"} <= set(meta["versions"])
    assert meta["wall_time_seconds"] >= 0 and meta["passed"] is True


@pytest.mark.parametrize("argv", [
    ["content", "--seed", "3", "--level", "9", "--set", "count=4"],
    ["branching", "--seed", "3", "--set", "contraction=2", "--set", "depth=4",
     "--set", "branches=3", "--set", "count=3"],
    ["inverse", "--seed", "3", "--level", "10", "--set", "count=3"],
    ["prop3", "--seed", "3", "--level", "8", "--set", "count=3"],
    ["scan", "--set", "depth=3", "--theta-level", "4"],
    ["dim", "--set", "depth=3"],
    ["gen", "--set", "generator=cantor", "--seed", "1", "--level", "5"],
])
def test_reruns_are_byte_identical(tmp_path, argv):
    code_a, a = run(tmp_path, *argv, name="a.csv")
    code_b = main([*argv, "--out", str(tmp_path / "b.csv"), "--jobs", "2"])
    assert code_a == code_b == 0
    assert a.read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_scan_table_shape(tmp_path):
    code, out = run(tmp_path, "scan", "--set", "depth=3", "--theta-level", "8")
    rows = read_rows(out)
    assert code == 0
    assert len(rows) == 1 + 256 + 1
    summary = rows[-1]
    assert summary[0] == "summary" and summary[-1] == "true"
    assert summary[rows[0].index("exceptional_content")] == "0"


def test_failed_bound_exits_with_two(tmp_path):
    code, out = run(tmp_path, "scan", "--set", "depth=2", "--theta-level", "3",
                    "--set", "median_floor=1.5")
    assert code == 2
    assert read_rows(out)[-1][-1] == "false"


def test_missing_seed_is_an_error(tmp_path, capsys):
    code, _ = run(tmp_path, "content")
    assert code == 1
    assert "'seed'" in capsys.readouterr().err


def test_unknown_key_and_bad_range(tmp_path, capsys):
    assert run(tmp_path, "ap-check", "--set", "bogus=1")[0] == 1
    assert "'bogus'" in capsys.readouterr().err
    assert run(tmp_path, "ap-check", "--level", "99")[0] == 1
    assert "'level'" in capsys.readouterr().err
    assert run(tmp_path, "ap-check", "--sigma", "-1")[0] == 1


def test_bad_flag_exits_with_one():
    with pytest.raises(SystemExit) as info:
        main(["ap-check", "--no-such-flag"])
    assert info.value.code == 1


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text('seed = 5\nlevel = 7\ncount = 2\nsurvival = 0.9\n')
    code, out = run(tmp_path, "content", "--config", str(cfg), "--level", "6")
    meta = json.loads((tmp_path / "out.csv.json").read_text())
    assert code == 0
    assert meta["config"]["level"] == 6 and meta["config"]["survival"] == 0.9
    assert len(read_rows(out)) == 3


def test_nested_config_rejected(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text('[table]\nseed = 1\n')
    assert run(tmp_path, "content", "--config", str(cfg))[0] == 1


def test_env_level_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("FSLAB_MAX_LEVEL", "6")
    assert run(tmp_path, "content", "--seed", "1", "--level", "8")[0] == 1


def test_build_config_names_the_field():
    with pytest.raises(ConfigError) as info:
        build_config({"kind": "content-duality", "seed": 1, "eta": "abc"})
    assert info.value.field_name == "eta"
    with pytest.raises(ConfigError):
        build_config({"kind": "nope"})


def test_config_hash_ignores_jobs_and_out():
    a = ExperimentConfig("ap-counterexample", jobs=1, out="x.csv")
    b = ExperimentConfig("ap-counterexample", jobs=8)
    assert a.digest() == b.digest()
    assert a.digest() != ExperimentConfig("ap-counterexample", n_values=(16,)).digest()


def test_run_experiment_to_stdout(capsys):
    table = run_experiment(ExperimentConfig("ap-counterexample", n_values=(16,)))
    assert table.passed
    assert capsys.readouterr().out.startswith("n,kappa,count")


def test_dimension_table_slope(tmp_path):
    code, out = run(tmp_path, "dim", "--set", "branches=2", "--set", "contraction=1",
                    "--set", "depth=8")
    assert code == 0
    assert float(read_rows(out)[-1][-1]) == pytest.approx(1.0)
