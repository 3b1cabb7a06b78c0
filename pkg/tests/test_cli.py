import csv
import io
import subprocess
import sys

import pytest

from adasub.cli import ExperimentConfig, main, render, run_experiment


def run(*args, capsys=None):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_config_defaults():
    cfg = ExperimentConfig("evaluate")
    assert (cfg.seed, cfg.samples, cfg.tolerance) == (42, 100000, 1e-9)


def test_certify_cut_edge(capsys):
    code, out, _ = run("certify", "--instance", "graph_cut_edge.toy", "--policy", "arg", capsys=capsys)
    assert code == 0
    (row,) = rows(out)
    assert row["pass"] == "true" and row["achieved_ratio"] == "1.0"
    assert row["m"] == "0.0" and row["wall_time_ms"] == ""


def test_certify_failure_exit_code(capsys):
    code, out, _ = run("certify", "-i", "graph_cut_edge", "-p", "sad", "--tolerance", "-1", capsys=capsys)
    assert code == 1
    assert rows(out)[0]["pass"] == "false"


def test_bound(capsys):
    assert run("bound", "--m", "0.5", "--constraint", "cardinality", capsys=capsys)[1] == "0.5\n"
    assert run("bound", "--m", "0", "--constraint", "knapsack", capsys=capsys)[1] == "0.1\n"


def test_evaluate_mc(capsys):
    code, out, _ = run("evaluate", "-i", "graph_cut_edge", "--policy", "sad", "--samples", "100000",
                       "--seed", "7", capsys=capsys)
    (row,) = rows(out)
    assert code == 0 and row["method"] == "monte-carlo" and row["seed"] == "7"
    assert abs(float(row["policy_value"]) - 0.8) <= 4 * float(row["std_error"])


def test_evaluate_exact_by_default(capsys):
    (row,) = rows(run("evaluate", "-i", "graph_cut_edge", "-p", "sad", capsys=capsys)[1])
    assert row["method"] == "exact" and row["policy_value"] == "0.8"


def test_check_ratio_opt(capsys):
    check = rows(run("check", "-i", "graph_cut_edge", capsys=capsys)[1])
    assert [r["pass"] for r in check] == ["true", "false"]
    assert check[1]["witness"] == "D(b|{a:1})=-1 < 0"
    ratio = rows(run("ratio", "-i", "graph_cut_edge", capsys=capsys)[1])
    assert ratio[0]["m"] == "0.0" and (ratio[0]["policy"], ratio[0]["continuation"]) == ("a", "b")
    (opt,) = rows(run("opt", "-i", "graph_cut_edge", capsys=capsys)[1])
    assert opt["opt_value"] == "1.0"


def test_run_trajectory(capsys):
    (row,) = rows(run("run", "-i", "graph_cut_edge", "-p", "arg", "--realization", "a=1,b=0", capsys=capsys)[1])
    assert row["realization"] == "a=1;b=0"
    assert row["utility"] == "1.0"
    assert row["final_set"] in ("a", "b")
    assert row["actions"].endswith(";noop")
    (row,) = rows(run("run", "-i", "knap_modular_4", "-p", "dg", "--sample-set", "a,b", capsys=capsys)[1])
    assert set(row["final_set"].split(";")) <= {"a", "b", ""}


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toy"
    bad.write_text("[items]\na 1\n[states]\n1 0\n[prior]\nindependent\na 1:0.5 0:0.4\n"
                   "[utility]\nmodular weights=a:1\n[constraint]\ncardinality 1\n")
    code, out, err = run("check", "-i", str(bad), capsys=capsys)
    assert code == 2 and out == ""
    assert err.startswith("error=parse-error ") and "line 7" in err
    assert len(err.strip().splitlines()) == 1


def test_usage_errors(capsys):
    assert run("certify", "-i", "missing_file", capsys=capsys)[0] == 2
    assert run("frobnicate", capsys=capsys)[0] == 2
    assert run("certify", "-i", "knap_cut_4", "-p", "arg", capsys=capsys)[0] == 2


def test_guard_exit_code(capsys):
    code, _, err = run("evaluate", "-i", "blend_4_k3", "--exact", "--node-limit", "5", capsys=capsys)
    assert code == 3 and "error=oracle-guard-exceeded" in err
    assert run("ratio", "-i", "blend_4_k3", "--tree-limit", "100", capsys=capsys)[0] == 3


def test_output_file(tmp_path, capsys):
    target = tmp_path / "out.csv"
    assert run("opt", "-i", "graph_cut_edge", "-o", str(target), capsys=capsys)[1] == ""
    assert target.read_text().startswith("instance_id,constraint")


def test_bench_rows_sorted_and_passing():
    out = run_experiment(ExperimentConfig("bench", jobs=1))
    assert out.exit_code == 0
    keys = [(r[0], r[1]) for r in out.rows]
    assert keys == sorted(keys)
    assert {r[1] for r in out.rows if r[2] == "cardinality"} == {"arg"}
    assert render(out) == render(run_experiment(ExperimentConfig("bench", jobs=2)))


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "adasub", "bound", "--m", "1"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout == "0.632120558829\n"
