import csv
import json

import numpy as np
import pytest

from monpg import cli
from monpg.cli import EXIT_FAILURE, EXIT_MAX_ITER, EXIT_OK, EXIT_USAGE, main


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# monpg ") and "config_sha256=" in lines[0] and "seed=" in lines[0]
    return list(csv.reader(lines[1:]))


def _profile(path):
    rows = _rows(path)
    return rows[0], np.array(rows[1:], dtype=float)


def _config(tmp_path, solvers, problems, n_starts=4, seed=5, **extra):
    data = {"problems": problems, "solvers": solvers, "n_starts": n_starts, "seed": seed, **extra}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(data, indent=1))
    return str(path)


def test_solve_reference_start(tmp_path, capsys):
    assert main(["solve", "P1", "--x0", "3.7990,1.8743", "--output-dir", str(tmp_path)]) == EXIT_OK
    data = json.loads((tmp_path / "solve_P1_monpg.json").read_text())
    np.testing.assert_allclose(data["x"], [3.0, 3.0], atol=1e-2)
    assert data["provenance"]["config_sha256"]
    assert len(capsys.readouterr().out.strip().splitlines()) == 1


def test_solve_at_critical_point(tmp_path):
    assert main(["solve", "P1", "--x0", "3,3", "--output-dir", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "solve_P1_monpg.json").read_text())["counters"]["n_it"] == 0


def test_solve_exit_codes(tmp_path):
    out = ["--output-dir", str(tmp_path)]
    assert main(["solve", "nope", "--x0", "1,1"] + out) == EXIT_USAGE
    assert main(["solve", "P1", "--x0", "1"] + out) == EXIT_USAGE
    assert main(["solve", "P1", "--x0", "3.7990,1.8743", "--max-iter", "1"] + out) == EXIT_MAX_ITER
    assert main(["solve", "P1", "--x0", "3.7990,1.8743", "--subproblem-tol", "1e-30"] + out) == EXIT_FAILURE
    assert main(["solve", "P1", "--x0", "1,1", "--solver", "ws"] + out) == EXIT_USAGE
    assert main(["solve", "P1", "--x0", "1,1", "--solver", "ws", "--weights", "0.5,0.5"] + out) == EXIT_OK
    assert main(["bogus"]) == EXIT_USAGE


def test_solve_problem_file(tmp_path):
    prob = {"name": "line", "n": 1, "m": 2, "lb": [-2], "ub": [2],
            "objectives": [{"smooth": {"kind": "quadratic", "A": [[1.0]], "b": [1.0]}, "sigma": 1.0},
                           {"smooth": {"kind": "quadratic", "A": [[1.0]], "b": [-1.0]}, "sigma": 1.0}]}
    path = tmp_path / "line.json"
    path.write_text(json.dumps(prob))
    assert main(["solve", str(path), "--x0", "1.7", "--output-dir", str(tmp_path)]) == EXIT_OK
    assert main(["solve", str(tmp_path / "missing.json"), "--x0", "1"]) == EXIT_USAGE


def test_seed_is_required():
    assert main(["pareto", "P1"]) == EXIT_USAGE


def test_pareto_byte_identical_across_runs_and_jobs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["pareto", "P1", "--seed", "7", "--n-starts", "8"]
    assert main(base + ["--jobs", "1", "--output-dir", str(a)]) == EXIT_OK
    assert main(base + ["--jobs", "3", "--output-dir", str(b)]) == EXIT_OK
    for name in ("front_P1_monpg.csv", "runs_P1_monpg.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert _rows(a / "front_P1_monpg.csv")[0] == ["x1", "x2", "F1", "F2"]


def test_pareto_ws_weight_grid(tmp_path):
    assert main(["pareto", "P1", "--solver", "ws", "--seed", "1", "--n-starts", "6", "--jobs", "1",
                 "--output-dir", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "runs_P1_ws.csv")
    assert len(rows) == 7


def test_pareto_all_fail_exit3(tmp_path):
    assert main(["pareto", "P1", "--seed", "1", "--n-starts", "2", "--jobs", "1", "--subproblem-tol", "1e-30",
                 "--output-dir", str(tmp_path)]) == EXIT_FAILURE


def test_output_dir_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["pareto", "H1", "--seed", "2", "--n-starts", "3", "--jobs", "1"]) == EXIT_OK
    assert (tmp_path / "env" / "front_H1_monpg.csv").exists()
    # an explicit flag wins over the environment
    assert main(["pareto", "H1", "--seed", "2", "--n-starts", "3", "--jobs", "1",
                 "--output-dir", str(tmp_path / "flag")]) == EXIT_OK
    assert (tmp_path / "flag" / "front_H1_monpg.csv").exists()


def test_compare_identical_solvers_profile_is_one(tmp_path):
    cfg = _config(tmp_path, [{"name": "a", "method": "monpg"}, {"name": "b", "method": "monpg"}],
                  ["P1", "H1"], hv_samples=2000)
    out = tmp_path / "out"
    assert main(["compare", cfg, "--seed", "5", "--jobs", "1", "--output-dir", str(out)]) == EXIT_OK
    for metric in ("delta", "hv", "iterations", "fevals"):
        cols, data = _profile(out / f"profile_{metric}_a_vs_b.csv")
        assert cols == ["tau", "rho_a", "rho_b"]
        assert np.all(data[data[:, 0] >= 1, 1:] == 1.0)
    assert {r[0] for r in _rows(out / "reference.csv")[1:]} == {"P1", "H1"}


def test_compare_needs_two_solvers(tmp_path):
    cfg = _config(tmp_path, [{"method": "monpg"}], ["P1"])
    assert main(["compare", cfg, "--seed", "1"]) == EXIT_USAGE


def test_compare_schema_error_exit64(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n "problems": ["P1"],\n "solvers": [{"method": "newton"}]\n}')
    assert main(["compare", str(path), "--seed", "1"]) == EXIT_USAGE
    assert f"{path}:3:" in capsys.readouterr().err


def test_monpg_beats_mopg_on_synthetic_quadratics(tmp_path):
    problems = [f"SQ_n2_m2_s{k}" for k in range(5)]
    cfg = _config(tmp_path, [{"name": "monpg", "method": "monpg"}, {"name": "mopg", "method": "mopg"}],
                  problems, n_starts=20, hv_samples=2000)
    out = tmp_path / "out"
    assert main(["compare", cfg, "--seed", "11", "--jobs", "1", "--output-dir", str(out)]) == EXIT_OK
    cols, data = _profile(out / "profile_iterations_monpg_vs_mopg.csv")
    assert cols == ["tau", "rho_monpg", "rho_mopg"]
    at_one = data[data[:, 0] == 1.0][0]
    assert at_one[1] >= at_one[2]


def test_compare_and_profile_deterministic(tmp_path):
    cfg = _config(tmp_path, [{"name": "monpg", "method": "monpg"}, {"name": "ws", "method": "ws"}],
                  ["H1"], n_starts=4, hv_samples=1000)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["compare", cfg, "--seed", "4", "--jobs", "1", "--output-dir", str(a)]) == EXIT_OK
    assert main(["profile", cfg, "--seed", "4", "--jobs", "2", "--output-dir", str(b)]) == EXIT_OK
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert main(["profile", "--from-metrics", str(a / "metrics.csv"), "--seed", "4",
                 "--output-dir", str(c)]) == EXIT_OK
    for path in c.iterdir():
        assert path.read_bytes() == (a / path.name).read_bytes()
    assert main(["profile", "--from-metrics", str(a / "metrics.csv"), "--seed", "5",
                 "--output-dir", str(c)]) == EXIT_USAGE


def test_list_problems(capsys):
    assert main(["list-problems"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("P1\tm=2\tn=2")


@pytest.mark.parametrize("argv", [["pareto", "P1", "--seed", "1", "--jobs", "0"],
                                  ["pareto", "P1", "--seed", "1", "--n-starts", "0"]])
def test_positive_counts(argv):
    assert main(argv) == EXIT_USAGE
