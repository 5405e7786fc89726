import json
import subprocess
import sys

import numpy as np
import pytest

from qvfdag import io as qio
from qvfdag.cli import main
from qvfdag.dag import Dag
from qvfdag.families import poisson, sample_dataset
from qvfdag.pipeline import trial_rng

from conftest import two_node


@pytest.fixture
def poisson_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"p": 10, "n": 1000, "num_parents": 2, "family": "poisson",
                                "theta_range": [-1, -0.5]}))
    return path


class TestGenerate:
    def test_files_and_summary(self, tmp_path, poisson_config, capsys):
        out = tmp_path / "run"
        assert main(["generate", "--config", str(poisson_config), "--out", str(out),
                     "--seed", "7"]) == 0
        data = (tmp_path / "run_data.csv").read_text().splitlines()
        assert len(data) == 1001
        assert capsys.readouterr().out.strip() == "p=10 n=1000 edges=17 seed=7"

    def test_byte_identical(self, tmp_path, poisson_config):
        for name in ("a", "b"):
            main(["generate", "--config", str(poisson_config),
                  "--out", str(tmp_path / name), "--seed", "7"])
        for suffix in ("_data.csv", "_dag.txt"):
            assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()

    def test_two_parents_each(self, tmp_path, poisson_config):
        main(["generate", "--config", str(poisson_config), "--out", str(tmp_path / "g"),
              "--seed", "7"])
        edges, p, _ = qio.read_edges(tmp_path / "g_dag.txt")
        assert p == 10
        for j in range(2, 10):
            assert sum(1 for _, b in edges if b == j) == 2

    def test_seed_drawn_and_reported(self, tmp_path, poisson_config, capsys):
        assert main(["generate", "--config", str(poisson_config),
                     "--out", str(tmp_path / "r")]) == 0
        err = capsys.readouterr().err
        assert err.startswith("seed: ")

    def test_config_seed_used(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"p": 3, "n": 5, "seed": 11}))
        main(["generate", "--config", str(cfg), "--out", str(tmp_path / "s")])
        assert "seed=11" in capsys.readouterr().out

    @pytest.mark.parametrize("doc,msg", [('{"p": 3}', "p and n"), ("{bad json", "invalid JSON"),
                                         ('{"p": 3, "n": 5, "c0": 2}', "invalid config")])
    def test_bad_config(self, tmp_path, capsys, doc, msg):
        cfg = tmp_path / "c.json"
        cfg.write_text(doc)
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
        assert msg in capsys.readouterr().err

    def test_missing_config(self, tmp_path, capsys):
        assert main(["generate", "--config", str(tmp_path / "none.json"),
                     "--out", str(tmp_path / "x")]) == 2


class TestLearn:
    def test_two_node_ordering(self, tmp_path):
        X = sample_dataset(two_node(-0.8), poisson(), 50_000, trial_rng(2024, 0))
        qio.write_count_matrix(tmp_path / "d.csv", X)
        assert main(["learn", "--data", str(tmp_path / "d.csv"),
                     "--out", str(tmp_path / "est")]) == 0
        assert (tmp_path / "est_ordering.txt").read_text() == "0 1\n"
        assert qio.read_edges(tmp_path / "est_edges.txt")[0] == [(0, 1)]
        moral, _, undirected = qio.read_edges(tmp_path / "est_moral.txt")
        assert undirected and moral == [frozenset((0, 1))]
        report = json.loads((tmp_path / "est_report.json").read_text())
        assert report["ordering"] == [0, 1] and "scores" not in report

    def test_verbose_report(self, tmp_path):
        X = sample_dataset(Dag.from_edges(3, [(0, 1), (1, 2)], weight=-0.8), poisson(), 2000,
                           trial_rng(1, 0))
        qio.write_count_matrix(tmp_path / "d.csv", X)
        for argv in (["--verbose", "learn"], ["learn", "--verbose"]):
            assert main(argv + ["--data", str(tmp_path / "d.csv"),
                                "--out", str(tmp_path / "v")]) == 0
            report = json.loads((tmp_path / "v_report.json").read_text())
            assert len(report["scores"]) == 2

    def test_malformed_row(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1\n1,2\n3,4\n5,oops\n")
        assert main(["learn", "--data", str(path), "--out", str(tmp_path / "o")]) == 2
        assert "row 3" in capsys.readouterr().err

    def test_single_node(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("x0\n1\n0\n2\n1\n")
        assert main(["learn", "--data", str(path), "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o_ordering.txt").read_text() == "0\n"
        assert qio.read_edges(tmp_path / "o_edges.txt")[0] == []

    def test_missing_data(self, tmp_path):
        assert main(["learn", "--data", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_config_applies(self, tmp_path):
        X = sample_dataset(two_node(-0.8), poisson(), 3000, trial_rng(3, 0))
        qio.write_count_matrix(tmp_path / "d.csv", X)
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"lambda": 100.0}))
        main(["learn", "--data", str(tmp_path / "d.csv"), "--config", str(cfg),
              "--out", str(tmp_path / "o")])
        report = json.loads((tmp_path / "o_report.json").read_text())
        assert report["lambda"] == 100.0 and report["edges"] == []


def _evaluate(capsys, *argv):
    code = main(["evaluate", *argv])
    return code, (json.loads(capsys.readouterr().out) if code == 0 else None)


class TestEvaluate:
    def test_identical(self, tmp_path, capsys):
        qio.write_edges(tmp_path / "t.txt", [(0, 1), (1, 2)], 3)
        code, m = _evaluate(capsys, "--est", str(tmp_path / "t.txt"),
                            "--truth", str(tmp_path / "t.txt"))
        assert code == 0
        assert m["skeleton_hamming_norm"] == 0 and m["directed_hamming_norm"] == 0
        assert m["ordering_consistent"] is None

    def test_empty_estimate(self, tmp_path, capsys):
        qio.write_edges(tmp_path / "t.txt", [(0, 1), (1, 2)], 3)
        qio.write_edges(tmp_path / "e.txt", [], 3)
        _, m = _evaluate(capsys, "--est", str(tmp_path / "e.txt"),
                         "--truth", str(tmp_path / "t.txt"))
        assert m["skeleton_hamming_norm"] == pytest.approx(2 / 3)
        assert m["directed_hamming_norm"] == pytest.approx(2 / 6)

    def test_reversed_edge(self, tmp_path, capsys):
        qio.write_edges(tmp_path / "t.txt", [(0, 1), (1, 2)], 3)
        qio.write_edges(tmp_path / "e.txt", [(1, 0), (1, 2)], 3)
        qio.write_ordering(tmp_path / "o.txt", (1, 0, 2))
        _, m = _evaluate(capsys, "--est", str(tmp_path / "e.txt"),
                         "--truth", str(tmp_path / "t.txt"), "--ordering", str(tmp_path / "o.txt"))
        assert m["skeleton_hamming_norm"] == 0
        assert m["directed_hamming_norm"] == pytest.approx(2 / 6)
        assert m["ordering_consistent"] is False

    def test_inconsistent_p(self, tmp_path, capsys):
        qio.write_edges(tmp_path / "t.txt", [(0, 1)], 3)
        qio.write_edges(tmp_path / "e.txt", [(0, 1)], 4)
        code, _ = _evaluate(capsys, "--est", str(tmp_path / "e.txt"),
                            "--truth", str(tmp_path / "t.txt"))
        assert code == 2

    def test_p_from_flag(self, tmp_path, capsys):
        (tmp_path / "t.txt").write_text("0 1\n")
        code, m = _evaluate(capsys, "--est", str(tmp_path / "t.txt"),
                            "--truth", str(tmp_path / "t.txt"), "--p", "4")
        assert code == 0
        code, _ = _evaluate(capsys, "--est", str(tmp_path / "t.txt"),
                            "--truth", str(tmp_path / "t.txt"))
        assert code == 2


class TestBenchmark:
    def _grid(self, tmp_path, **extra):
        path = tmp_path / "grid.json"
        path.write_text(json.dumps({"p": 5, "n": 300, "trials": 2, "seed": 4, **extra}))
        return path

    def test_rows_and_summary(self, tmp_path, capsys):
        grid = self._grid(tmp_path)
        assert main(["benchmark", "--config", str(grid), "--out", str(tmp_path / "r.csv"),
                     "--summary", str(tmp_path / "s.csv")]) == 0
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert len(lines) == 3 and lines[0].startswith("family,p,n,num_parents,trial")
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 1 and out[0].startswith("poisson p=5 n=300 trials=2")
        assert len((tmp_path / "s.csv").read_text().splitlines()) == 2

    def test_rerun_identical(self, tmp_path):
        grid = self._grid(tmp_path)
        for name in ("a.csv", "b.csv"):
            main(["benchmark", "--config", str(grid), "--out", str(tmp_path / name),
                  "--no-timings"])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_overrides(self, tmp_path):
        grid = self._grid(tmp_path)
        main(["benchmark", "--config", str(grid), "--out", str(tmp_path / "r.csv"),
              "--trials", "3", "--seed", "9", "--no-timings"])
        assert len((tmp_path / "r.csv").read_text().splitlines()) == 4

    def test_failed_trials_logged_not_fatal(self, tmp_path, capsys, caplog):
        grid = self._grid(tmp_path, theta_range=[2.0, 3.0], intercept=1.0, p=8)
        assert main(["benchmark", "--config", str(grid), "--out", str(tmp_path / "r.csv")]) == 0
        assert "failed=2" in capsys.readouterr().out
        assert "DomainError" in caplog.text

    def test_grid_point_needs_sizes(self, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"base": {"p": 4}, "sweep": {"seed": [1]}}))
        assert main(["benchmark", "--config", str(path), "--out", str(tmp_path / "r.csv")]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "qvfdag", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "generate" in res.stdout
    res = subprocess.run([sys.executable, "-m", "qvfdag", "learn"], capture_output=True, text=True)
    assert res.returncode == 2


def test_trial_flag_changes_draw(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"p": 4, "n": 50}))
    main(["generate", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["generate", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "1",
          "--trial", "1"])
    a = np.loadtxt(tmp_path / "a_data.csv", delimiter=",", skiprows=1)
    b = np.loadtxt(tmp_path / "b_data.csv", delimiter=",", skiprows=1)
    assert not np.array_equal(a, b)
