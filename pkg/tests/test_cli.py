import csv
import io
import json

import numpy as np
import pytest

from vecbal.cli import Instance, UsageError, main, run_experiment
from vecbal.core import VectorSequence


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc, encoding="utf-8")
    return str(p)


PATH_DOC = {"d": 1, "norm_class": "unit_ball", "vectors": [[1.0], [1.0], [1.0]], "structure": {"kind": "path"}}


class TestInstanceFile:
    @pytest.mark.parametrize("structure", [
        {"kind": "path"},
        {"kind": "tree", "parent": [None, 0, 0]},
        {"kind": "dag", "root": 0, "edges": [[0, 1], [0, 2], [1, 2]]},
        {"kind": "sets", "sets": [[0, 1], [2]]},
    ])
    def test_round_trip(self, structure):
        inst = Instance(VectorSequence(np.random.default_rng(0).uniform(-0.5, 0.5, (3, 2))), structure)
        assert Instance.from_json(inst.to_json()) == inst

    @pytest.mark.parametrize("text", [
        "not json",
        json.dumps({"d": 1, "vectors": [[1.0]]}),
        json.dumps({"d": 1, "vectors": [[2.0]], "structure": {"kind": "path"}}),
        json.dumps({"d": 1, "vectors": [[1.0], [1.0]], "structure": {"kind": "tree", "parent": [None]}}),
        json.dumps({"d": 1, "vectors": [[1.0]], "structure": {"kind": "mesh"}}),
        json.dumps({"d": 1, "vectors": [[1.0], [1.0]], "structure": {"kind": "dag", "root": 0, "edges": [[0, 1], [1, 0]]}}),
    ])
    def test_invalid(self, text):
        with pytest.raises(UsageError):
            Instance.from_json(text)


class TestSolve:
    def test_exact_path(self, tmp_path, capsys):
        code, out, _ = run(capsys, "solve", write(tmp_path, "p.json", PATH_DOC))
        rep = json.loads(out)
        assert code == 0 and rep["value"] == 1 and rep["exact"] and "witness" in rep

    def test_dag_solver_reports_bound(self, tmp_path, capsys):
        doc = {"d": 1, "vectors": [[1.0]] * 4,
               "structure": {"kind": "dag", "root": 0, "edges": [[0, 1], [0, 2], [1, 3], [2, 3]]}}
        code, out, _ = run(capsys, "solve", write(tmp_path, "g.json", doc), "--solver", "dag")
        rep = json.loads(out)
        assert code == 0 and rep["value"] <= rep["extra"]["bound"] + 1e-9

    def test_oversized_exact_is_usage_error(self, tmp_path, capsys):
        doc = {"d": 1, "vectors": [[0.5]] * 40, "structure": {"kind": "path"}}
        code, _, err = run(capsys, "solve", write(tmp_path, "big.json", doc))
        assert code == 2 and "error" in err

    def test_tree_solver_needs_tree(self, tmp_path, capsys):
        doc = {"d": 1, "vectors": [[1.0]], "structure": {"kind": "sets", "sets": [[0]]}}
        assert run(capsys, "solve", write(tmp_path, "s.json", doc), "--solver", "tree")[0] == 2

    def test_missing_file(self, tmp_path, capsys):
        assert run(capsys, "solve", str(tmp_path / "nope.json"))[0] == 2

    def test_out_flag(self, tmp_path, capsys):
        dest = tmp_path / "r.json"
        code, out, _ = run(capsys, "solve", write(tmp_path, "p.json", PATH_DOC), "--out", str(dest))
        assert code == 0 and out == "" and json.loads(dest.read_text())["value"] == 1


class TestGen:
    @pytest.mark.parametrize("family,extra,solver", [
        ("adv-tree", ["--h", "3"], "tree"),
        ("stoch-tree", ["--l", "2", "--h", "3"], "tree"),
        ("smoothed", ["--T", "16", "--d", "2"], "smoothed"),
        ("chain", ["--l", "2"], "dag"),
        ("planted", ["--T", "4", "--num-blocks", "3"], "exact"),
    ])
    def test_families_solve(self, tmp_path, capsys, family, extra, solver):
        code, out, _ = run(capsys, "gen", family, *extra, "--seed", "3")
        assert code == 0
        Instance.from_json(out)
        code, rep, _ = run(capsys, "solve", write(tmp_path, "i.json", out), "--solver", solver)
        assert code == 0 and json.loads(rep)["value"] >= 0

    def test_seed_reuse_is_bit_identical(self, capsys):
        a = run(capsys, "gen", "smoothed", "--T", "8", "--seed", "11")[1]
        b = run(capsys, "gen", "smoothed", "--T", "8", "--seed", "11")[1]
        c = run(capsys, "gen", "smoothed", "--T", "8", "--seed", "12")[1]
        assert a == b and a != c

    @pytest.mark.parametrize("argv", [
        ["gen", "adv-tree", "--h", "0"],
        ["gen", "adv-tree", "--h", "25"],
        ["gen", "smoothed", "--eps", "1.5"],
        ["gen", "stoch-tree", "--l", "0"],
        ["gen", "galaxy"],
        ["gen", "chain", "--l", "-1"],
    ])
    def test_invalid_params(self, capsys, argv):
        assert run(capsys, *argv)[0] == 2


class TestExperiment:
    def _rows(self, text):
        return list(csv.reader(io.StringIO(text)))

    def test_feasibility_rows(self):
        spec = {"metric": "lp_feasibility", "grid": {"d": [2], "n": [8], "b": [2], "epsilon": [0.2, 0.3]},
                "delta": 3.0}
        rows = self._rows(run_experiment(spec, trials=2, seed=5, workers=1))
        assert rows[0] == ["metric", "d", "n", "b", "epsilon", "trial", "seed", "delta", "status", "feasible", "iterations"]
        assert len(rows) == 1 + 2 * 2
        assert [r[5] for r in rows[1:]] == ["0", "1", "0", "1"]
        assert [r[6] for r in rows[1:]] == ["5", "6", "5", "6"]

    def test_workers_do_not_change_output(self):
        spec = {"metric": "embedding", "grid": {"l": [4], "h": [3]}}
        assert run_experiment(spec, 4, 0, 1) == run_experiment(spec, 4, 0, 2)

    def test_chain_rows(self):
        rows = self._rows(run_experiment({"metric": "chain_herdisc", "grid": {"l": [1, 2]}}, 1, 0, 1))
        assert len(rows) == 3 and all(r[-1] == "1" for r in rows[1:])

    def test_empty_grid_is_header_only(self):
        text = run_experiment({"metric": "embedding", "grid": {"l": [], "h": [3]}}, 3, 0, 1)
        assert text == "metric,l,h,trial,seed,T,found\n"

    def test_unknown_metric_exit_code(self, tmp_path, capsys):
        p = write(tmp_path, "e.json", {"metric": "vibes", "grid": {}})
        assert run(capsys, "experiment", p)[0] == 2

    def test_cli_writes_csv(self, tmp_path, capsys):
        p = write(tmp_path, "e.json", {"metric": "chain_herdisc", "grid": {"l": [1]}})
        code, out, _ = run(capsys, "experiment", p)
        assert code == 0 and out.startswith("metric,l,trial,seed,")


def test_bad_flag_is_usage_error(capsys):
    assert run(capsys, "solve")[0] == 2
    assert run(capsys, "--help")[0] == 0
