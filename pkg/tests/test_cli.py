"""End-to-end CLI tests."""
import json

import pytest

from rankfit.cli import EXIT_OK, EXIT_UNSAT, main

CSV_THREE = "id,A1,A2,A3\nr,3,2,8\ns,4,1,15\nt,1,1,14\n"
RANKING_THREE = "r\n> s\n> t\n"


@pytest.fixture
def three_files(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text(CSV_THREE)
    ranking = tmp_path / "ranking.txt"
    ranking.write_text(RANKING_THREE)
    return data, ranking


def _run(argv):
    return main([str(a) for a in argv])


def test_sat_exit_zero_and_report(three_files, tmp_path, capsys):
    data, ranking = three_files
    out = tmp_path / "report.json"
    code = _run(["sat", data, ranking, "--k", "2", "--out", out])
    assert code == EXIT_OK
    report = json.loads(out.read_text())
    assert report["status"] == "SATISFIABLE"
    assert report["verified"] is True
    assert report["schema"] == 1


def test_opt_zero_error_on_worked_instance(three_files, capsys):
    data, ranking = three_files
    code = _run(["opt", data, ranking, "--k", "3"])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["status"] == "OPTIMAL"
    assert report["objective"] == pytest.approx(0.0, abs=1e-9)
    assert report["total_error"] == 0.0


def test_gen_unsat_then_sat_exit_three(tmp_path):
    data = tmp_path / "gen.csv"
    ranking = tmp_path / "gen-ranking.txt"
    code = _run(["gen", "--n", "40", "--m", "3", "--seed", "42",
                 "--unsat", "--out", data, "--ranking-out", ranking])
    assert code == EXIT_OK
    code = _run(["sat", data, ranking, "--k", "5", "--out", tmp_path / "r.json"])
    assert code == EXIT_UNSAT


def test_gen_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _run(["gen", "--n", "12", "--m", "2", "--seed", "7", "--out", a])
    _run(["gen", "--n", "12", "--m", "2", "--seed", "7", "--out", b])
    assert a.read_text() == b.read_text()


def test_verify_equal_weights_on_sum_ranked_data(tmp_path, capsys):
    data = tmp_path / "d.csv"
    ranking = tmp_path / "r.txt"
    _run(["gen", "--n", "15", "--m", "3", "--seed", "3", "--out", data,
          "--ranking-out", ranking])
    weights = tmp_path / "w.json"
    weights.write_text(json.dumps({"A1": 1 / 3, "A2": 1 / 3, "A3": 1 / 3}))
    code = _run(["verify", data, ranking, "--k", "5", "--weights", weights])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["total_error"] == 0.0
    assert payload["metrics"]["inversions"] == 0


def test_constraints_file_changes_answer(three_files, tmp_path, capsys):
    data, ranking = three_files
    cons = tmp_path / "cons.txt"
    cons.write_text("# keep the second attribute small\nA2 <= 0.05\n")
    code = _run(["opt", data, ranking, "--k", "3", "--constraints", cons])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["objective"] > 0


def test_importance_file(three_files, tmp_path, capsys):
    data, ranking = three_files
    imp = tmp_path / "imp.csv"
    imp.write_text("id,factor\nr,5\n")
    code = _run(["opt", data, ranking, "--k", "3", "--importance", imp])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["per_tuple"][0]["importance"] == 5.0


def test_importance_unknown_id_errors(three_files, tmp_path, capsys):
    data, ranking = three_files
    imp = tmp_path / "imp.csv"
    imp.write_text("id,factor\nzz,2\n")
    code = _run(["opt", data, ranking, "--k", "3", "--importance", imp])
    assert code == 1


def test_baseline_methods(three_files, capsys):
    data, ranking = three_files
    for method in ("lr", "ordreg", "sample"):
        code = _run(["baseline", data, ranking, "--k", "3", "--method", method,
                     "--samples", "200"])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["method"] == method
        assert set(payload["weights"]) == {"A1", "A2", "A3"}


def test_cell_command(three_files, capsys):
    data, ranking = three_files
    code = _run(["cell", data, ranking, "--k", "3", "--seed-strategy", "lr",
                 "--cell-size", "0.05"])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["context"]["cell"]["strategy"] == "lr"


def test_local_command(three_files, capsys):
    data, ranking = three_files
    code = _run(["local", data, ranking, "--k", "3"])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["context"]["local"]["succeeded"] is True


def test_normalize_command(three_files, tmp_path, capsys):
    data, _ = three_files
    weights = tmp_path / "w.json"
    weights.write_text(json.dumps({"A1": 0.2, "A2": 0.7, "A3": 0.1}))
    code = _run(["normalize", data, "--weights", weights, "--mode", "zscore"])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert set(payload["weights_normalized_data"]) == {"A1", "A2", "A3"}
    vals = payload["weights_normalized_data"]
    assert sum(vals.values()) == pytest.approx(1.0)


def test_missing_file_is_error(tmp_path, capsys):
    code = _run(["sat", tmp_path / "nope.csv", tmp_path / "nope.txt", "--k", "1"])
    assert code == 1
