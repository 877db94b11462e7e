import csv
import io
import json

import pytest

from ctmg_nets import cli, fileio
from ctmg_nets.model import build_chain_game


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def running_file(tmp_path, capsys):
    path = tmp_path / "running.ctmg"
    assert run(capsys, "gen", "--benchmark", "running-example", "--out", str(path))[0] == 0
    return path


def test_missing_model_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--horizon", "4"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_benchmark_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen", "--benchmark", "nope"])
    assert exc.value.code == 1


def test_solve_reports_switch_points(running_file, capsys, tmp_path):
    code, out, err = run(
        capsys, "solve", "--model", str(running_file), "--horizon", "4", "--precision", "1e-6",
        "--level", "2", "--switch-points", "--strategy-out", str(tmp_path / "opt.strategy"),
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["location"] for r in rows] == ["lS", "lR", "l", "G", "bot"]
    for r in rows:
        assert float(r["lower"]) <= float(r["value"]) <= float(r["upper"])
    switches = {line.split()[1]: float(line.split()[2]) for line in err.splitlines() if line.startswith("switch")}
    assert switches["lR"] == pytest.approx(1.123, abs=5e-3)
    assert switches["lS"] == pytest.approx(0.609, abs=5e-3)
    assert fileio.read_strategy(tmp_path / "opt.R.strategy").player == "R"
    assert fileio.read_strategy(tmp_path / "opt.S.strategy").player == "S"


def test_solve_json_schema(running_file, capsys):
    code, out, _ = run(capsys, "solve", "--model", str(running_file), "--horizon", "2", "--level", "3", "--format", "json")
    obj = json.loads(out)
    assert code == 0
    assert list(obj)[: len(fileio.JSON_FIELDS)] == list(fileio.JSON_FIELDS)
    assert obj["level"] == 3 and obj["bound"] <= 1e-6
    assert {p["location"] for p in obj["switch_points"]} <= {"lR", "lS"}


def test_erlang_normalisation_reported(tmp_path, capsys):
    path = tmp_path / "erlang.ctmg"
    run(capsys, "gen", "--benchmark", "erlang", "--out", str(path))
    assert sum(1 for line in path.read_text().splitlines() if line.startswith("location")) == 34
    code, _, err = run(capsys, "normalise", "--model", str(path), "--horizon", "7", "--out", str(tmp_path / "n.ctmg"))
    assert code == 0 and "lambda 10 scaled_horizon 70" in err
    normed = fileio.read_model(tmp_path / "n.ctmg")
    assert normed.row("e1", "a") == {"e2": 1}


def test_invalid_model_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ctmg"
    bad.write_text("ctmg 1\nlocation a R\ninit a 1/2\nrate a x a 1\n")
    code, _, err = run(capsys, "solve", "--model", str(bad), "--horizon", "1")
    assert code == 2 and "initial distribution" in err
    bad.write_text("ctmg 1\nlocation a R\nrate a x b 1\n")
    code, _, err = run(capsys, "solve", "--model", str(bad), "--horizon", "1")
    assert code == 2 and "line 3" in err


def test_guard_exit_3(running_file, capsys):
    code, _, err = run(capsys, "solve", "--model", str(running_file), "--horizon", "4", "--level", "1", "--precision", "1e-9")
    assert code == 3 and "guard" in err


def test_evaluate_extracted_and_constant(running_file, tmp_path, capsys):
    run(capsys, "solve", "--model", str(running_file), "--horizon", "4", "--strategy-out", str(tmp_path / "s.txt"))
    code, out, _ = run(capsys, "evaluate", "--model", str(running_file), "--horizon", "4", "--strategy", str(tmp_path / "s.R.txt"))
    assert code == 0
    ev = {r["location"]: float(r["value"]) for r in csv.DictReader(io.StringIO(out))}
    _, out, _ = run(capsys, "solve", "--model", str(running_file), "--horizon", "4")
    opt = {r["location"]: float(r["value"]) for r in csv.DictReader(io.StringIO(out))}
    assert abs(ev["lS"] - opt["lS"]) < 1e-5
    const = tmp_path / "const.txt"
    const.write_text("strategy R\npiece lR 0 4 a\npiece l 0 4 a\n")
    _, out, _ = run(capsys, "evaluate", "--model", str(running_file), "--horizon", "4", "--strategy", str(const))
    cv = {r["location"]: float(r["value"]) for r in csv.DictReader(io.StringIO(out))}
    assert cv["lS"] <= opt["lS"] + 2e-6


def test_evaluate_malformed_strategy_exit_2(running_file, tmp_path, capsys):
    bad = tmp_path / "bad.strategy"
    bad.write_text("strategy R\npiece lR 0 4\n")
    code, _, err = run(capsys, "evaluate", "--model", str(running_file), "--horizon", "4", "--strategy", str(bad))
    assert code == 2 and "line 2" in err
    bad.write_text("strategy R\npiece lS 0 4 a\n")
    code, _, _ = run(capsys, "evaluate", "--model", str(running_file), "--horizon", "4", "--strategy", str(bad))
    assert code == 2


def test_simulate_is_byte_deterministic(running_file, tmp_path, capsys):
    run(capsys, "solve", "--model", str(running_file), "--horizon", "4", "--strategy-out", str(tmp_path / "s.txt"))
    argv = [
        "simulate", "--model", str(running_file), "--horizon", "4",
        "--strategy-r", str(tmp_path / "s.R.txt"), "--strategy-s", str(tmp_path / "s.S.txt"),
        "--n", "2000", "--seed", "42",
    ]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second and first[0] == 0
    one = run(capsys, *argv[:-4], "--n", "1", "--seed", "1")[1]
    assert one.splitlines()[0] in ("estimate 0", "estimate 1")


def test_simulate_uncovered_exit_2(running_file, tmp_path, capsys):
    s = tmp_path / "r.txt"
    s.write_text("strategy R\npiece lR 0 4 a\n")
    code, _, _ = run(capsys, "simulate", "--model", str(running_file), "--horizon", "4", "--strategy-r", str(s), "--n", "10")
    assert code == 2


def test_oracle_modes(running_file, tmp_path, capsys):
    code, out, _ = run(capsys, "oracle", "--model", str(running_file), "--horizon", "1", "--epsilon", "1e-3")
    assert code == 0 and out.startswith("location,value,lower,upper\n")
    code, out, _ = run(
        capsys, "oracle", "--model", str(running_file), "--horizon", "1", "--mode", "study",
        "--levels", "1,2", "--eps-list", "0.1,0.05", "--epsilon", "1e-4",
    )
    assert code == 0 and out.splitlines()[0] == "level,epsilon,error,order"
    assert len(out.splitlines()) == 5


def test_table_golden(capsys):
    code, out, _ = run(capsys, "table", "--horizon", "10", "--precisions", "1e-7,1e-9,1e-11")
    assert code == 0
    assert out == (
        "level,1e-07,1e-09,1e-11\n"
        "1,1000000000,100000000000,10000000000000\n"
        "2,81650,816497,8164966\n"
        "3,3219,14939,69337\n"
        "4,605,1911,6043\n"
    )
    assert run(capsys, "table", "--horizon", "10", "--precisions", "0.5", "--levels", "1")[1].endswith("1,200\n")


def test_gen_round_trip(tmp_path, capsys):
    path = tmp_path / "chain.ctmg"
    run(capsys, "gen", "--benchmark", "chain-game", "--n", "7", "--out", str(path))
    assert fileio.read_model(path) == build_chain_game(n=7)
