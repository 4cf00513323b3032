import json
import os
from pathlib import Path

import numpy as np
import pytest

from curvemetrics.cli import RunConfig, main, write_atomic
from curvemetrics.core import Curve
from curvemetrics.exceptions import ConfigError
from curvemetrics.kernel import SobolevKernel, gram, metric_solve
from curvemetrics.outer import MomentumPath, outer_path_energy
from curvemetrics.paths import DistanceReport

FIX = Path(__file__).parent / "fixtures"


def fx(name):
    return str(FIX / name)


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def read_report(path):
    return DistanceReport.from_json(Path(path).read_text())


@pytest.mark.parametrize("cmd", ["inner-dist", "outer-dist"])
def test_same_file_twice(tmp_path, cmd):
    out = tmp_path / "r.json"
    assert main([cmd, fx("circle_r1.json"), fx("circle_r1.json"), "--out", str(out)]) == 0
    assert read_report(out).value == 0


@pytest.mark.parametrize("cmd", ["inner-dist", "outer-dist"])
def test_mismatched_sample_count(tmp_path, cmd, capsys):
    assert main([cmd, fx("circle_r1.json"), fx("circle_n16.json"), "--out", str(tmp_path / "r")]) == 1
    assert "sample count" in capsys.readouterr().err


def test_inner_concentric_fixture(tmp_path):
    expected = json.loads((FIX / "circle_r1_r1.2_expected.json").read_text())
    out = tmp_path / "r.json"
    code = main(["inner-dist", *map(fx, expected["pair"]), "--out", str(out)])
    assert code == 0
    value = read_report(out).value
    assert abs(value - expected["oracle"]) <= expected["rel_tol"] * expected["oracle"]


def test_outer_translated_fixture_within_feasible_bound(tmp_path):
    out = tmp_path / "r.json"
    assert main(["outer-dist", fx("circle_r1.json"), fx("circle_r1_shifted.json"), "--out", str(out)]) == 0
    rep = read_report(out)
    q = Curve.load(fx("circle_r1.json"))
    w = np.array([0.5, 0.0])
    k = SobolevKernel(3, 2)
    steps = rep.path.steps
    mom = np.array([metric_solve(gram(k, q.points + (t + 0.5) / steps * w), np.tile(w, (q.n_samples, 1)))
                    for t in range(steps)])
    feasible = outer_path_energy(k, MomentumPath(q, mom)).length
    assert rep.value <= feasible + 1e-3


def test_low_order_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, {"schema_version": 1, "metric": {"s": 1.5}})
    assert main(["outer-dist", fx("circle_r1.json"), fx("circle_r1.json"), "--config", cfg]) == 1
    assert "order" in capsys.readouterr().err


def test_unconverged_exit_code(tmp_path):
    cfg = write_config(tmp_path, {"optimizer": {"T": 4, "max_iters": 1, "tol": 1e-12}})
    out = tmp_path / "r.json"
    assert main(["inner-dist", fx("circle_r1.json"), fx("circle_r1.2.json"), "--config", cfg,
                 "--out", str(out)]) == 2
    assert not read_report(out).converged


def test_compare_golden_csv(tmp_path):
    out = tmp_path / "rep.json"
    assert main(["compare", "--config", fx("compare_small.json"), "--out", str(out)]) == 0
    assert out.with_suffix(".csv").read_text() == (FIX / "compare_small_golden.csv").read_text()
    doc = json.loads(out.read_text())
    assert doc["diagnostics"]["seed"] == 11
    assert "bilipschitz_probe" in doc["diagnostics"]


def test_compare_rejects_empty_sample_count(tmp_path, capsys):
    cfg = write_config(tmp_path, {"experiment": {"base_circle_n": 32, "sample_count": 0}})
    assert main(["compare", "--config", cfg]) == 1
    assert "sample_count" in capsys.readouterr().err


def test_compare_zero_amplitude(tmp_path, capsys):
    cfg = write_config(tmp_path, {"experiment": {"base_circle_n": 32, "sample_count": 5,
                                                 "amplitude": 0.0}})
    assert main(["compare", "--config", cfg]) == 1
    assert "no distinct pairs" in capsys.readouterr().err


def test_demo1d_rows(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["demo1d", "0", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,x_node,value"
    rows = [list(map(float, line.split(","))) for line in lines[1:]]
    assert abs(rows[0][2] - 1.5232) < 1e-2
    assert rows[1][2] <= 1e-2


def test_demo1d_empty_sweep(capsys):
    assert main(["demo1d"]) == 1
    assert "sweep" in capsys.readouterr().err


def test_demo1d_sweep_from_config(tmp_path, capsys):
    cfg = write_config(tmp_path, {"demo1d": {"sweep": [2.0], "spacing": 1e-2}})
    assert main(["demo1d", "--config", cfg]) == 0
    assert capsys.readouterr().out.splitlines()[1].startswith("2.0,")


def test_flow_subcommand(tmp_path):
    cfg = write_config(tmp_path, {"optimizer": {"T": 8}, "flow": {"steps": 32}})
    out = tmp_path / "f.json"
    assert main(["flow", fx("circle_r1.json"), fx("circle_r1.2.json"), "--config", cfg,
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "flow_result" and doc["steps"] == 32
    assert doc["endpoint_gap"] < 1e-2
    assert len(doc["frames"]) <= 64


def test_report_round_trip_byte_identical(tmp_path):
    out = tmp_path / "r.json"
    main(["outer-dist", fx("circle_r1.json"), fx("circle_r1.2.json"), "--out", str(out)])
    text = out.read_text()
    assert read_report(out).to_json() == text


def test_config_validation():
    with pytest.raises(ConfigError, match="schema_version"):
        RunConfig.from_dict({"schema_version": 2})
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="workers"):
        RunConfig.from_dict({"workers": 0})
    with pytest.raises(ConfigError, match="top level"):
        RunConfig.from_dict({"experiment": {"seed": 3}})
    cfg = RunConfig.from_dict({"seed": 5, "io": {"out": "x.json"}, "flow": {"steps": 16}})
    assert (cfg.seed, cfg.out, cfg.flow_steps) == (5, "x.json", 16)


def test_bad_json_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["demo1d", "0", "--config", str(path)]) == 1
    assert "not valid JSON" in capsys.readouterr().err


def test_write_atomic_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    write_atomic(target, "first")
    write_atomic(target, "second")
    assert target.read_text() == "second"
    assert os.listdir(target.parent) == ["out.txt"]


def test_write_atomic_keeps_old_file_on_failure(tmp_path):
    target = tmp_path / "out.txt"
    write_atomic(target, "kept")
    with pytest.raises(TypeError):
        write_atomic(target, None)
    assert target.read_text() == "kept"
    assert os.listdir(tmp_path) == ["out.txt"]
