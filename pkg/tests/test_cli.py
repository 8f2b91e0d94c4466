import json
import math
import subprocess
import sys

import pytest

from threshdiff import cli


@pytest.fixture
def recurrent_file(tmp_path):
    doc = {"thresholds": [0.0], "drifts": [1.0, -1.0],
           "vols": [math.sqrt(2.0), math.sqrt(2.0)]}
    path = tmp_path / "recurrent.json"
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def transient_file(tmp_path):
    doc = {"thresholds": [0.0], "drifts": [-1.0, 1.0], "vols": [1.0, 1.0]}
    path = tmp_path / "transient.json"
    path.write_text(json.dumps(doc))
    return str(path)


def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr().out
    return code, out


class TestSubcommands:
    def test_escape_symmetric(self, transient_file, capsys):
        code, out = run_cli(["escape", "--model", transient_file, "--y", "0"], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "y,p_minus,p_plus"
        y, pm, pp = lines[1].split(",")
        assert float(pm) == 0.5 and float(pp) == 0.5

    def test_stationary_density_at_zero(self, recurrent_file, capsys):
        code, out = run_cli(
            ["stationary", "--model", recurrent_file, "--grid", "0:1:2"], capsys
        )
        assert code == 0
        first = out.splitlines()[1].split(",")
        assert float(first[1]) == pytest.approx(0.5, rel=1e-12)

    def test_stationary_on_transient_exits_3(self, transient_file, capsys):
        code, _ = run_cli(["stationary", "--model", transient_file, "--grid", "0:1:2"], capsys)
        assert code == 3

    def test_eval_density_grid_and_pieces(self, recurrent_file, capsys):
        code, out = run_cli(
            ["eval-density", "--model", recurrent_file, "--q", "0.5", "--x", "0",
             "--grid", "-1:1:3"], capsys
        )
        assert code == 0
        assert out.splitlines()[0] == "z,density"
        code, out = run_cli(
            ["eval-density", "--model", recurrent_file, "--q", "0.5", "--x", "0.3",
             "--grid", "-1:1:3", "--pieces"], capsys
        )
        assert code == 0
        assert out.splitlines()[0] == "left,right,amplitude,rate,reference"
        assert len(out.splitlines()) >= 4

    def test_hitting(self, recurrent_file, capsys):
        code, out = run_cli(
            ["hitting", "--model", recurrent_file, "--q", "0.5", "--x", "0",
             "--target", "1", "--lower", "-1", "--upper", "1"], capsys
        )
        assert code == 0
        rows = dict(line.split(",") for line in out.splitlines()[1:])
        assert 0.0 < float(rows["hit_laplace"]) < 1.0
        assert float(rows["exit_down_probability"]) == pytest.approx(0.5, rel=1e-12)

    def test_scale(self, transient_file, capsys):
        code, out = run_cli(["scale", "--model", transient_file, "--grid", "0:1:3"], capsys)
        assert code == 0
        rows = [line.split(",") for line in out.splitlines()[1:]]
        assert float(rows[0][1]) == 0.0  # anchored at the first threshold
        assert float(rows[2][1]) == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-12)

    def test_simulate_hit_laplace(self, recurrent_file, capsys):
        code, out = run_cli(
            ["simulate", "--model", recurrent_file, "--kind", "hit-laplace",
             "--x", "0", "--q", "0.5", "--target", "0.5", "--n", "500",
             "--dt", "1e-3", "--seed", "9"], capsys
        )
        assert code == 0
        header, row = out.splitlines()
        assert header == "estimate,stderr,n_paths,bias_bound"
        est = float(row.split(",")[0])
        assert 0.0 < est <= 1.0

    def test_dump_model_round_trip(self, recurrent_file, tmp_path, capsys):
        out_path = tmp_path / "copy.json"
        code, _ = run_cli(
            ["dump-model", "--model", recurrent_file, "--out", str(out_path)], capsys
        )
        assert code == 0
        original = json.loads(open(recurrent_file).read())
        copied = json.loads(out_path.read_text())
        assert copied == original


class TestOutputDiscipline:
    def test_seventeen_significant_digits(self, recurrent_file, tmp_path, capsys):
        out_path = tmp_path / "grid.csv"
        code, _ = run_cli(
            ["eval-density", "--model", recurrent_file, "--q", "0.5", "--x", "0.1",
             "--grid", "-1:1:5", "--out", str(out_path)], capsys
        )
        assert code == 0
        data = out_path.read_bytes()
        assert b"\r" not in data  # LF endings only
        for line in data.decode().splitlines()[1:]:
            z, d = line.split(",")
            # 17 significant digits round-trip float64 exactly
            assert float(d) == float(format(float(d), ".17g"))

    def test_output_file_deterministic(self, recurrent_file, tmp_path, capsys):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (p1, p2):
            run_cli(["eval-density", "--model", recurrent_file, "--q", "0.5",
                     "--x", "0", "--grid", "-2:2:9", "--out", str(p)], capsys)
        assert p1.read_bytes() == p2.read_bytes()


class TestExitCodes:
    def test_usage_error(self, recurrent_file, capsys):
        code = cli.main(["hitting", "--model", recurrent_file, "--q", "0.5", "--x", "0"])
        capsys.readouterr()
        assert code == 1

    def test_unknown_grid_format(self, recurrent_file, capsys):
        code = cli.main(["stationary", "--model", recurrent_file, "--grid", "oops"])
        capsys.readouterr()
        assert code == 1

    def test_model_validation_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"thresholds": [1.0, 0.0], "drifts": [0, 0, 0],
                                   "vols": [1, 1, 1]}))
        code = cli.main(["escape", "--model", str(bad), "--y", "0"])
        capsys.readouterr()
        assert code == 2

    def test_missing_model_file(self, tmp_path, capsys):
        code = cli.main(["escape", "--model", str(tmp_path / "none.json"), "--y", "0"])
        capsys.readouterr()
        assert code == 2

    def test_precondition_error(self, recurrent_file, capsys):
        code = cli.main(["escape", "--model", recurrent_file, "--y", "0"])
        capsys.readouterr()
        assert code == 3

    def test_entry_point_runs(self, recurrent_file):
        proc = subprocess.run(
            [sys.executable, "-m", "threshdiff.cli", "escape", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
