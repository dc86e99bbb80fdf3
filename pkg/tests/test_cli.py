"""Command line front end: spec parsing, config precedence, solve and
bench flows, profile re-rendering, instance generation."""

import csv
import json
import xml.etree.ElementTree as ET

import pytest

from dnn_approx import cli
from dnn_approx.model import load_instance

TINY = "synth:biq:n=4,density=0.5,seed=1"
TINY_NAME = "synth-biq-n4-d0.5-s1"


def _config_from(argv):
    args = cli.build_parser().parse_args(["solve"] + argv)
    return cli.build_run_config(args)


class TestSynthSpec:
    """Generator spec grammar."""

    def test_full_spec(self):
        """all four keys  =>  (n, density, seed, wmax)"""
        assert cli.parse_synth_spec("synth:biq:n=10,density=0.2,seed=5,wmax=50") \
            == (10, 0.2, 5, 50)

    def test_defaults(self):
        """only n given  =>  density 0.1, seed 0, wmax 100"""
        assert cli.parse_synth_spec("synth:biq:n=8") == (8, 0.1, 0, 100)

    def test_trailing_comma(self):
        """empty items are skipped"""
        assert cli.parse_synth_spec("synth:biq:n=4,") == (4, 0.1, 0, 100)

    @pytest.mark.parametrize(
        "spec, message",
        [
            ("synth:cut:n=3", "bad generator spec"),
            ("biq:n=3", "bad generator spec"),
            ("synth:biq:n", "bad generator parameter"),
            ("synth:biq:n=", "bad generator parameter"),
            ("synth:biq:n=3,rho=2", "unknown generator keys"),
            ("synth:biq:density=0.2", "needs n="),
        ],
    )
    def test_rejects(self, spec, message):
        """malformed specs  =>  ValueError naming the defect"""
        with pytest.raises(ValueError, match=message):
            cli.parse_synth_spec(spec)

    def test_resolve_builds_lifted_instance(self):
        """synth:biq:n=4  =>  5x5 lifted instance with a stable name"""
        inst = cli.resolve_instance(TINY)
        assert inst.name == TINY_NAME
        assert inst.n == 5
        assert inst.eq.m == 5
        assert inst.ineq.m == 18


class TestRunConfig:
    """Setting resolution: defaults, then config file, then flags."""

    def test_defaults(self):
        cfg = _config_from([])
        assert cfg.solver == "imabcd"
        assert cfg.tol == 1e-6
        assert cfg.max_iter == 50_000
        assert cfg.instance is None
        assert cfg.output is None

    def test_file_then_flags(self, tmp_path):
        """flags beat the file, the file beats defaults"""
        path = tmp_path / "run.json"
        path.write_text(json.dumps(
            {"tol": 1e-3, "solver": "bcd", "instance": "x.npz"}
        ))
        cfg = _config_from(["--config", str(path), "--solver", "abcgd"])
        assert cfg.solver == "abcgd"
        assert cfg.tol == 1e-3
        assert cfg.instance == "x.npz"
        assert cfg.max_iter == 50_000

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"tols": 1}')
        with pytest.raises(ValueError, match="unknown config keys"):
            _config_from(["--config", str(path)])

    def test_config_must_be_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]")
        with pytest.raises(ValueError, match="must hold a JSON object"):
            _config_from(["--config", str(path)])


class TestGen:
    """Instance generation and persistence."""

    def test_prints_dimensions(self, capsys):
        """gen on a synth spec reports the lifted sizes"""
        assert cli.main(["gen", TINY]) == 0
        out = capsys.readouterr().out
        assert f"{TINY_NAME}: n=5 m_eq=5 m_ineq=18" in out

    def test_saves_npz(self, tmp_path, capsys):
        path = tmp_path / "tiny.npz"
        assert cli.main(["gen", TINY, "--output", str(path)]) == 0
        assert "wrote" in capsys.readouterr().out
        inst = load_instance(path)
        assert inst.n == 5
        assert inst.name == TINY_NAME

    def test_weight_file_roundtrip(self, tmp_path, capsys):
        """synth weights written to disk rebuild the same shape"""
        wpath = tmp_path / "w.txt"
        assert cli.main(["gen", TINY, "--weights-out", str(wpath)]) == 0
        capsys.readouterr()
        assert cli.main(["gen", str(wpath)]) == 0
        assert "w: n=5 m_eq=5 m_ineq=18" in capsys.readouterr().out

    def test_weights_out_needs_synth(self, tmp_path, capsys):
        wpath = tmp_path / "w.txt"
        wpath.write_text("2 0\n")
        rc = cli.main(["gen", str(wpath), "--weights-out", str(tmp_path / "x")])
        assert rc == 1
        assert "only applies to synth:" in capsys.readouterr().err


class TestSolve:
    """Single runs through the full pipeline."""

    def test_tolerance_run(self, tmp_path, capsys):
        """small instance at 1e-5  =>  exit 0, trace and summary on disk"""
        out = tmp_path / "run"
        rc = cli.main([
            "solve", "--instance", TINY, "--tol", "1e-5",
            "--max-iter", "20000", "--output", str(out),
        ])
        assert rc == 0
        line = capsys.readouterr().out
        assert line.startswith(f"{TINY_NAME} imabcd: reason=tolerance")
        assert (out / "trace.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["reason"] == "tolerance"
        assert summary["final"]["eta"] <= 1e-5
        assert summary["config"]["tol"] == 1e-5

    def test_iteration_cap_exit_code(self, capsys):
        """--max-iter 1  =>  exit 2"""
        rc = cli.main(["solve", "--instance", TINY, "--max-iter", "1"])
        assert rc == 2
        assert "reason=iteration_cap" in capsys.readouterr().out

    def test_missing_instance_file(self, tmp_path, capsys):
        rc = cli.main(["solve", "--instance", str(tmp_path / "gone.txt")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_no_instance_given(self, capsys):
        rc = cli.main(["solve"])
        assert rc == 1
        assert "no instance given" in capsys.readouterr().err

    def test_canonical_outputs_repeat(self, tmp_path, capsys):
        """same seed, canonical mode  =>  byte-identical files"""
        out = tmp_path / "run"
        argv = [
            "solve", "--instance", TINY, "--solver", "erabcd",
            "--tol", "1e-4", "--seed", "7", "--output", str(out),
            "--canonical",
        ]
        assert cli.main(argv) == 0
        first = {name: (out / name).read_bytes()
                 for name in ("trace.csv", "summary.json")}
        assert cli.main(argv) == 0
        capsys.readouterr()
        for name, payload in first.items():
            assert (out / name).read_bytes() == payload


class TestBench:
    """Grid runs with serial execution forced."""

    def test_grid(self, tmp_path, monkeypatch, capsys):
        """2 instances x 2 solvers  =>  results.csv, cell dirs, profile"""
        monkeypatch.setenv("DNN_APPROX_THREADS", "1")
        out = tmp_path / "grid"
        rc = cli.main([
            "bench", "--instances", TINY, "synth:biq:n=3,density=0.5,seed=2",
            "--solvers", "imabcd,bcd", "--tol", "1e-4",
            "--max-iter", "20000", "--output", str(out),
        ])
        assert rc == 0
        capsys.readouterr()
        with open(out / "results.csv", newline="") as fh:
            reader = csv.DictReader(fh)
            assert tuple(reader.fieldnames) == cli._RESULTS_COLUMNS
            rows = list(reader)
        assert len(rows) == 4
        assert all(row["solved"] == "1" for row in rows)
        for row in rows:
            cell = out / f"{row['instance']}__{row['solver']}"
            assert (cell / "summary.json").exists()
            assert (cell / "trace.csv").exists()
        root = ET.fromstring((out / "profile.svg").read_text())
        assert root.tag.endswith("svg")

    def test_failed_cell_is_recorded(self, tmp_path, monkeypatch, capsys):
        """unreadable instance  =>  error row, batch still completes"""
        monkeypatch.setenv("DNN_APPROX_THREADS", "1")
        out = tmp_path / "grid"
        rc = cli.main([
            "bench", "--instances", str(tmp_path / "missing.txt"),
            "--solvers", "imabcd", "--output", str(out),
        ])
        assert rc == 0
        assert "error" in capsys.readouterr().err
        with open(out / "results.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert rows[0]["reason"] == "error"
        assert rows[0]["solved"] == "0"

    def test_unknown_solver(self, tmp_path, capsys):
        rc = cli.main([
            "bench", "--instances", TINY, "--solvers", "nope",
            "--output", str(tmp_path / "g"),
        ])
        assert rc == 1
        assert "unknown solvers: nope" in capsys.readouterr().err

    def test_solvers_flag_required(self, tmp_path, capsys):
        with pytest.raises(SystemExit):
            cli.main(["bench", "--instances", TINY,
                      "--output", str(tmp_path / "g")])
        capsys.readouterr()


class TestProfile:
    """Re-rendering a plot from saved results."""

    def _write_results(self, path, rows):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cli._RESULTS_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)

    def test_render_from_csv(self, tmp_path, capsys):
        """two solvers, one instance  =>  titled SVG written"""
        results = tmp_path / "results.csv"
        self._write_results(results, [
            {"instance": "a", "solver": "s1", "seed": 0, "iterations": 10,
             "time_s": 1.0, "eta": 1e-7, "reason": "tolerance", "solved": 1},
            {"instance": "a", "solver": "s2", "seed": 0, "iterations": 20,
             "time_s": 2.0, "eta": 1e-7, "reason": "tolerance", "solved": 1},
        ])
        svg_path = tmp_path / "plot.svg"
        rc = cli.main(["profile", "--results", str(results),
                       "--output", str(svg_path), "--title", "Race day"])
        assert rc == 0
        assert "wrote" in capsys.readouterr().out
        assert "Race day" in svg_path.read_text()

    def test_empty_results(self, tmp_path, capsys):
        results = tmp_path / "results.csv"
        self._write_results(results, [])
        rc = cli.main(["profile", "--results", str(results),
                       "--output", str(tmp_path / "p.svg")])
        assert rc == 1
        assert "no result rows" in capsys.readouterr().err


class TestWorkerCount:
    """Worker pool sizing."""

    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("DNN_APPROX_THREADS", "1")
        assert cli._worker_count(8) == 1

    def test_bounded_by_cells(self, monkeypatch):
        monkeypatch.delenv("DNN_APPROX_THREADS", raising=False)
        assert 1 <= cli._worker_count(3) <= 3
        assert cli._worker_count(0) == 1
