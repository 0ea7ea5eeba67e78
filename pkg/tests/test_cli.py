import json
import math
import struct

import numpy as np
import pytest

from blowup_bounds.bounds import BoundsReport
from blowup_bounds.cli import build_parser, main
from blowup_bounds.kernel import KernelConstants
from blowup_bounds.reports import (
    dumps_json,
    format_float,
    make_manifest,
    render_csv,
    render_report,
)


@pytest.fixture(scope="module")
def constants_file(tmp_path_factory, disk_constants):
    path = tmp_path_factory.mktemp("cli") / "constants.json"
    path.write_text(dumps_json(disk_constants.to_dict()))
    return str(path)


class TestSerialization:
    @pytest.mark.parametrize("x", [1 / 3, 0.1, 1e-300, 1.7976931348623157e308, -0.0, 2.0])
    def test_float_round_trip(self, x):
        assert struct.pack("<d", float(format_float(x))) == struct.pack("<d", x)

    def test_json_shapes(self):
        text = dumps_json({"a": 1, "b": [1.5, None, True], "c": {"d": "x\ny"}})
        parsed = json.loads(text)
        assert parsed == {"a": 1, "b": [1.5, None, True], "c": {"d": "x\ny"}}

    def test_numpy_values_serialize(self):
        text = dumps_json({"v": np.float64(0.25), "n": np.int64(3), "arr": np.array([1.0, 2.0])})
        assert json.loads(text) == {"v": 0.25, "n": 3, "arr": [1.0, 2.0]}

    def test_csv_rendering(self):
        text = render_csv(["a", "b"], [{"a": 1 / 3, "b": None}, {"a": 1, "b": "ok"}])
        lines = text.strip().split("\n")
        assert lines[0] == "a,b"
        assert lines[1].split(",")[0] == format_float(1 / 3)
        assert lines[1].split(",")[1] == ""

    def test_manifest_embedding(self):
        man = make_manifest("bounds", {"q": 2.0}, timestamp="T0")
        text = render_report({"value": 1.0}, man)
        parsed = json.loads(text)
        assert parsed["manifest"]["subcommand"] == "bounds"
        assert parsed["manifest"]["timestamp"] == "T0"
        assert len(parsed["manifest"]["input_hash"]) == 64

    def test_manifest_hash_depends_on_args(self):
        h1 = make_manifest("bounds", {"q": 2.0}, "T0").input_hash
        h2 = make_manifest("bounds", {"q": 3.0}, "T0").input_hash
        assert h1 != h2


class TestDispatch:
    def test_help_lists_grammar(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "disk:R" in out and "arcs:s0-s1" in out

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["bounds", "--bogus"])
        assert exc.value.code == 2

    def test_invalid_q_exits_2(self, constants_file, capsys):
        rc = main(["bounds", "--domain", "disk:1.0", "--gamma1", "full", "--q", "0.5",
                   "--m0", "1", "--constants", constants_file])
        assert rc == 2
        assert "q" in capsys.readouterr().err

    def test_bad_domain_exits_2(self, constants_file, capsys):
        rc = main(["bounds", "--domain", "hex:1", "--gamma1", "full", "--q", "2",
                   "--m0", "1", "--constants", constants_file])
        assert rc == 2

    def test_bounds_stdout_json(self, constants_file, capsys):
        rc = main(["bounds", "--domain", "disk:1.0", "--gamma1", "arcs:0-0.1", "--q", "2",
                   "--m0", "1", "--alpha", "0.5", "--constants", constants_file,
                   "--timestamp", "T0"])
        assert rc == 0
        parsed = json.loads(capsys.readouterr().out)
        assert parsed["inputs"]["gamma1_area"] == pytest.approx(0.1)
        assert parsed["lower_new_constructive"] >= parsed["lower_new_closed"]

    def test_constants_report_shape(self, tmp_path):
        out = tmp_path / "c.json"
        rc = main(["constants", "--domain", "disk:1.0", "--volume-nodes", "4096",
                   "--boundary-nodes", "512", "--time-nodes", "256",
                   "--output", str(out), "--timestamp", "T0"])
        assert rc == 0
        parsed = json.loads(out.read_text())
        for key in ("b1", "b1_err", "B1", "B1_err", "grid", "manifest"):
            assert key in parsed
        assert 0 < parsed["b1"] <= 0.5


class TestRoundTrips:
    def test_bounds_report_round_trip(self, constants_file, tmp_path):
        out = tmp_path / "bounds.json"
        main(["bounds", "--domain", "disk:1.0", "--gamma1", "full", "--q", "2", "--m0", "1",
              "--alpha", "0", "--u0-const", "--constants", constants_file,
              "--output", str(out), "--timestamp", "T0"])
        parsed = json.loads(out.read_text())
        parsed.pop("manifest")
        report = BoundsReport.from_dict(parsed)
        assert report.upper == pytest.approx(0.5)
        assert report.to_dict() == parsed

    def test_constants_round_trip(self, constants_file, disk_constants):
        parsed = json.loads(open(constants_file).read())
        kc = KernelConstants.from_dict(parsed)
        assert float(kc.b1) == float(disk_constants.b1)
        assert float(kc.B1) == float(disk_constants.B1)


class TestDeterminism:
    def run_twice(self, argv, tmp_path, name):
        outs = []
        for i in (1, 2):
            path = tmp_path / f"{name}{i}"
            rc = main(argv + ["--output", str(path), "--timestamp", "T0"])
            assert rc == 0
            outs.append(path.read_bytes())
        return outs

    def test_bounds_bytes_identical(self, constants_file, tmp_path):
        a, b = self.run_twice(
            ["bounds", "--domain", "disk:1.0", "--gamma1", "arcs:0-1.0", "--q", "2.5",
             "--m0", "0.7", "--alpha", "0.25", "--constants", constants_file],
            tmp_path, "b")
        assert a == b

    def test_trace_bytes_identical(self, constants_file, tmp_path):
        a, b = self.run_twice(
            ["trace", "--domain", "disk:1.0", "--gamma1", "full", "--q", "2", "--m0", "1",
             "--alpha", "0", "--t-star", "0.001", "--constants", constants_file],
            tmp_path, "t")
        assert a == b
        text = a.decode()
        assert text.splitlines()[0] == "k,M_k,lambda_k,x_k"
        assert len(text.splitlines()) > 1

    def test_sweep_csv_and_sidecars(self, constants_file, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = main(["sweep", "--axis", "m0", "--values", "0.25,0.5,1.0,2.0",
                   "--domain", "disk:1.0", "--gamma1", "arcs:0-0.2", "--q", "2", "--m0", "1",
                   "--alpha", "0", "--u0-const", "--constants", constants_file,
                   "--output", str(out), "--timestamp", "T0"])
        assert rc == 0
        header = out.read_text().splitlines()[0]
        assert header.startswith("value,q,m0,gamma1_area,alpha,lower_new_closed")
        sidecar = json.loads((tmp_path / "sweep.csv.slopes.json").read_text())
        assert "slope_fits" in sidecar
        manifest = json.loads((tmp_path / "sweep.csv.manifest.json").read_text())
        assert manifest["manifest"]["subcommand"] == "sweep"


class TestSimulateCommand:
    def test_simulate_with_figure_and_trace(self, tmp_path):
        out = tmp_path / "sim.json"
        trace = tmp_path / "sim.csv"
        rc = main(["simulate", "--domain", "disk:1.0", "--gamma1", "full", "--q", "2",
                   "--init", "const:1.0", "--resolution", "24x96", "--no-error-estimate",
                   "--output", str(out), "--trace-output", str(trace), "--plot",
                   "--timestamp", "T0"])
        assert rc == 0
        parsed = json.loads(out.read_text())
        assert parsed["status"] == "blew-up"
        assert parsed["t_star_est"] <= 0.5 * 1.05
        lines = trace.read_text().splitlines()
        assert lines[0] == "time,maxval"
        assert len(lines) > 100
        assert (tmp_path / "sim.json.png").exists()

    def test_plot_requires_output(self, capsys):
        rc = main(["simulate", "--domain", "disk:1.0", "--gamma1", "full", "--q", "2",
                   "--resolution", "24x96", "--no-error-estimate", "--plot"])
        assert rc == 2

    def test_radial_init_grammar(self, tmp_path):
        out = tmp_path / "sim.json"
        rc = main(["simulate", "--domain", "disk:1.0", "--gamma1", "full", "--q", "2",
                   "--init", "radial:1.0,0.5", "--resolution", "24x96",
                   "--no-error-estimate", "--output", str(out), "--timestamp", "T0"])
        assert rc == 0
        assert json.loads(out.read_text())["m0"] == pytest.approx(1.5, abs=1e-2)

    def test_bad_init_grammar(self, capsys):
        rc = main(["simulate", "--domain", "disk:1.0", "--gamma1", "full", "--q", "2",
                   "--init", "bogus:1"])
        assert rc == 2


class TestVerifyIdentity:
    def test_report(self, tmp_path):
        out = tmp_path / "vid.json"
        rc = main(["verify-identity", "--domain", "disk:1.0", "--samples", "2",
                   "--levels", "2", "--output", str(out), "--timestamp", "T0"])
        assert rc == 0
        parsed = json.loads(out.read_text())
        assert parsed["max_residual_default"] < 1e-3
        for sample in parsed["samples"]:
            assert sample["residuals"][1] < sample["residuals"][0]


class TestFigureRendering:
    def test_sweep_plot_written(self, constants_file, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = main(["sweep", "--axis", "m0", "--values", "0.25,0.5,1.0,2.0",
                   "--domain", "disk:1.0", "--gamma1", "arcs:0-0.2", "--q", "2", "--m0", "1",
                   "--alpha", "0", "--u0-const", "--constants", constants_file,
                   "--output", str(out), "--plot", "--timestamp", "T0"])
        assert rc == 0
        png = tmp_path / "sweep.csv.png"
        assert png.exists() and png.stat().st_size > 1000

    def test_verify_identity_plot_written(self, tmp_path):
        out = tmp_path / "vid.json"
        rc = main(["verify-identity", "--domain", "disk:1.0", "--samples", "2",
                   "--levels", "2", "--output", str(out), "--plot", "--timestamp", "T0"])
        assert rc == 0
        assert (tmp_path / "vid.json.png").exists()


class TestThreadEnv:
    def test_sweep_respects_thread_env(self, constants_file, tmp_path, monkeypatch):
        from blowup_bounds.cli import THREADS_ENV

        monkeypatch.setenv(THREADS_ENV, "4")
        out = tmp_path / "sweep.csv"
        rc = main(["sweep", "--axis", "m0", "--values", "0.25,0.5,1.0,2.0",
                   "--domain", "disk:1.0", "--gamma1", "arcs:0-0.2", "--q", "2", "--m0", "1",
                   "--alpha", "0", "--constants", constants_file,
                   "--output", str(out), "--timestamp", "T0"])
        assert rc == 0
        rows = out.read_text().splitlines()
        assert len(rows) == 5  # header + 4 ordered rows
        assert rows[1].startswith("0.25,")


def test_console_script_version():
    import subprocess

    proc = subprocess.run(["blowup-bounds", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "0.1.0" in proc.stdout
