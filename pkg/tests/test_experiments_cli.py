import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from parsym import cli
from parsym.errors import DegenerateFit, InputError
from parsym.experiments import OUTPUT_ENV, SWEEP_COLUMNS, fit_loglog, load_config, set_dotted

SVG_NS = "{http://www.w3.org/2000/svg}"
FOURIER = '{"kind":"fourier_disk","params":{"cos":{"3":0.02}}}'


def svg_layers(path):
    root = ET.parse(path).getroot()
    paths = root.findall(f".//{SVG_NS}path")
    legend = [g for g in root.iter(f"{SVG_NS}g") if g.get("id") == "legend"]
    return paths, legend


class TestFit:
    def test_linear(self):
        rows = [{"x": x, "y": 3 * x} for x in (0.1, 0.2, 0.5, 1.0)]
        slope, _, r2 = fit_loglog(rows, "x", "y")
        assert slope == pytest.approx(1.0, abs=1e-12) and r2 == pytest.approx(1.0, abs=1e-12)

    def test_quadratic(self):
        rows = [{"x": x, "y": x**2} for x in (0.1, 0.3, 0.9)]
        assert fit_loglog(rows, "x", "y")[0] == pytest.approx(2.0, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateFit):
            fit_loglog([{"x": 1, "y": 1}, {"x": 2, "y": 2}], "x", "y")
        with pytest.raises(DegenerateFit):
            fit_loglog([{"x": x, "y": y} for x, y in ((1, 1), (2, 0), (3, 3))], "x", "y")


class TestConfig:
    def test_precedence(self, tmp_path, monkeypatch):
        monkeypatch.delenv(OUTPUT_ENV, raising=False)
        assert load_config().seed == 42 and load_config().R == 0.5
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"R": 0.3, "seed": 7, "output": "from-file"}))
        assert load_config(cfg).R == 0.3
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        assert load_config(cfg).output == str(tmp_path / "env")
        over = load_config(cfg, {"R": 0.2, "output": "flag", "seed": None})
        assert (over.R, over.output, over.seed) == (0.2, "flag", 7)

    def test_unknown_field(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"radius": 1}')
        with pytest.raises(InputError, match="radius"):
            load_config(cfg)

    def test_syntax_error_has_position(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{\n  "R": 0.3,\n  "h": }\n')
        with pytest.raises(InputError, match=r"c\.json:3:"):
            load_config(cfg)

    def test_sweep_values_increasing(self):
        with pytest.raises(InputError, match="strictly increasing"):
            load_config(overrides={"sweep": {"parameter": "R", "values": [0.3, 0.2]}})

    def test_domain_file_relative_to_config(self, tmp_path):
        (tmp_path / "g.json").write_text('{"kind": "disk", "params": {"radius": 2.0}}')
        (tmp_path / "c.json").write_text('{"domain": "g.json"}')
        assert load_config(tmp_path / "c.json").G().diameter == pytest.approx(4.0)

    def test_set_dotted(self):
        doc = {"domain": {"params": {"cos": {"3": 0.02}, "center": [0.0, 0.0]}}}
        set_dotted(doc, "domain.params.cos.3", 0.1)
        set_dotted(doc, "domain.params.center.1", 0.5)
        assert doc["domain"]["params"] == {"cos": {"3": 0.1}, "center": [0.0, 0.5]}
        with pytest.raises(InputError, match="domain.params.sin"):
            set_dotted(doc, "domain.params.sin.3", 0.1)
        with pytest.raises(InputError):
            set_dotted(doc, "domain.params.center.4", 0.1)


class TestExitCodes:
    def test_radial_certify(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert cli.main(["certify", "--h", "0.04", "--n", "512", "--output", str(out)]) == cli.EXIT_OK
        rep = json.loads((out / "report.json").read_text())
        assert rep["passes"]["certificate_empirical"] and rep["gap"] <= 2 * 0.04
        paths, legend = svg_layers(out / "certify.svg")
        assert len(paths) == 6 and len(legend) == 1
        assert [p.get("id") for p in paths] == [f"layer-{k}" for k in range(6)]
        rows = (out / "report.csv").read_text().splitlines()
        assert rows[0].split(",") == list(SWEEP_COLUMNS) and len(rows) == 2

    def test_malformed_domain_names_field(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"kind": "ellipse", "params": {"semi_axis": [1, 0.5]}}')
        assert cli.main(["certify", "--domain", str(bad), "--output", str(tmp_path / "o")]) == cli.EXIT_INPUT
        assert "semi_axis" in capsys.readouterr().err

    def test_bad_value_names_field(self, tmp_path, capsys):
        assert cli.main(["certify", "--R", "-1", "--output", str(tmp_path / "o")]) == cli.EXIT_INPUT
        assert "config.R" in capsys.readouterr().err

    def test_numerical_failure(self, tmp_path, capsys):
        argv = ["solve", "--problem", "affine", "--param", "a=1", "--param", "b=100", "--h", "0.05"]
        assert cli.main(argv + ["--output", str(tmp_path / "o")]) == cli.EXIT_NUMERIC
        assert "NonConvergence" in capsys.readouterr().err

    def test_certificate_failure(self, tmp_path, monkeypatch, capsys):
        real = cli.run_certify

        def failing(cfg):
            rep = real(cfg)
            rep.passes["certificate_empirical"] = False
            return rep

        monkeypatch.setattr(cli, "run_certify", failing)
        argv = ["certify", "--h", "0.05", "--n", "256", "--output", str(tmp_path / "o")]
        assert cli.main(argv) == cli.EXIT_FAIL

    def test_env_output_dir(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        assert cli.main(["solve", "--h", "0.05", "--n", "64"]) == cli.EXIT_OK
        assert (tmp_path / "env" / "field.csv").exists()
        head = (tmp_path / "env" / "trace.csv").read_text().splitlines()[0]
        assert head == "s,x,y,u,nu_x,nu_y"

    def test_constants(self, tmp_path, capsys):
        assert cli.main(["constants", "--R", "1", "--diamG", "2", "--rho", "0.5", "--K", "1", "--C-sup", "8", "--output", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "constants.json").read_text())
        assert doc["C_final"] == 960.0

    def test_harnack_small_suite(self, tmp_path, capsys):
        assert cli.main(["harnack", "--cases", "20", "--h", "0.05", "--output", str(tmp_path)]) == cli.EXIT_OK
        doc = json.loads((tmp_path / "harnack.json").read_text())
        assert doc["suite"]["passed"] == 20 and all(a["ok"] for a in doc["chains"].values())
        for k in ("disk", "upper_half_disk", "u_shape"):
            paths, _ = svg_layers(tmp_path / f"chain_{k}.svg")
            assert len(paths) == 4

    def test_console_script(self, tmp_path):
        res = subprocess.run(
            [sys.executable, "-m", "parsym.cli", "constants", "--output", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert res.returncode == 0 and (tmp_path / "constants.json").exists()


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("sweep")
    common = ["sweep", "--domain", FOURIER, "--sweep-param", "domain.params.cos.3",
              "--sweep-values", "0.02,0.04,0.08", "--h", "0.05", "--n", "512"]
    codes = [cli.main(common + ["--jobs", str(j), "--output", str(base / f"j{j}")]) for j in (1, 2)]
    return base, codes


class TestSweepDeterminism:
    def test_bit_identical_across_runs_and_jobs(self, runs):
        base, codes = runs
        assert codes == [0, 0]
        assert (base / "j1" / "sweep.csv").read_bytes() == (base / "j2" / "sweep.csv").read_bytes()

    def test_rows_and_fit(self, runs):
        base, _ = runs
        lines = (base / "j1" / "sweep.csv").read_text().splitlines()
        assert len(lines) == 4
        assert [float(r.split(",")[0]) for r in lines[1:]] == [0.02, 0.04, 0.08]
        fit = json.loads((base / "j1" / "fit.json").read_text())
        assert np.isfinite(fit["slope"]) and 0 <= fit["r2"] <= 1

    def test_sweep_svg(self, runs):
        base, _ = runs
        paths, _ = svg_layers(base / "j1" / "sweep.svg")
        assert [p.get("data-layer") for p in paths][0] == "sweep rows"
        assert len(paths) == 2
