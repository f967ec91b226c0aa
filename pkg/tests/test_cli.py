import json
import os
import subprocess
import sys

import pytest

from pddid.cli import main


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def listing(path):
    return sorted(p.relative_to(path).as_posix() for p in path.rglob("*"))


class TestFitAndSimulate:
    def test_simulate_then_fit(self, workdir):
        assert main(["simulate", "--n-per-group", "60", "--seed", "3", "-o", "sim.csv"]) == 0
        assert main(["fit", "sim.csv", "--cutoff", "182", "--study-length", "365",
                     "-o", "fit.json"]) == 0
        doc = json.loads((workdir / "fit.json").read_text())
        assert doc["kind"] == "did_estimate"
        assert abs(doc["payload"]["gamma_hat"]) < 0.5
        assert doc["payload"]["spec"]["method"] == "detrending"
        assert listing(workdir) == ["fit.json", "sim.csv"]

    def test_fit_minimal_to_stdout(self, minimal_csv, capsys):
        assert main(["fit", str(minimal_csv), "--cutoff", "182", "--method", "original"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["payload"]["gamma_hat"] == pytest.approx(2.0, abs=1e-12)

    def test_permtest(self, workdir, capsys):
        main(["simulate", "--n-per-group", "20", "--gamma", "0.3", "--seed", "1", "-o", "s.csv"])
        assert main(["permtest", "s.csv", "--cutoff", "182", "--study-length", "365",
                     "--m", "39", "--seed", "4"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["kind"] == "pd_did_result" and doc["payload"]["m"] == 39
        assert doc["seed_info"] == {"seed": 4}
        assert doc["payload"]["ci_low"] <= doc["payload"]["ci_high"]

    def test_covariates_flag(self, workdir, capsys):
        (workdir / "c.csv").write_text(
            "unit_id,group_id,arm,time,outcome,z_x\n"
            + "".join(f"u{i},{'G' if i % 2 else 'H'},{'I' if i % 2 else 'R'},{10 + 30 * (i % 12)},"
                      f"{0.1 * i},{(i * 7) % 5}\n" for i in range(48)))
        assert main(["fit", "c.csv", "--cutoff", "182", "--study-length", "365",
                     "--covariates", "--method", "original"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert "z_x" in doc["payload"]["fit"]["column_labels"]


class TestExperiment:
    def test_outputs(self, workdir):
        argv = ["experiment", "--gammas", "0,0.2", "--ls", "0", "--rhos", "0.5",
                "--replications", "4", "--m", "19", "--n-per-group", "20",
                "-o", "r.csv", "--json", "r.json", "--chart", "r.svg"]
        assert main(argv) == 0
        assert listing(workdir) == ["r.csv", "r.json", "r.svg"]
        lines = (workdir / "r.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 3
        doc = json.loads((workdir / "r.json").read_text())
        assert doc["kind"] == "experiment_report" and doc["payload"]["perm_m"] == 19
        assert (workdir / "r.svg").read_text().count("<polyline") == 3

    def test_method_subset(self, workdir, capsys):
        assert main(["experiment", "--methods", "original", "--ls", "0.2", "--rhos", "0",
                     "--replications", "3", "--n-per-group", "15"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 2 and out[1].split(",")[3] == "original"


class TestErrors:
    def test_unknown_flag(self, minimal_csv, capsys):
        assert main(["fit", str(minimal_csv), "--cutoff", "182", "--bogus"]) == 2
        assert "usage" in capsys.readouterr().err

    def test_abbreviations_rejected(self, minimal_csv):
        assert main(["fit", str(minimal_csv), "--cut", "182"]) == 2

    def test_missing_file(self, workdir, capsys):
        assert main(["fit", "nope.csv", "--cutoff", "182"]) == 1
        assert "nope.csv" in capsys.readouterr().err

    def test_bad_data(self, workdir, capsys):
        (workdir / "bad.csv").write_text("unit_id,group_id,arm,time,outcome\na,G,X,1,0\n")
        assert main(["fit", "bad.csv", "--cutoff", "182"]) == 1
        assert "arm" in capsys.readouterr().err

    def test_invalid_config(self, capsys):
        assert main(["simulate", "--rho", "1.5"]) == 1
        assert main(["experiment", "--methods", "bogus"]) == 2

    def test_console_entry_point(self, workdir):
        proc = subprocess.run([sys.executable, "-m", "pddid.cli", "simulate", "--n-per-group", "2",
                               "--seed", "1"], capture_output=True, text=True,
                              env={**os.environ, "PDDID_THREADS": "1"})
        assert proc.returncode == 0
        assert proc.stdout.startswith("unit_id,group_id,arm,time,outcome\n")
