import csv
import json
import math
import os
import re
from pathlib import Path

import numpy as np
import pytest

from qrelay import cli
from qrelay.config import BenchConfig
from qrelay.tags import read_binary, read_csv

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).parent / "golden"
UNIT = re.compile(r"_(ps|ghz|rad|rad_per_ps|counts|frac|dimless|label|idx|bool|s)$")


def run(*argv) -> int:
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def quick_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("quick")
    assert run("run", "full-report", "--config", CONFIGS / "quick.yaml", "--out", out) == 0
    return out / "full-report"


@pytest.fixture(scope="module")
def noise_free_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("ideal")
    assert run("run", "full-report", "--config", CONFIGS / "noise_free.yaml", "--out", out) == 0
    return out / "full-report"


def _close(a, b, path="$"):
    if isinstance(a, dict):
        assert set(a) == set(b), path
        for k in a:
            _close(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            _close(x, y, f"{path}[{i}]")
    elif isinstance(a, float) and not isinstance(b, bool):
        if math.isnan(a):
            assert math.isnan(b), path
        else:
            assert b == pytest.approx(a, rel=1e-9, abs=1e-12), path
    else:
        assert a == b, path


@pytest.mark.parametrize("name,fixture", [("quick", "quick_report"), ("noise_free", "noise_free_report")])
def test_golden_summary(name, fixture, request):
    report = request.getfixturevalue(fixture)
    got = json.loads((report / "summary.json").read_text())
    golden = GOLDEN / f"{name}_summary.json"
    if os.environ.get("QRELAY_UPDATE_GOLDEN"):
        golden.write_text(json.dumps(got, indent=2, sort_keys=True) + "\n")
    _close(json.loads(golden.read_text()), got)


def test_report_contents(quick_report):
    for scen in ("entanglement", "bb84-sweep", "detuning", "oscillation", "tomography", "landscape"):
        d = quick_report / scen
        assert (d / "summary.json").exists() and (d / "summary.txt").exists()
        assert list(d.glob("*.svg")), scen
        for svg in d.glob("*.svg"):
            assert svg.read_text().lstrip().startswith("<?xml")
    assert BenchConfig.load(quick_report / "config.yaml") == BenchConfig.load(CONFIGS / "quick.yaml").replace(
        run=BenchConfig.load(quick_report / "config.yaml").run)


def test_csv_headers_carry_units(quick_report):
    files = sorted(quick_report.rglob("*.csv"))
    assert len(files) > 10
    for p in files:
        with open(p, newline="") as fh:
            head = next(csv.reader(fh))
        for col in head:
            assert UNIT.search(col), f"{p.name}: {col}"


def test_byte_identical_rerun(quick_report, tmp_path, monkeypatch):
    monkeypatch.setenv("QRELAY_THREADS", "2")
    assert run("run", "full-report", "--config", CONFIGS / "quick.yaml", "--out", tmp_path) == 0
    again = tmp_path / "full-report"
    names = sorted(p.relative_to(quick_report) for p in quick_report.rglob("*") if p.is_file())
    assert names == sorted(p.relative_to(again) for p in again.rglob("*") if p.is_file())
    for n in names:
        if n.name == "config.yaml":
            continue
        assert (quick_report / n).read_bytes() == (again / n).read_bytes(), n


def test_noise_free_report_is_ideal(noise_free_report):
    s = json.loads((noise_free_report / "summary.json").read_text())
    for key, f in s["fidelities"].items():
        assert f == pytest.approx(1.0, abs=1e-9), key
    for key, rep in s["threshold_report"].items():
        assert rep["secure_bits_per_coincidence"] == pytest.approx(1.0, abs=1e-9), key


def test_seed_changes_sampled_outputs(tmp_path):
    cfg = CONFIGS / "quick.yaml"
    assert run("run", "detuning", "--config", cfg, "--out", tmp_path / "a") == 0
    assert run("run", "detuning", "--config", cfg, "--out", tmp_path / "b", "--seed", 4) == 0
    a = (tmp_path / "a/detuning/detuning.csv").read_text()
    b = (tmp_path / "b/detuning/detuning.csv").read_text()
    assert a != b


def test_analytic_backend_has_no_sampled_columns(tmp_path):
    assert run("run", "detuning", "--config", CONFIGS / "quick.yaml", "--backend", "analytic",
               "--out", tmp_path) == 0
    with open(tmp_path / "detuning/detuning.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(r["f_mc_frac"] in ("", "nan") for r in rows)


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("source:\n  unknown_knob: 1\n")
    assert run("run", "detuning", "--config", bad, "--out", tmp_path) == cli.EXIT_CONFIG
    assert "unknown" in capsys.readouterr().err
    assert run("run", "detuning", "--config", tmp_path / "missing.yaml") == cli.EXIT_CONFIG
    bad.write_text("source:\n  depolarization: 3\n")
    assert run("simulate", "--config", bad, "--out", tmp_path / "x.bin") == cli.EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        run("run", "no-such-scenario")
    assert exc.value.code == 2


def test_invariant_violation_exit_3(tmp_path, monkeypatch, capsys):
    import qrelay.pipeline as pipeline

    real = pipeline.analytic_threefold_density

    def corrupted(scn, grid):
        d = real(scn, grid)
        d.signal[0, 0, 0] = -1.0
        return d

    monkeypatch.setattr(pipeline, "analytic_threefold_density", corrupted)
    assert run("run", "detuning", "--config", CONFIGS / "quick.yaml", "--out", tmp_path) == cli.EXIT_INVARIANT
    assert "invariant" in capsys.readouterr().err


def test_simulate_outputs(tmp_path):
    binp = tmp_path / "t.bin"
    csvp = tmp_path / "t.csv"
    assert run("simulate", "--duration", "0.01", "--seed", 5, "--out", binp) == 0
    assert run("simulate", "--duration", "0.01", "--seed", 5, "--out", csvp) == 0
    tags, digest = read_binary(binp)
    assert digest == BenchConfig().replace(run=BenchConfig().run.__class__(seed=5)).digest()
    assert tags.equals(read_csv(csvp))
    assert len(tags) > 1000 and tags.is_sorted()
    assert np.all(np.isin(tags.channels, [1, 2, 3, 4]))


def test_show_config(capsys):
    assert run("show-config") == 0
    assert BenchConfig.from_yaml(capsys.readouterr().out) == BenchConfig()
