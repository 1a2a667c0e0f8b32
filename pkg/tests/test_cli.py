"""命令行子命令与退出码。"""

import csv
import json

import pytest

from cli.app import main, parse_data_arg, parse_temperature_list
from core.data_io import CurveKind
from core.errors import UsageError

from conftest import REFERENCE_CONFIG


@pytest.fixture
def config_path(tmp_path):
    """μ 网格较粗的参考配置。"""
    with open(REFERENCE_CONFIG, "r", encoding="utf-8") as f:
        data = json.load(f)
    data["grid"]["mu_points"] = 801
    data["grid"]["temperatures_K"] = [10.0, 50.0, 100.0]
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2), encoding="utf-8")
    return str(path)


def read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.reader(f))


# ── 参数解析 ──

def test_parse_temperature_list():
    assert parse_temperature_list("300, 10,100,10") == [10.0, 100.0, 300.0]
    with pytest.raises(UsageError):
        parse_temperature_list("10,abc")


def test_parse_data_arg():
    assert parse_data_arg("peak=data/peak.csv") == (CurveKind.PEAK, None, "data/peak.csv")
    assert parse_data_arg("spectrum@77=s.csv") == (CurveKind.SPECTRUM, 77.0, "s.csv")
    for bad in ("peak", "color=x.csv", "spectrum=s.csv"):
        with pytest.raises(UsageError):
            parse_data_arg(bad)


def test_usage_errors_exit_1(config_path):
    assert main(["simulate", "--config", config_path]) == 1
    assert main(["explode"]) == 1
    assert main(["sweep", "--config", config_path, "--t-min", "10"]) == 1


def test_help_exits_0():
    assert main(["--help"]) == 0


def test_bad_config_exit_2(tmp_path):
    with open(REFERENCE_CONFIG, "r", encoding="utf-8") as f:
        data = json.load(f)
    data["dos"]["variance_sigma2_eV2"] = -0.01
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    assert main(["simulate", "--config", str(path), "--temp", "10", "--out", str(tmp_path / "s.csv")]) == 2
    assert main(["simulate", "--config", str(tmp_path / "absent.json"), "--temp", "10",
                 "--out", str(tmp_path / "s.csv")]) == 2


# ── simulate / sweep / ablate ──

def test_simulate_writes_spectrum(config_path, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["simulate", "--config", config_path, "--temp", "300", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == ["energy_eV", "intensity_au"]
    assert len(rows) == 802


def test_simulate_time_resolved(config_path, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["simulate", "--config", config_path, "--temp", "100", "--time", "50",
                 "--out", str(out)]) == 0
    assert read_rows(out)[0] == ["energy_eV", "intensity_au"]
    assert main(["simulate", "--config", config_path, "--temp", "100", "--time", "-1",
                 "--out", str(out)]) == 2


def test_sweep_outputs(config_path, tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", config_path, "--temps", "10,100,200,300",
                 "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["observables.csv", "spectrum_100K.csv", "spectrum_10K.csv",
                     "spectrum_200K.csv", "spectrum_300K.csv"]
    rows = read_rows(out / "observables.csv")
    assert rows[0] == ["T_K", "peak_eV", "fwhm_eV", "intensity_au", "lifetime_ps"]
    assert [float(r[0]) for r in rows[1:]] == [10.0, 100.0, 200.0, 300.0]


def test_sweep_independent_of_argument_order(config_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--config", config_path, "--temps", "10,100,300", "--out", str(a)]) == 0
    assert main(["sweep", "--config", config_path, "--temps", "300,10,100", "--out", str(b)]) == 0
    assert (a / "observables.csv").read_bytes() == (b / "observables.csv").read_bytes()


def test_sweep_range_and_workbook(config_path, tmp_path):
    out = tmp_path / "range"
    xlsx = tmp_path / "range.xlsx"
    assert main(["sweep", "--config", config_path, "--t-min", "20", "--t-max", "60",
                 "--t-steps", "3", "--out", str(out), "--xlsx", str(xlsx)]) == 0
    assert [float(r[0]) for r in read_rows(out / "observables.csv")[1:]] == [20.0, 40.0, 60.0]
    assert xlsx.exists()


def test_ablate_no_gel(config_path, tmp_path):
    out = tmp_path / "no_gel"
    assert main(["ablate", "--config", config_path, "--scenario", "no-gel",
                 "--temps", "50,300", "--out", str(out)]) == 0
    rows = read_rows(out / "observables.csv")[1:]
    peak = {float(r[0]): float(r[1]) for r in rows}
    assert peak[300.0] >= peak[50.0]


def test_ablate_unknown_scenario(config_path, tmp_path):
    assert main(["ablate", "--config", config_path, "--scenario", "no-phonons",
                 "--out", str(tmp_path)]) == 1


# ── fit / limits / selftest ──

def test_fit_report(config_path, tmp_path):
    data = tmp_path / "obs"
    assert main(["sweep", "--config", config_path, "--temps", "10,100,200", "--out", str(data)]) == 0
    report_path = tmp_path / "fit.json"
    assert main(["fit", "--config", config_path,
                 "--data", f"peak={data / 'observables.csv'}",
                 "--data", f"lifetime={data / 'observables.csv'}",
                 "--max-evaluations", "20", "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text(encoding="utf-8"))
    for key in ("config_hash", "data", "seed", "parameters", "objective_value",
                "n_evaluations", "converged", "per_curve_residuals"):
        assert key in report
    assert len(report["data"]) == 2
    assert len(report["data"][0]["sha256"]) == 64
    assert {p["name"] for p in report["parameters"]} >= {"laws.gamma_R0"}


def test_fit_requires_data(config_path, tmp_path):
    assert main(["fit", "--config", config_path, "--out", str(tmp_path / "r.json")]) == 1
    assert main(["fit", "--config", config_path, "--data", f"peak={tmp_path / 'none.csv'}",
                 "--out", str(tmp_path / "r.json")]) == 2


def test_limits(config_path, tmp_path):
    report_path = tmp_path / "limits.json"
    assert main(["limits", "--config", config_path, "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text(encoding="utf-8"))
    names = [c["check"] for c in report["checks"]]
    assert names == ["bose_identity", "gel_huang_rhys", "redshift_bound", "arrhenius",
                     "high_temp_intensity"]
    assert all(c["passed"] for c in report["checks"])
    assert report["huang_rhys"]["S0"] == pytest.approx(report["huang_rhys"]["f"] / 2)


@pytest.mark.slow
def test_selftest(config_path, tmp_path):
    report_path = tmp_path / "selftest.json"
    assert main(["selftest", "--config", config_path, "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert all(c["passed"] for c in report["checks"])
