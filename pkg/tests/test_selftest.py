"""内置自检的各项检查。"""

import time

import pytest

from core.selftest import (
    check_gel_hr,
    check_integral_identity,
    check_line_extraction,
    check_rate_fidelity,
    run_selftest,
)


def test_rate_fidelity_and_conservation():
    fidelity, conservation = check_rate_fidelity(seed=1, draws=200)
    assert fidelity["passed"], fidelity
    assert conservation["passed"], conservation


def test_rate_fidelity_full_draw_runtime():
    start = time.perf_counter()
    fidelity, _ = check_rate_fidelity(seed=0, draws=1000)
    assert time.perf_counter() - start < 5.0
    assert fidelity["draws"] == 1000
    assert fidelity["passed"], fidelity


def test_integral_identity(reference):
    report = check_integral_identity(reference, points=8)
    assert report["passed"], report


def test_gel_hr_random_configs(reference):
    report = check_gel_hr(reference, seed=2, count=10)
    assert report["configs"] == 10
    assert report["passed"], report


def test_line_extraction():
    report = check_line_extraction()
    assert report["fwhm_relative_error"] <= 1e-3
    assert report["integral_relative_error"] <= 1e-4


@pytest.mark.slow
def test_full_selftest(reference):
    checks = run_selftest(reference)
    assert len(checks) == 6
    assert all(c["passed"] for c in checks), [c for c in checks if not c["passed"]]
