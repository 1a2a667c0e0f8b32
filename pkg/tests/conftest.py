"""共享夹具：参考配置及其单能级、两能级约化。"""

import os
from dataclasses import replace

import pytest

from core.config_io import load_config
from core.limits import two_level_variant
from core.sweep import single_level_variant

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
REFERENCE_CONFIG = os.path.join(ROOT, "config.json")


@pytest.fixture(scope="session")
def reference_run():
    return load_config(REFERENCE_CONFIG)


@pytest.fixture(scope="session")
def reference(reference_run):
    return reference_run.model


@pytest.fixture(scope="session")
def coarse(reference):
    """μ 网格较粗的参考模型，用于较慢的扫描类测试。"""
    return replace(reference, mu_points=801)


@pytest.fixture(scope="session")
def single_level(reference):
    return single_level_variant(reference)


@pytest.fixture(scope="session")
def two_level(reference):
    return two_level_variant(reference)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path
