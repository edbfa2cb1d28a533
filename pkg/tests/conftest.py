import numpy as np
import pytest

from app.core.config import settings


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    """Route experiment artifacts into a per-test directory"""
    monkeypatch.setattr(settings, "OUTPUT_ROOT", tmp_path)
    return tmp_path
