import numpy as np
import pytest

from config import settings


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def run_root(tmp_path, monkeypatch):
    """Point the run manager at a temporary output directory."""
    monkeypatch.setattr(settings, "output_dir", str(tmp_path / "runs"))
    return tmp_path / "runs"
