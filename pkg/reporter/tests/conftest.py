import sys
from pathlib import Path

import pytest

# Collected both standalone and from the repository root; the helper module
# lives next to this file either way.
sys.path.insert(0, str(Path(__file__).parent))

from fabricate import make_run_dir


@pytest.fixture
def run_dir(tmp_path):
    return make_run_dir(tmp_path / "run")


@pytest.fixture
def zero_run_dir(tmp_path):
    return make_run_dir(tmp_path / "zero-run", zero=True, with_blowup=False)
