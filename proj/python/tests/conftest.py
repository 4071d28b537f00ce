import os
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def fixtures() -> Path:
    env = os.environ.get("NETROOT_FIXTURE_DIR")
    return Path(env) if env else Path(__file__).resolve().parents[2] / "fixtures"
