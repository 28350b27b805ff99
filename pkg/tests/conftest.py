import os
import tempfile

import pytest

# keep the lattice cache inside the test session unless the caller points elsewhere
os.environ.setdefault("HYBRIDRELAY_CACHE", tempfile.mkdtemp(prefix="hybridrelay-test-"))

from hybridrelay.config import default_config, load_config, profile_path  # noqa: E402


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def ppp_cfg():
    return load_config(profile_path("ppp_mu4"))


@pytest.fixture(scope="session")
def small_cfg(cfg):
    """Reference parameters on a 60 m window, cheap enough for quick simulations."""
    return cfg.replace(window_radius=60.0)
