import numpy as np
import pytest

from uavris.config import SystemConfig


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tiny_config(**overrides):
    """Single user, single BS antenna, one or two RIS elements."""
    base = dict(K=1, M_y=1, M_z=1, N_x=1, N_y=1, user_positions=((4.0, 7.0, 0.0),), T=5)
    base.update(overrides)
    return SystemConfig(**base)


CRITERIA = {
    1: "algorithm ordering",
    2: "jitter robustness",
    3: "EH model anchors",
    4: "geometry suite",
    5: "learning-core oracles",
    6: "baseline oracle",
    7: "environment contract",
    8: "toy-environment sanity",
}


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if results is None:
        return
    terminalreporter.section("acceptance criteria")
    for n, name in CRITERIA.items():
        if n in results:
            ok, detail = results[n]
            terminalreporter.write_line(f"criterion {n} ({name}): {'PASS' if ok else 'FAIL'}: {detail}")
        else:
            terminalreporter.write_line(f"criterion {n} ({name}): NOT RUN")
