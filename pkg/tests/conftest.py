import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class LinearAnchored:
    """f(row) = row @ w, used as a transparent stand-in for a trained model."""

    def __init__(self, w, scheme="single", input_dim=None):
        self.w = np.asarray(w, dtype=float)
        self.scheme = scheme
        self.input_dim = input_dim
        self.is_fitted = True

    def predict_anchored(self, rows):
        return (np.asarray(rows) @ self.w)[:, None]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])
    return lines.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
