import csv

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from deltauq.exceptions import NotFittedError
from deltauq.smo import SmoConfig, expected_improvement, propose, run_smo

finite = st.floats(-1e3, 1e3)


def test_ei_examples():
    assert expected_improvement(0.0, 0.0, 1.0) == 0.0
    # the 1e-9 sigma floor leaves at most 1e-9 * phi(0) at mu == best
    assert expected_improvement(1.0, 0.0, 1.0) == pytest.approx(0.0, abs=1e-9)
    assert expected_improvement(2.0, 0.0, 1.0) == pytest.approx(1.0)


def test_ei_matches_monte_carlo():
    g = np.random.default_rng(0).standard_normal(1_000_000) + 1.0
    samples = np.maximum(g, 0.0)
    se = samples.std() / np.sqrt(samples.size)
    ei = expected_improvement(1.0, 1.0, 0.0)
    assert abs(ei - samples.mean()) <= 3 * se
    assert ei == pytest.approx(1.0833, abs=1e-4)


@given(finite, st.floats(0, 1e3), finite)
def test_ei_nonnegative(mu, sigma, best):
    assert expected_improvement(mu, sigma, best) >= 0.0


@given(finite, finite)
def test_ei_sigma_to_zero_limit(mu, best):
    for sigma in 10.0 ** -np.arange(1, 10):
        ei = expected_improvement(mu, sigma, best)
        assert ei >= max(0.0, mu - best) - 1e-9
        # EI exceeds the hinge by at most sigma * phi(0)
        assert ei - max(0.0, mu - best) <= sigma * 0.3990 + 1e-9
    assert expected_improvement(mu, 1e-9, best) == pytest.approx(max(0.0, mu - best), abs=1e-9)


@given(st.floats(-10, 10), st.floats(0.01, 10), st.floats(-10, 10), st.floats(0.01, 5))
def test_ei_increasing_in_mu(mu, sigma, best, step):
    # outside ~20 sd below the incumbent both values underflow to 0
    assume((mu - best) / sigma > -20)
    assert expected_improvement(mu + step, sigma, best) > expected_improvement(mu, sigma, best)


def test_ei_errors_and_vector_form():
    with pytest.raises(ValueError):
        expected_improvement(np.nan, 1.0, 0.0)
    with pytest.raises(ValueError):
        expected_improvement(0.0, -1.0, 0.0)
    out = expected_improvement(np.array([0.0, 1.0]), np.array([1.0, 0.0]), 0.5)
    assert out.shape == (2,) and out[1] == pytest.approx(0.5)


class FixedModel:
    """Predicts given mean/variance per candidate row, ignoring anchors."""

    is_fitted = True

    def __init__(self, mu, var):
        self.mu, self.var = np.asarray(mu, float), np.asarray(var, float)

    def predict(self, pool, anchors):
        return self.mu[:, None], self.var[:, None], None


def test_propose_examples():
    pool = np.zeros((1, 2))
    assert propose(FixedModel([0.0], [1.0]), None, pool, 5.0)[0] == 0
    idx, ei, mu, sigma = propose(FixedModel([0.0, 2.0, -1.0], [0, 0, 0]), None, np.zeros((3, 1)), 1.0)
    assert idx == 1 and ei == pytest.approx(1.0) and sigma == 0.0
    assert propose(FixedModel([3.0, 3.0], [1.0, 1.0]), None, np.zeros((2, 1)), 0.0)[0] == 0


def test_propose_errors():
    m = FixedModel([0.0], [0.0])
    with pytest.raises(ValueError):
        propose(m, None, np.zeros((0, 1)), 0.0)
    m.is_fitted = False
    with pytest.raises(NotFittedError):
        propose(m, None, np.zeros((1, 1)), 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SmoConfig(n_init=1)
    with pytest.raises(ValueError):
        SmoConfig(pool_size=0)


def test_zero_iterations_returns_initial_design():
    tr = run_smo(SmoConfig("sinusoid", n_iterations=0, seed=3))
    assert tr.records == [] and tr.best == tr.init_y.max()
    assert tr.init_x.shape == (6, 1)


FAST = dict(n_iterations=4, pool_size=128, refit_epochs=10, hidden_layers=(16, 16))


def test_trace_invariants_and_determinism(tmp_path):
    a = run_smo(SmoConfig("booth", seed=1, **FAST))
    b = run_smo(SmoConfig("booth", seed=1, **FAST))
    assert len(a.records) == 4
    assert np.all(np.diff(a.best_so_far) >= 0)
    assert a.best_so_far[0] >= a.init_y.max()
    assert [r.x for r in a.records] == [r.x for r in b.records]
    for r in a.records:
        assert np.all(np.abs(r.x) <= 10) and r.ei >= 0 and r.sigma >= 0
    path = tmp_path / "trace.csv"
    a.to_csv(path)
    rows = list(csv.reader(path.open(encoding="utf-8")))
    assert rows[0] == ["iteration", "x0", "x1", "y", "best", "ei", "mu", "sigma"]
    assert len(rows) == 1 + 6 + 4


def test_warm_start_runs():
    tr = run_smo(SmoConfig("sinusoid", seed=0, warm_start=True, **FAST))
    assert len(tr.records) == 4
