import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import LinearAnchored
from deltauq.encoding import (
    AnchoredInput,
    AnchorPrior,
    EncodingScheme,
    decode,
    encode,
    encode_rows,
    marginalize,
    marginalized_predict,
    predictive_entropy,
    sample_anchors,
    scale_logits,
    softmax,
    summarize,
)
from deltauq.exceptions import DimensionError

EPS = np.finfo(float).eps


def test_single_anchor_examples():
    (a,) = encode([1, 2], [[0.5, 0.5]], "single")
    np.testing.assert_array_equal(a.anchor, [0.5, 0.5])
    np.testing.assert_array_equal(a.encoded, [0.5, 1.5])
    (b,) = encode([1, 2], [[0, 0]], "single")
    np.testing.assert_array_equal(b.encoded, [1, 2])


def test_double_anchor_example():
    (a,) = encode([3], [[1], [1]], "double")
    assert [r.tolist() for r in a.anchors] == [[1.0], [1.0]]
    np.testing.assert_array_equal(a.encoded, [1.0])
    np.testing.assert_array_equal(a.vector, [1.0, 1.0, 1.0])


def test_decode_examples():
    single = EncodingScheme.SINGLE
    a = AnchoredInput((np.array([0.5, 0.5]),), np.array([0.5, 1.5]))
    np.testing.assert_array_equal(decode(a, single), [1, 2])
    a = AnchoredInput((np.array([7.0]),), np.array([-7.0]))
    np.testing.assert_array_equal(decode(a, single), [0])
    a = AnchoredInput((np.array([0.0, 0.0]),), np.array([1.0, 2.0]))
    np.testing.assert_array_equal(decode(a, "identity"), [1, 2])


def test_identity_keeps_input_and_anchor_is_distractor():
    out = encode([1, 2], [[9, 9], [-3, 4]], "identity")
    for a in out:
        np.testing.assert_array_equal(a.encoded, [1, 2])


def test_encode_errors():
    with pytest.raises(ValueError, match="empty"):
        encode([1, 2], [], "single")
    with pytest.raises(DimensionError, match="anchor 1"):
        encode([1, 2], [[0, 0], [0, 0, 0]], "single")
    with pytest.raises(ValueError, match="pairwise"):
        encode([1], [[1], [2], [3]], "double")


def test_decode_wrong_anchor_count():
    a = AnchoredInput((np.array([1.0]),), np.array([1.0]))
    with pytest.raises(DimensionError):
        decode(a, "double")


def test_scheme_aliases_and_width():
    assert EncodingScheme.parse("x-r") is EncodingScheme.SINGLE
    assert EncodingScheme.parse("X") is EncodingScheme.IDENTITY
    assert EncodingScheme.parse("x-r1-r2") is EncodingScheme.DOUBLE
    assert EncodingScheme.SINGLE.width(4) == 8
    assert EncodingScheme.DOUBLE.width(4) == 12
    with pytest.raises(ValueError):
        EncodingScheme.parse("triple")


def test_encode_rows_layout_matches_encode(rng):
    X = rng.normal(size=(5, 3))
    R = rng.normal(size=(5, 3))
    rows = encode_rows(X, R, "single")
    for i in range(5):
        np.testing.assert_array_equal(rows[i], encode(X[i], [R[i]], "single")[0].vector)
    R2 = rng.normal(size=(5, 2, 3))
    rows = encode_rows(X, R2, "double")
    assert rows.shape == (5, 9)
    np.testing.assert_array_equal(rows[:, :3], R2[:, 0])
    np.testing.assert_array_equal(rows[:, 3:6], R2[:, 1])
    with pytest.raises(DimensionError):
        encode_rows(X, R[:, :2], "single")


def reconstruction_error_ratio(n_cases=10_000, seed=0):
    """Worst |decode(encode(x)) - x| / (eps * max|x|) over random cases.

    Anchors are drawn on the scale of the input they are paired with.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for scheme in ("single", "double"):
        dims = rng.integers(1, 9, n_cases)
        for d in np.unique(dims):
            m = int(np.sum(dims == d))
            scale = 10.0 ** rng.uniform(-6, 6, (m, 1))
            X = rng.uniform(-1, 1, (m, d)) * scale
            amp = np.abs(X).max(axis=1, keepdims=True)
            n_anchor = 2 if scheme == "double" else 1
            R = rng.uniform(-1, 1, (m, n_anchor, d)) * amp[:, None, :]
            for i in range(m):
                (a,) = encode(X[i], list(R[i]), scheme)
                err = np.abs(decode(a, scheme) - X[i]).max()
                worst = max(worst, err / (EPS * amp[i, 0]))
    return worst


def test_reconstruction_ten_thousand_cases():
    assert reconstruction_error_ratio(10_000) <= 4.0


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(
    arrays(float, st.integers(1, 6), elements=finite),
    st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**32 - 1),
)
def test_reconstruction_property(x, f1, f2, seed):
    amp = np.abs(x).max()
    rng = np.random.default_rng(seed)
    r1 = rng.uniform(-1, 1, x.shape) * amp * f1
    r2 = rng.uniform(-1, 1, x.shape) * amp * f2
    (a,) = encode(x, [r1], "single")
    assert np.all(np.abs(decode(a, "single") - x) <= 4 * EPS * amp)
    (b,) = encode(x, [r1, r2], "double")
    assert np.all(np.abs(decode(b, "double") - x) <= 4 * EPS * amp)


def test_anchor_sampling_examples():
    p = AnchorPrior.train_distribution([[1], [2], [3]], seed=4)
    out = sample_anchors(p, 3)
    assert out.shape == (3, 1) and set(out[:, 0]) <= {1.0, 2.0, 3.0}
    normal = AnchorPrior.standard_normal(2, seed=0)
    assert np.all(np.abs(sample_anchors(normal, 1000).mean(axis=0)) <= 0.12)
    ext = AnchorPrior.external([[5, 5]])
    np.testing.assert_array_equal(sample_anchors(ext, 2), [[5, 5], [5, 5]])


def test_anchor_prior_errors_and_copy():
    with pytest.raises(ValueError):
        sample_anchors(AnchorPrior.standard_normal(2), 0)
    with pytest.raises(ValueError):
        AnchorPrior.train_distribution(np.empty((0, 2)))
    data = np.ones((3, 2))
    p = AnchorPrior.train_distribution(data)
    data[0, 0] = 99.0
    assert p.data[0, 0] == 1.0
    q = AnchorPrior.from_dict(p.to_dict())
    assert q.fingerprint() == p.fingerprint()


def test_sampling_support_many_seeds():
    data = np.arange(10.0)[:, None]
    p = AnchorPrior.train_distribution(data)
    for s in range(20):
        out = sample_anchors(p, 50, np.random.default_rng(s))
        assert set(out[:, 0]) <= set(data[:, 0])


class Constant:
    scheme = "single"
    is_fitted = True

    def predict_anchored(self, rows):
        return np.full((rows.shape[0], 1), 3.5)


def test_constant_model_has_zero_variance():
    s = marginalized_predict(Constant(), [1.0, 2.0], AnchorPrior.standard_normal(2), 5)
    assert s.mean[0] == 3.5 and s.variance[0] == 0.0 and s.k == 5


def test_single_anchor_gives_zero_variance(rng):
    model = LinearAnchored(rng.normal(size=4))
    s = marginalized_predict(model, [0.3, -1.0], AnchorPrior.standard_normal(2), 1)
    assert s.variance[0] == 0.0


def test_anchor_cancellation_linear_model():
    model = LinearAnchored(np.ones(4))
    s = marginalized_predict(model, [1.0, 2.0], AnchorPrior.standard_normal(2, seed=3), 50)
    assert s.mean[0] == pytest.approx(3.0)
    assert s.variance[0] == pytest.approx(0.0, abs=1e-24)


@given(
    arrays(float, 3, elements=st.floats(-100, 100)),
    arrays(float, (7, 3), elements=st.floats(-100, 100)),
    arrays(float, 3, elements=st.floats(-5, 5)),
)
def test_anchor_cancellation_property(x, anchors, w):
    # output depends on the row only through anchor + encoded
    model = LinearAnchored(np.concatenate([w, w]))
    per = marginalize(model, x[None, :], anchors)
    _, var = summarize(per)
    scale = max(1.0, np.abs(per).max())
    assert var[0, 0] <= (1e-12 * scale) ** 2 * 100


def test_identical_anchors_give_zero_variance(rng):
    model = LinearAnchored(rng.normal(size=4))
    per = marginalize(model, [[1.0, 2.0]], np.tile([[0.4, -0.1]], (6, 1)))
    assert summarize(per)[1][0, 0] == 0.0


def test_population_variance(rng):
    per = rng.normal(size=(4, 3))
    mean, var = summarize(per)
    np.testing.assert_allclose(mean, per.mean(axis=0))
    np.testing.assert_allclose(var, per.var(axis=0, ddof=0))


def test_marginalized_predict_is_deterministic(rng):
    model = LinearAnchored(rng.normal(size=4))
    prior = AnchorPrior.standard_normal(2)
    a = marginalized_predict(model, [1, 2], prior, 8, np.random.default_rng(5))
    b = marginalized_predict(model, [1, 2], prior, 8, np.random.default_rng(5))
    np.testing.assert_array_equal(a.per_anchor, b.per_anchor)


def test_marginalize_rejects_wrong_dimension(rng):
    model = LinearAnchored(rng.normal(size=4), input_dim=2)
    with pytest.raises(DimensionError):
        marginalize(model, [[1.0, 2.0, 3.0]], np.zeros((2, 3)))


def test_scale_logits_examples():
    np.testing.assert_allclose(scale_logits([2, -2], [0, 0]), [1, -1])
    np.testing.assert_allclose(scale_logits([2], [0.25]), [0.5])
    np.testing.assert_allclose(scale_logits([2], [0.9]), [0.1])


def test_scale_logits_scalar_and_errors():
    out = scale_logits([[2.0, 4.0]], [[0.1, 0.3]], scalar=True)
    np.testing.assert_allclose(out, [[0.6, 1.2]])
    with pytest.raises(ValueError):
        scale_logits([1.0], [-0.1])
    with pytest.raises(DimensionError):
        scale_logits([1.0, 2.0], [0.1])


@given(arrays(float, st.integers(1, 10), elements=st.floats(-50, 50)))
def test_zero_variance_scaling_keeps_argmax(logits):
    out = scale_logits(logits, np.zeros_like(logits))
    np.testing.assert_array_equal(out, logits * 0.5)
    assert np.argmax(out) == np.argmax(logits)


def test_predictive_entropy_examples():
    assert predictive_entropy([1, 0, 0]) == 0.0
    assert predictive_entropy([0.5, 0.5]) == pytest.approx(math.log(2))
    assert predictive_entropy([0.25] * 4) == pytest.approx(math.log(4))
    np.testing.assert_allclose(predictive_entropy([[1, 0], [0.5, 0.5]]), [0, math.log(2)])
    with pytest.raises(ValueError):
        predictive_entropy([0.5, 0.6])


def test_softmax_rows_sum_to_one(rng):
    p = softmax(rng.normal(size=(10, 4)) * 100)
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
