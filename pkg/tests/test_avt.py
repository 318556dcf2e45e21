import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from headsmith import avt
from headsmith.data import FeatureMatrix, make_distinct_variance_features
from headsmith.errors import ConfigError, DataError, ShapeError


def brute_kept(values, p):
    """Independent filter: statistics.pvariance, sorted-rank interpolation, v >= j."""
    variances = [statistics.pvariance(col) for col in np.asarray(values).T.tolist()]
    s = sorted(variances)
    t = (len(s) - 1) * p / 100
    lo = int(t)
    j = s[lo] if lo + 1 >= len(s) else s[lo] + (t - lo) * (s[lo + 1] - s[lo])
    return [i for i, v in enumerate(variances) if v >= j]


class TestFeatureVariances:
    def test_constant_column_is_zero(self):
        v = avt.feature_variances(np.array([[3.0, 1.0], [3.0, 2.0], [3.0, 3.0]]))
        assert v[0] == 0.0

    def test_population_variance(self):
        v = avt.feature_variances(np.array([[1.0], [2.0], [3.0]]))
        assert v[0] == pytest.approx(2 / 3, abs=1e-15)

    def test_sample_variance_with_ddof(self):
        v = avt.feature_variances(np.array([[1.0], [2.0], [3.0]]), ddof=1)
        assert v[0] == pytest.approx(1.0)

    def test_single_sample_all_zero(self):
        np.testing.assert_array_equal(avt.feature_variances(np.array([[1.0, -4.0, 9.0]])), 0.0)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            avt.feature_variances(np.empty((0, 3)))

    def test_accepts_feature_matrix(self):
        fm = FeatureMatrix.from_arrays([[1.0, 0.0], [3.0, 0.0]], [0, 1])
        np.testing.assert_allclose(avt.feature_variances(fm), [1.0, 0.0])

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 6)), elements=st.floats(-1e3, 1e3)))
    def test_matches_statistics_module(self, x):
        expected = [statistics.pvariance(col) for col in x.T.tolist()]
        np.testing.assert_allclose(avt.feature_variances(x), expected, rtol=1e-9, atol=1e-9)


class TestPercentile:
    def test_endpoints(self):
        vals = [4.0, -1.0, 7.5, 2.0]
        assert avt.percentile(vals, 0) == -1.0
        assert avt.percentile(vals, 100) == 7.5

    def test_midpoint(self):
        assert avt.percentile([0.0, 10.0], 50) == 5.0

    def test_quarter(self):
        # t = 3 * 0.25 = 0.75 -> 1 + 0.75 * (2 - 1)
        assert avt.percentile([4.0, 3.0, 2.0, 1.0], 25) == pytest.approx(1.75)

    def test_single_value(self):
        assert avt.percentile([3.0], 37.0) == 3.0

    @pytest.mark.parametrize("p", [-0.1, 100.1, float("nan")])
    def test_out_of_range(self, p):
        with pytest.raises(ConfigError):
            avt.percentile([1.0, 2.0], p)

    def test_empty(self):
        with pytest.raises(DataError):
            avt.percentile([], 50)

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40),
        st.floats(0, 100),
    )
    def test_matches_numpy_linear(self, vals, p):
        assert avt.percentile(vals, p) == pytest.approx(np.percentile(vals, p, method="linear"), rel=1e-12, abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40), st.floats(0, 100), st.floats(0, 100))
    def test_monotone_in_p(self, vals, p1, p2):
        lo, hi = sorted((p1, p2))
        assert avt.percentile(vals, lo) <= avt.percentile(vals, hi)


class TestFit:
    def test_two_feature_example(self):
        x = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        sel = avt.fit(x, 50)
        assert sel.threshold == pytest.approx(1 / 3)
        assert sel.kept_indices.tolist() == [0]
        out = avt.transform(sel, x)
        np.testing.assert_array_equal(out, x[:, [0]])

    @pytest.mark.parametrize(
        "width, expected",
        [(4096, {1.5: 4034, 50.0: 2048, 98.5: 62}), (240, {1.5: 236, 50.0: 120, 98.5: 4})],
    )
    def test_published_dimensionalities(self, width, expected):
        data = make_distinct_variance_features(width, n_samples=32, seed=width)
        assert len(set(avt.feature_variances(data).tolist())) == width
        for p, count in expected.items():
            assert avt.fit(data, p).n_kept == count
            assert avt.expected_kept_count(width, p) == count

    def test_zero_threshold_keeps_static_features(self):
        x = np.array([[1.0, 0.0, 2.0], [1.0, 1.0, 2.0]])
        assert avt.fit(x, 0).kept_indices.tolist() == [0, 1, 2]
        assert avt.fit(x, 0, strict=True).kept_indices.tolist() == [1]

    def test_strict_all_static_raises(self):
        with pytest.raises(DataError):
            avt.fit(np.ones((3, 2)), 50, strict=True)

    def test_single_sample_warns_and_keeps_all(self, caplog):
        sel = avt.fit(np.array([[1.0, 2.0, 3.0]]), 98.5)
        assert sel.n_kept == 3
        assert "single sample" in caplog.text

    def test_p100_keeps_all_argmax_ties(self):
        x = np.array([[0.0, 0.0, 1.0, 0.0], [2.0, 2.0, 2.0, 0.0]])
        assert avt.fit(x, 100).kept_indices.tolist() == [0, 1]

    def test_max_variance_feature_always_kept(self, np_rng):
        x = np_rng.normal(size=(20, 15)) * np_rng.uniform(0.1, 3, size=15)
        top = int(np.argmax(avt.feature_variances(x)))
        for p in np.linspace(0, 100, 21):
            assert top in avt.fit(x, p).kept_indices

    @settings(max_examples=100, deadline=None)
    @given(
        arrays(np.float64, st.tuples(st.integers(1, 15), st.integers(1, 15)), elements=st.integers(-20, 20).map(float)),
        st.floats(0, 100),
    )
    def test_oracle_equivalence(self, x, p):
        assert avt.fit(x, p).kept_indices.tolist() == brute_kept(x, p)

    @settings(max_examples=100, deadline=None)
    @given(
        arrays(np.float64, st.tuples(st.integers(2, 10), st.integers(1, 10)), elements=st.floats(-100, 100)),
        st.floats(0, 100),
        st.floats(0, 100),
    )
    def test_monotone_kept_sets(self, x, p1, p2):
        lo, hi = sorted((p1, p2))
        assert set(avt.fit(x, hi).kept_indices) <= set(avt.fit(x, lo).kept_indices)

    def test_selector_invariants(self, np_rng):
        x = np_rng.normal(size=(30, 25))
        sel = avt.fit(x, 40)
        k = sel.kept_indices
        assert np.all(np.diff(k) > 0) and k.min() >= 0 and k.max() < sel.width
        assert set(k) == {i for i, v in enumerate(sel.variances) if v >= sel.threshold}
        assert sel.threshold == avt.percentile(sel.variances, 40)


class TestTransform:
    def test_identity_selection(self, blobs):
        sel = avt.fit(blobs, 0)
        out = avt.transform(sel, blobs)
        np.testing.assert_array_equal(out.values, blobs.values)
        assert out.sample_ids == blobs.sample_ids
        assert out.patient_ids == blobs.patient_ids
        np.testing.assert_array_equal(out.labels, blobs.labels)

    def test_width_mismatch(self, blobs):
        sel = avt.fit(blobs, 50)
        once = avt.transform(sel, blobs)
        with pytest.raises(ShapeError):
            avt.transform(sel, once)

    def test_uses_fitted_threshold_not_refit(self, np_rng):
        train = np_rng.normal(size=(40, 10)) * np.arange(1, 11)
        val = np_rng.normal(size=(40, 10)) * np.arange(10, 0, -1)  # opposite variance order
        sel = avt.fit(train, 50)
        out = avt.transform(sel, val)
        np.testing.assert_array_equal(out, val[:, sel.kept_indices])
        assert sel.kept_indices.tolist() == [5, 6, 7, 8, 9]
        assert avt.fit(val, 50).kept_indices.tolist() != sel.kept_indices.tolist()


def test_selector_json_round_trip(tmp_path, np_rng):
    sel = avt.fit(np_rng.normal(size=(10, 8)), 37.5)
    path = tmp_path / "sel.json"
    sel.save(path)
    back = avt.VarianceSelector.load(path)
    assert back.threshold == sel.threshold
    np.testing.assert_array_equal(back.variances, sel.variances)
    np.testing.assert_array_equal(back.kept_indices, sel.kept_indices)
    doc = sel.to_dict()
    assert set(doc) >= {"percentile", "threshold", "width", "variances", "kept_indices"}


def test_selector_rejects_bad_indices():
    with pytest.raises(DataError):
        avt.VarianceSelector.from_dict(
            {"percentile": 50, "threshold": 0.1, "width": 2, "variances": [0.1, 0.2], "kept_indices": [1, 1]}
        )
