import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from framebow.errors import FormatError
from framebow.features import (
    BowHistogram,
    apply_scaler,
    build_histogram,
    fit_scaler,
    load_scaler,
    save_scaler,
)


def hist(counts):
    counts = np.asarray(counts, dtype=np.int64)
    return BowHistogram(counts=counts, total=int(counts.sum()))


class TestBuildHistogram:
    def test_basic_counts(self):
        h = build_histogram([0, 0, 2], 4)
        assert h.counts.tolist() == [2, 0, 1, 0]
        assert h.total == 3

    def test_empty(self):
        h = build_histogram([], 3)
        assert h.counts.tolist() == [0, 0, 0]
        assert h.total == 0

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="word id 4"):
            build_histogram([0, 4], 4)

    @given(st.lists(st.integers(0, 9), max_size=200))
    @settings(max_examples=30, deadline=None)
    def test_sum_equals_total(self, ids):
        h = build_histogram(ids, 10)
        assert h.counts.sum() == h.total == len(ids)


class TestScaler:
    def test_fit_example(self):
        s = fit_scaler([hist([0, 10]), hist([4, 10])])
        assert s.mins.tolist() == [0, 10]
        assert s.maxs.tolist() == [4, 10]
        assert s.degenerate_bins().tolist() == [False, True]

    def test_single_histogram_all_degenerate(self):
        s = fit_scaler([hist([3, 7])])
        assert s.degenerate_bins().all()
        assert apply_scaler(hist([3, 7]), s).tolist() == [0.0, 0.0]

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="zero histograms"):
            fit_scaler([])

    def test_midpoint_and_extrapolation(self):
        s = fit_scaler([hist([0]), hist([10])])
        assert apply_scaler(hist([5]), s)[0] == 0.0
        assert apply_scaler(hist([12]), s)[0] == pytest.approx(1.4)
        assert apply_scaler(hist([0]), s)[0] == -1.0
        assert apply_scaler(hist([10]), s)[0] == 1.0

    def test_training_histograms_stay_in_range(self):
        rng = np.random.default_rng(0)
        hists = [hist(rng.integers(0, 50, size=20)) for _ in range(30)]
        s = fit_scaler(hists)
        for h in hists:
            v = apply_scaler(h, s)
            assert v.min() >= -1.0 - 1e-12 and v.max() <= 1.0 + 1e-12

    def test_order_preservation(self):
        s = fit_scaler([hist([0]), hist([9])])
        vals = [apply_scaler(hist([c]), s)[0] for c in range(10)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_dimension_mismatch(self):
        s = fit_scaler([hist([0, 1])])
        with pytest.raises(ValueError, match="bins"):
            apply_scaler(hist([0, 1, 2]), s)


class TestNormalizedScaler:
    def test_fit_on_frequencies(self):
        s = fit_scaler([hist([1, 3]), hist([3, 1])], normalized=True)
        assert s.normalized
        assert s.mins.tolist() == [0.25, 0.25]
        assert s.maxs.tolist() == [0.75, 0.75]
        v = apply_scaler(hist([2, 2]), s)
        assert v.tolist() == [0.0, 0.0]

    def test_total_invariance(self):
        # frequency scaling makes histograms with proportional counts equal
        s = fit_scaler([hist([1, 3]), hist([3, 1])], normalized=True)
        a = apply_scaler(hist([10, 30]), s)
        b = apply_scaler(hist([1, 3]), s)
        assert np.array_equal(a, b)

    def test_empty_histogram_no_crash(self):
        s = fit_scaler([hist([1, 3])], normalized=True)
        v = apply_scaler(hist([0, 0]), s)
        assert np.all(np.isfinite(v))

    def test_roundtrip_preserves_flag(self, tmp_path):
        s = fit_scaler([hist([1, 3]), hist([3, 1])], normalized=True)
        path = tmp_path / "norm.range"
        save_scaler(path, s)
        back = load_scaler(path)
        assert back.normalized
        probe = hist([5, 15])
        assert np.array_equal(apply_scaler(probe, s), apply_scaler(probe, back))


class TestScalerFile:
    def test_roundtrip_bitexact(self, tmp_path):
        rng = np.random.default_rng(5)
        hists = [hist(rng.integers(0, 40, size=32)) for _ in range(10)]
        s = fit_scaler(hists)
        path = tmp_path / "scale.txt"
        save_scaler(path, s)
        back = load_scaler(path)
        probe = hist(rng.integers(0, 60, size=32))
        a, b = apply_scaler(probe, s), apply_scaler(probe, back)
        assert np.array_equal(a, b)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "x.txt"
        p.write_text("not a scaler\n")
        with pytest.raises(FormatError, match="range file"):
            load_scaler(p)

    def test_truncated(self, tmp_path):
        p = tmp_path / "x.txt"
        p.write_text("framebow-scale 1\n3\n0 0.0 1.0\n")
        with pytest.raises(FormatError, match="expected 3"):
            load_scaler(p)
