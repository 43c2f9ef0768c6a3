import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from framebow.dsift import DsiftParams, extract_dsift, grid_count, to_gray
from framebow.ingest import RgbFrame
from framebow.roi import RoiSpec

from oracles import dsift_reference


def rgb_const(r, g, b, w=16, h=12):
    data = np.zeros((h, w, 3), dtype=np.uint8)
    data[:] = (r, g, b)
    return RgbFrame(0, 0, w, h, data)


class TestToGray:
    def test_white(self):
        gray = to_gray(rgb_const(255, 255, 255), RoiSpec(0, 0, 16, 12))
        assert np.allclose(gray, 1.0)

    def test_black(self):
        gray = to_gray(rgb_const(0, 0, 0), RoiSpec(0, 0, 16, 12))
        assert np.allclose(gray, 0.0)

    def test_red(self):
        gray = to_gray(rgb_const(255, 0, 0), RoiSpec(0, 0, 16, 12))
        assert np.allclose(gray, 0.299, atol=1e-6)

    def test_crop_dimensions(self):
        gray = to_gray(rgb_const(9, 9, 9), RoiSpec(2, 3, 5, 7))
        assert gray.shape == (7, 5)

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError, match="bounds"):
            to_gray(rgb_const(0, 0, 0), RoiSpec(10, 0, 16, 12))


class TestCountLaw:
    def test_200x200_default(self):
        image = np.random.default_rng(0).random((200, 200))
        ds = extract_dsift(image)
        assert len(ds) == 37 ** 2 + 35 ** 2 == 2594

    @given(
        w=st.integers(8, 90),
        h=st.integers(8, 90),
        step=st.integers(1, 9),
        sizes=st.lists(st.integers(1, 8), min_size=1, max_size=3, unique=True),
    )
    @settings(max_examples=40, deadline=None)
    def test_formula(self, w, h, step, sizes):
        image = np.zeros((h, w))
        params = DsiftParams(grid_step=step, bin_sizes=tuple(sizes))
        ds = extract_dsift(image, params)
        expected = sum(grid_count(w, h, step, s) for s in sizes)
        assert len(ds) == expected

    def test_too_small_image_yields_empty_set(self):
        ds = extract_dsift(np.zeros((10, 10)), DsiftParams(bin_sizes=(5,)))
        assert len(ds) == 0


class TestDescriptorValues:
    def test_constant_image_all_zero(self):
        ds = extract_dsift(np.full((40, 40), 0.37))
        assert np.all(ds.descriptors == 0.0)

    def test_matches_reference_on_random_images(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            image = rng.random((28, 28))
            ds = extract_dsift(image)
            ref, pos, scales = dsift_reference(image)
            assert len(ds) == len(ref)
            assert np.array_equal(ds.positions, pos)
            assert np.array_equal(ds.scales, scales)
            assert np.abs(ds.descriptors - ref).max() < 1e-6

    def test_matches_reference_on_structured_image(self):
        yy, xx = np.mgrid[0:30, 0:30]
        image = 0.5 + 0.4 * np.sin(xx * 0.7) * np.cos(yy * 0.4)
        ds = extract_dsift(image, DsiftParams(grid_step=3, bin_sizes=(4, 6)))
        ref, _, _ = dsift_reference(image, grid_step=3, bin_sizes=(4, 6))
        assert np.abs(ds.descriptors - ref).max() < 1e-6

    def test_step_edge_orientation_mass(self):
        # 8x8 patch (bin size 2) over a vertical step edge: gradient points
        # along +x, so nearly all mass lands in the bins closest to 0/180 deg.
        image = np.zeros((8, 8))
        image[:, 4:] = 1.0
        ds = extract_dsift(image, DsiftParams(grid_step=1, bin_sizes=(2,)))
        assert len(ds) == 1
        hist = ds.descriptors[0].reshape(4, 4, 8)
        mass_02 = hist[:, :, [0, 4]].sum()
        assert mass_02 / hist.sum() >= 0.95

    def test_norm_invariants(self):
        rng = np.random.default_rng(3)
        ds = extract_dsift(rng.random((40, 40)))
        norms = np.linalg.norm(ds.descriptors, axis=1)
        nonzero = norms > 0
        assert np.all(norms <= 1.0 + 1e-6)
        assert np.all(norms[nonzero] >= 0.99)
        assert ds.descriptors.max() <= 0.2 + 1e-6

    def test_intensity_scaling_invariance(self):
        rng = np.random.default_rng(5)
        image = rng.random((40, 40))
        a = extract_dsift(image)
        b = extract_dsift(image * 0.5)
        assert np.abs(a.descriptors - b.descriptors).max() < 1e-6


class TestRotation90:
    @pytest.mark.parametrize("n,s", [(40, 5), (48, 7)])
    def test_orientation_and_spatial_permutation(self, n, s):
        # np.rot90 maps pixel (x, y) of the rotated image J to original pixel
        # (n-1-y, x); gradients rotate by -90deg (2 orientation bins), patch
        # (a, b) of J corresponds to patch (n-4s-b, a) of I, and the spatial
        # bins map as (i_J, j_J) = (j_I, 3 - i_I).
        rng = np.random.default_rng(n + s)
        image = rng.random((n, n))
        rotated = np.rot90(image)
        params = DsiftParams(grid_step=5, bin_sizes=(s,))
        d_i = extract_dsift(image, params)
        d_j = extract_dsift(rotated, params)
        extent = 4 * s

        lookup = {(int(x), int(y)): k for k, (x, y) in enumerate(d_i.positions)}
        checked = 0
        for k, (aj, bj) in enumerate(d_j.positions):
            src = lookup.get((n - extent - int(bj), int(aj)))
            assert src is not None
            hist_j = d_j.descriptors[k].reshape(4, 4, 8)
            hist_i = d_i.descriptors[src].reshape(4, 4, 8)
            # hist_j[j, i, o] == hist_i[i, 3-j, (o+2) % 8]
            expected = np.empty_like(hist_j)
            for j in range(4):
                for i in range(4):
                    for o in range(8):
                        expected[j, i, o] = hist_i[i, 3 - j, (o + 2) % 8]
            assert np.abs(hist_j - expected).max() < 1e-9
            checked += 1
        assert checked == len(d_j.positions)
