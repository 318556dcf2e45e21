import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from headsmith import imgprep
from headsmith.errors import ConfigError, DataError, ShapeError
from headsmith.imgprep import PoolSpec

images = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)))


def brute_equalize(img):
    """Direct per-pixel evaluation: count pixels <= v, exact fraction, round half up."""
    from fractions import Fraction

    flat = img.ravel().tolist()
    mn = len(flat)
    cdf = {v: sum(1 for q in flat if q <= v) for v in set(flat)}
    cdf_min = min(cdf.values())
    if mn == cdf_min:
        return img.copy()
    out = [int(Fraction(255 * (cdf[v] - cdf_min), mn - cdf_min) + Fraction(1, 2)) for v in flat]
    return np.array(out, dtype=np.uint8).reshape(img.shape)


def brute_convolve(img, k):
    m, n = img.shape
    s, t = k.shape
    out = np.zeros((m - s + 1, n - t + 1))
    for i in range(m - s + 1):
        for j in range(n - t + 1):
            for a in range(s):
                for b in range(t):
                    out[i, j] += img[i + a, j + b] * k[s - 1 - a, t - 1 - b]
    return out


class TestEqualize:
    def test_two_by_two(self, backend):
        out = imgprep.equalize(np.array([[0, 1], [2, 3]], dtype=np.uint8))
        np.testing.assert_array_equal(out, [[0, 85], [170, 255]])

    def test_constant_unchanged(self, backend):
        img = np.full((4, 5), 77, dtype=np.uint8)
        np.testing.assert_array_equal(imgprep.equalize(img), img)

    def test_uniform_histogram_fixed(self, backend):
        img = np.repeat(np.arange(256, dtype=np.uint8), 2).reshape(16, 32)
        np.testing.assert_array_equal(imgprep.equalize(img), img)

    @settings(max_examples=200, deadline=None)
    @given(images)
    def test_matches_brute_force(self, img):
        np.testing.assert_array_equal(imgprep.equalize(img), brute_equalize(img))

    @settings(max_examples=200, deadline=None)
    @given(images)
    def test_monotone_and_endpoints(self, img):
        out = imgprep.equalize(img)
        lut = imgprep.equalization_lut(img)
        present = np.unique(img)
        assert np.all(np.diff(lut[present].astype(int)) >= 0)
        if present.size > 1:
            assert out[img == img.min()].max() == 0
            assert out[img == img.max()].min() == 255

    def test_rejects_out_of_range(self):
        with pytest.raises(DataError):
            imgprep.equalize(np.array([[0, 256]]))
        with pytest.raises(ShapeError):
            imgprep.equalize(np.zeros((2, 2, 3), dtype=np.uint8))


class TestMirrorInvert:
    def test_mirror(self):
        np.testing.assert_array_equal(imgprep.mirror_horizontal([[1, 2]]), [[2, 1]])

    def test_single_column_fixed(self):
        img = np.array([[1], [2], [3]], dtype=np.uint8)
        np.testing.assert_array_equal(imgprep.mirror_horizontal(img), img)

    @settings(max_examples=50, deadline=None)
    @given(images)
    def test_involutions_commute(self, img):
        m, inv = imgprep.mirror_horizontal, imgprep.invert
        np.testing.assert_array_equal(m(m(img)), img)
        np.testing.assert_array_equal(inv(inv(img)), img)
        np.testing.assert_array_equal(m(inv(img)), inv(m(img)))


class TestNegatives:
    @staticmethod
    def framed(border, centre, size=20):
        img = np.full((size, size), border, dtype=np.uint8)
        img[2:-2, 2:-2] = centre
        return img

    def test_bright_border_flagged(self):
        img = self.framed(200, 100)
        assert imgprep.border_center_means(img) == (200.0, 100.0)
        out, flagged = imgprep.detect_and_invert_negatives([img])
        assert flagged == [0]
        np.testing.assert_array_equal(out[0], 255 - img)

    def test_uniform_not_flagged(self):
        _, flagged = imgprep.detect_and_invert_negatives([np.full((10, 10), 90, dtype=np.uint8)])
        assert flagged == []

    def test_margin_boundary(self):
        assert imgprep.detect_and_invert_negatives([self.framed(114, 100)], margin=1.15)[1] == []
        assert imgprep.detect_and_invert_negatives([self.framed(116, 100)], margin=1.15)[1] == [0]

    def test_order_preserved(self):
        batch = [self.framed(10, 200), self.framed(200, 10), self.framed(50, 50)]
        out, flagged = imgprep.detect_and_invert_negatives(batch)
        assert flagged == [1]
        np.testing.assert_array_equal(out[0], batch[0])
        np.testing.assert_array_equal(out[2], batch[2])

    def test_bad_margin_and_empty(self):
        with pytest.raises(ConfigError):
            imgprep.detect_and_invert_negatives([np.zeros((3, 3))], margin=0)
        with pytest.raises(DataError):
            imgprep.detect_and_invert_negatives([])


class TestConvolution:
    def test_identity_kernel(self, backend):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4)
        np.testing.assert_array_equal(imgprep.convolve2d(img, [[1.0]]), img)

    def test_ones_kernel(self, backend):
        np.testing.assert_array_equal(imgprep.convolve2d([[1, 2], [3, 4]], np.ones((2, 2))), [[10.0]])

    def test_kernel_is_flipped(self, backend):
        out = imgprep.convolve2d([[1, 2, 3]], [[1.0, 0.0]])
        np.testing.assert_array_equal(out, [[2.0, 3.0]])

    def test_linearity(self, backend, np_rng):
        img = np_rng.integers(0, 256, (8, 8)).astype(np.uint8)
        k = np_rng.normal(size=(3, 3))
        np.testing.assert_allclose(imgprep.convolve2d(img, 2.5 * k), 2.5 * imgprep.convolve2d(img, k), rtol=1e-12)

    def test_matches_quadruple_loop(self, backend, np_rng):
        for _ in range(20):
            img = np_rng.integers(0, 256, (8, 8)).astype(np.uint8)
            k = np_rng.normal(size=tuple(np_rng.integers(1, 5, 2)))
            np.testing.assert_allclose(imgprep.convolve2d(img, k), brute_convolve(img.astype(float), k), atol=1e-9)

    def test_kernel_too_large(self):
        with pytest.raises(ShapeError):
            imgprep.convolve2d(np.zeros((2, 2)), np.ones((3, 1)))


class TestPooling:
    @pytest.mark.parametrize("u, r, h, expected", [(224, 2, 2, 112), (7, 3, 2, 3), (5, 5, 1, 1)])
    def test_pooled_dim(self, u, r, h, expected):
        assert imgprep.pooled_dim(u, PoolSpec(r, h)) == expected

    def test_window_too_large(self):
        with pytest.raises(ShapeError):
            imgprep.pooled_dim(2, PoolSpec(3, 1))

    def test_constant_image(self, backend):
        out = imgprep.max_pool(np.full((7, 9), 42, dtype=np.uint8), PoolSpec(3, 2))
        assert out.shape == (3, 4)
        assert np.all(out == 42)

    def test_window_maximum(self, backend, np_rng):
        img = np_rng.integers(0, 256, (9, 10)).astype(np.uint8)
        spec = PoolSpec(3, 2)
        out = imgprep.max_pool(img, spec)
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                assert out[i, j] == img[2 * i : 2 * i + 3, 2 * j : 2 * j + 3].max()


class TestFiles:
    def test_pgm_round_trip(self, tmp_path, np_rng):
        img = np_rng.integers(0, 256, (5, 7)).astype(np.uint8)
        path = tmp_path / "a.pgm"
        imgprep.write_pgm(path, img)
        assert path.read_bytes().startswith(b"P5\n7 5\n255\n")
        np.testing.assert_array_equal(imgprep.read_pgm(path), img)

    def test_pgm_with_comment(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# scanner\n2 1\n255\n\x00\xff")
        np.testing.assert_array_equal(imgprep.read_pgm(path), [[0, 255]])

    def test_rejects_ascii_pgm(self, tmp_path):
        path = tmp_path / "p2.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(DataError):
            imgprep.read_pgm(path)

    def test_directory_negatives(self, tmp_path):
        src, dst = tmp_path / "in", tmp_path / "out"
        src.mkdir()
        imgprep.write_pgm(src / "neg.pgm", TestNegatives.framed(220, 40))
        imgprep.write_pgm(src / "pos.pgm", TestNegatives.framed(40, 220))
        manifest = imgprep.process_directory("negatives", src, dst)
        assert manifest["flagged"] == ["neg.pgm"]
        assert (dst / "manifest.json").exists()
        np.testing.assert_array_equal(imgprep.read_pgm(dst / "neg.pgm"), 255 - TestNegatives.framed(220, 40))
        np.testing.assert_array_equal(imgprep.read_pgm(dst / "pos.pgm"), TestNegatives.framed(40, 220))
