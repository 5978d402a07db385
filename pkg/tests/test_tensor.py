import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from roughfbm.tensor import (
    TruncatedTensor,
    chen_compose,
    refine_difference,
    refine_difference_explicit,
    segment_signature,
    smooth_rough_path,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def vec(d):
    return arrays(np.float64, (d,), elements=finite)


def random_points(rng, m, d, scale=1.0):
    pts = np.zeros((2**m + 1, d))
    pts[1:] = np.cumsum(scale * rng.normal(size=(2**m, d)), axis=0)
    return pts


def assert_tensor_close(x, y, rtol=1e-12, atol=1e-14):
    for j in (1, 2, 3):
        np.testing.assert_allclose(x.level(j), y.level(j), rtol=rtol, atol=atol)


class TestSegmentSignature:
    def test_zero_segment_is_identity(self):
        s = segment_signature(np.zeros(2))
        assert_tensor_close(s, TruncatedTensor.identity(2))

    def test_scalar_values(self):
        s = segment_signature([2.0])
        assert s.level1[0] == 2.0
        assert s.level2[0, 0] == 2.0
        assert s.level3[0, 0, 0] == pytest.approx(4.0 / 3.0, rel=1e-15)

    def test_level2_symmetric(self):
        s = segment_signature([1.0, 0.0])
        np.testing.assert_array_equal(s.level2, s.level2.T)

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            segment_signature([1.0, 2.0], dim=3)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            segment_signature([np.nan])


class TestChen:
    def test_identity_left(self):
        y = segment_signature([0.3, -1.2])
        assert_tensor_close(chen_compose(TruncatedTensor.identity(2), y), y)

    def test_one_dimensional_doubling(self):
        one = segment_signature([1.0])
        z = chen_compose(one, one)
        assert z.level1[0] == 2.0 and z.level2[0, 0] == 2.0
        assert z.level3[0, 0, 0] == pytest.approx(4.0 / 3.0, rel=1e-15)

    def test_two_orthogonal_segments(self):
        z = chen_compose(segment_signature([1.0, 0.0]), segment_signature([0.0, 1.0]))
        np.testing.assert_allclose(z.level2, [[0.5, 1.0], [0.0, 0.5]])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            chen_compose(segment_signature([1.0]), segment_signature([1.0, 2.0]))

    @settings(max_examples=60, deadline=None)
    @given(vec(3), vec(3), vec(3))
    def test_associative(self, a, b, c):
        x, y, z = (segment_signature(v) for v in (a, b, c))
        # make the operands non-trivial multi-segment elements
        x = chen_compose(x, segment_signature(b[::-1]))
        left = chen_compose(chen_compose(x, y), z)
        right = chen_compose(x, chen_compose(y, z))
        scale = max(1.0, float(np.max(np.abs(left.flatten()))))
        np.testing.assert_allclose(left.flatten(), right.flatten(), rtol=1e-12, atol=1e-12 * scale)

    @settings(max_examples=40, deadline=None)
    @given(vec(2), vec(2))
    def test_inverse(self, a, b):
        x = chen_compose(segment_signature(a), segment_signature(b))
        e = chen_compose(x, x.inverse())
        scale = max(1.0, float(np.max(np.abs(x.flatten()))) ** 3)
        np.testing.assert_allclose(e.flatten(), 0.0, atol=1e-12 * scale)

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        z = chen_compose(segment_signature(a), segment_signature(b))
        for i in range(5):
            zi = chen_compose(segment_signature(a[i]), segment_signature(b[i]))
            assert_tensor_close(z[i], zi)


class TestTruncatedTensor:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            TruncatedTensor(np.zeros(2), np.zeros((3, 3)), np.zeros((2, 2, 2)))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            TruncatedTensor(np.array([np.inf]), np.zeros((1, 1)), np.zeros((1, 1, 1)))

    def test_immutable(self):
        s = segment_signature([1.0, 2.0])
        with pytest.raises(ValueError):
            s.level1[0] = 5.0

    def test_dilation(self):
        s = segment_signature([1.0, -2.0])
        t = s.dilate(3.0)
        np.testing.assert_allclose(t.level3, 27.0 * s.level3)


class TestSmoothRoughPath:
    def test_constant_points_identity(self):
        x = smooth_rough_path(np.zeros((9, 2)))
        for n in range(4):
            np.testing.assert_array_equal(x.level(n).flatten(), 0.0)

    def test_two_unit_segments(self):
        x = smooth_rough_path(np.array([0.0, 1.0, 2.0]), 1)
        assert_tensor_close(x.signature(), segment_signature([2.0]))

    def test_linear_ramp(self):
        x = smooth_rough_path(np.linspace(0, 1, 5), 2)
        assert_tensor_close(x.signature(), segment_signature([1.0]), rtol=1e-14)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            smooth_rough_path(np.zeros((6, 1)))

    def test_nonzero_start(self):
        with pytest.raises(ValueError):
            smooth_rough_path(np.ones((5, 1)))

    def test_nan_rejected(self):
        pts = np.zeros((5, 1))
        pts[2] = np.nan
        with pytest.raises(ValueError):
            smooth_rough_path(pts)

    def test_leaves_are_segments(self):
        rng = np.random.default_rng(2)
        pts = random_points(rng, 3, 2)
        x = smooth_rough_path(pts)
        assert_tensor_close(x.level(3), segment_signature(np.diff(pts, axis=0)))

    def test_composed_matches_tree(self):
        rng = np.random.default_rng(3)
        x = smooth_rough_path(random_points(rng, 4, 3))
        for n in range(5):
            size = 2 ** (4 - n)
            for l in range(2**n):
                assert_tensor_close(x.composed(l * size, (l + 1) * size), x.increment(n, l))

    def test_beyond_depth_levels(self):
        rng = np.random.default_rng(4)
        pts = random_points(rng, 2, 2)
        x = smooth_rough_path(pts)
        # refine the same piecewise-linear path explicitly
        fine_t = np.linspace(0, 1, 17)
        fine = np.column_stack([np.interp(fine_t, np.linspace(0, 1, 5), pts[:, k]) for k in range(2)])
        y = smooth_rough_path(fine)
        for n in range(5):
            assert_tensor_close(x.level(n), y.level(n), rtol=1e-12, atol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**31 - 1))
    def test_one_dimensional_shuffle(self, m, seed):
        rng = np.random.default_rng(seed)
        x = smooth_rough_path(random_points(rng, m, 1))
        n = 2**m
        i, k = sorted(rng.integers(0, n + 1, size=2))
        z = x.composed(int(i), int(k))
        a = z.level1[0]
        assert z.level2[0, 0] == pytest.approx(a**2 / 2, rel=1e-12, abs=1e-12)
        assert z.level3[0, 0, 0] == pytest.approx(a**3 / 6, rel=1e-11, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**31 - 1))
    def test_multiplicative(self, m, seed):
        rng = np.random.default_rng(seed)
        x = smooth_rough_path(random_points(rng, m, 2))
        n = 2**m
        i, u, k = sorted(rng.integers(0, n + 1, size=3))
        lhs = x.composed(int(i), int(k))
        rhs = chen_compose(x.composed(int(i), int(u)), x.composed(int(u), int(k)))
        scale = max(1.0, float(np.max(np.abs(lhs.flatten()))))
        np.testing.assert_allclose(lhs.flatten(), rhs.flatten(), rtol=1e-12, atol=1e-13 * scale)

    def test_signed_area_against_riemann_sum(self):
        rng = np.random.default_rng(5)
        pts = random_points(rng, 4, 2)
        x = smooth_rough_path(pts)
        area = 0.5 * (x.signature().level2[0, 1] - x.signature().level2[1, 0])
        # shoelace-type oracle: 1/2 sum x_k dy - y_k dx along the polygon (exact for linear pieces)
        xs, ys = pts[:, 0], pts[:, 1]
        oracle = 0.5 * np.sum(xs[:-1] * np.diff(ys) - ys[:-1] * np.diff(xs))
        assert area == pytest.approx(oracle, rel=1e-12)

    def test_batched_path(self):
        rng = np.random.default_rng(6)
        pts = np.stack([random_points(rng, 3, 2) for _ in range(4)])
        xb = smooth_rough_path(pts)
        for b in range(4):
            assert_tensor_close(xb[b].signature(), smooth_rough_path(pts[b]).signature())

    def test_composed_index_errors(self):
        x = smooth_rough_path(np.zeros((5, 1)))
        with pytest.raises(IndexError):
            x.composed(3, 1)
        with pytest.raises(IndexError):
            x.increment(2, 4)


class TestRefineDifference:
    def _pair(self, rng, m, d):
        fine_pts = random_points(rng, m + 1, d)
        return smooth_rough_path(fine_pts[::2], m), smooth_rough_path(fine_pts, m + 1)

    def test_identical_underlying_linear_path(self):
        pts = np.linspace(0, 1, 9)[:, None] * np.array([1.0, -2.0])
        coarse = smooth_rough_path(pts[::2])
        fine = smooth_rough_path(pts)
        diff = refine_difference(coarse, fine, 1, 1)
        np.testing.assert_allclose(diff.flatten(), 0.0, atol=1e-15)

    def test_one_dimensional_level2_vanishes(self):
        rng = np.random.default_rng(7)
        coarse, fine = self._pair(rng, 3, 1)
        for n in range(4):
            for l in range(2**n):
                diff = refine_difference(coarse, fine, n, l)
                assert abs(diff.level2[0, 0]) <= 1e-13 * max(1.0, abs(fine.increment(n, l).level2[0, 0]))
                assert np.all(refine_difference_explicit(coarse, fine, n, l).level2 == 0.0)

    def test_level_equal_depth(self):
        rng = np.random.default_rng(8)
        coarse, fine = self._pair(rng, 2, 2)
        df = np.diff(fine.points, axis=0)
        for l in range(4):
            a, b = df[2 * l], df[2 * l + 1]
            oracle = 0.5 * (np.outer(a, b) - np.outer(b, a))
            np.testing.assert_allclose(refine_difference(coarse, fine, 2, l).level2, oracle,
                                       rtol=1e-12, atol=1e-14)

    def test_level1_zero(self):
        rng = np.random.default_rng(9)
        coarse, fine = self._pair(rng, 3, 3)
        diff = refine_difference(coarse, fine, 1, 0)
        np.testing.assert_allclose(diff.level1, 0.0, atol=1e-13)

    def test_not_nested(self):
        rng = np.random.default_rng(10)
        coarse, _ = self._pair(rng, 2, 1)
        _, other = self._pair(rng, 2, 1)
        with pytest.raises(ValueError):
            refine_difference(coarse, other, 1, 0)

    def test_bad_depths(self):
        rng = np.random.default_rng(11)
        coarse, fine = self._pair(rng, 2, 1)
        with pytest.raises(ValueError):
            refine_difference(coarse, coarse, 1, 0)
        with pytest.raises(ValueError):
            refine_difference(coarse, fine, 3, 0)
        with pytest.raises(IndexError):
            refine_difference(coarse, fine, 1, 2)
