import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughfbm._io import read_csv
from roughfbm.kernel import CameronMartinPath, HurstParams, fbm_covariance
from roughfbm.sampler import (
    BLOCK,
    FbmSamplePath,
    InterpolatedPath,
    coarsen,
    interpolate,
    iter_fbm_batches,
    sample_fbm,
    sample_fbm_batch,
    write_path_csv,
)


class TestValidation:
    @pytest.mark.parametrize("H", [0.6, 0.2, 0.5])
    def test_bad_hurst(self, H):
        with pytest.raises(ValueError, match="1/4, 1/2"):
            sample_fbm(H, 3, 0)

    def test_bad_backend(self):
        with pytest.raises(ValueError, match="backend"):
            sample_fbm(0.35, 3, 0, backend="fft")

    def test_cholesky_depth_cap(self):
        with pytest.raises(ValueError):
            sample_fbm(0.35, 15, 0)

    def test_path_shape(self):
        with pytest.raises(ValueError):
            FbmSamplePath(np.zeros(6), 2, 0, 0.35)
        with pytest.raises(ValueError):
            FbmSamplePath(np.ones(5), 2, 0, 0.35)


class TestSampling:
    def test_starts_at_zero(self):
        x = sample_fbm_batch(HurstParams(0.35, d=2), 4, 10, seed=1)
        assert x.shape == (10, 17, 2)
        assert np.all(x[:, 0, :] == 0.0)

    def test_deterministic(self):
        a = sample_fbm_batch(0.3, 5, 50, seed=7)
        b = sample_fbm_batch(0.3, 5, 50, seed=7)
        np.testing.assert_array_equal(a, b)
        c = sample_fbm_batch(0.3, 5, 50, seed=8)
        assert not np.array_equal(a, c)

    def test_prefix_stable(self):
        a = sample_fbm_batch(0.35, 3, 30, seed=2)
        b = sample_fbm_batch(0.35, 3, 10, seed=2)
        np.testing.assert_array_equal(a[:10], b)

    @pytest.mark.parametrize("backend", ["cholesky", "circulant"])
    def test_chunking_invariant(self, backend):
        n = 2 * BLOCK + 17
        full = sample_fbm_batch(0.35, 3, n, 11, backend=backend)
        chunks = np.concatenate(list(iter_fbm_batches(0.35, 3, n, 11, backend=backend, blocks_per_chunk=1)))
        np.testing.assert_array_equal(full, chunks)

    def test_single_path_is_first_of_batch(self):
        p = sample_fbm(0.35, 4, 5)
        np.testing.assert_array_equal(p.values, sample_fbm_batch(0.35, 4, 3, 5)[0])

    def test_empty_batch(self):
        assert sample_fbm_batch(0.35, 3, 0, 1).shape == (0, 9, 1)

    @pytest.mark.parametrize("backend", ["cholesky", "circulant"])
    def test_covariance(self, backend):
        H, m, n = 0.3, 3, 40000
        x = sample_fbm_batch(H, m, n, 3, backend=backend)[:, 1:, 0]
        t = np.linspace(0, 1, 9)[1:]
        prod = x[:, :, None] * x[:, None, :]
        emp = prod.mean(axis=0)
        se = prod.std(axis=0, ddof=1) / np.sqrt(n)
        ref = fbm_covariance(H, t[:, None], t[None, :])
        assert np.max(np.abs(emp - ref) / se) < 4.5

    def test_unit_variance_at_one(self):
        x = sample_fbm_batch(0.35, 6, 20000, 4)[:, -1, 0]
        assert np.var(x) == pytest.approx(1.0, abs=4 * np.sqrt(2.0 / 20000))

    def test_near_brownian_increments_uncorrelated(self):
        x = sample_fbm_batch(0.4999, 5, 20000, 5)[:, :, 0]
        dx = np.diff(x, axis=1)
        corr = np.mean(dx[:, :-1] * dx[:, 1:]) / np.mean(dx**2)
        assert abs(corr) < 0.01

    def test_rough_increments_negatively_correlated(self):
        x = sample_fbm_batch(0.3, 5, 20000, 6)[:, :, 0]
        dx = np.diff(x, axis=1)
        corr = np.mean(dx[:, :-1] * dx[:, 1:]) / np.mean(dx**2)
        assert corr == pytest.approx(2 ** (2 * 0.3 - 1) - 1, abs=0.01)

    def test_coordinates_independent(self):
        x = sample_fbm_batch(HurstParams(0.35, d=2), 3, 20000, 9)[:, -1, :]
        assert abs(np.mean(x[:, 0] * x[:, 1])) < 4 / np.sqrt(20000)

    def test_backends_agree_in_law(self):
        a = sample_fbm_batch(0.35, 4, 20000, 1, backend="cholesky")[:, :, 0]
        b = sample_fbm_batch(0.35, 4, 20000, 1, backend="circulant")[:, :, 0]
        np.testing.assert_allclose(a.var(axis=0), b.var(axis=0), atol=0.05)


class TestInterpolation:
    def test_grid_points_exact(self):
        p = sample_fbm(0.35, 4, 1)
        np.testing.assert_array_equal(interpolate(p, p.times), p.values)

    def test_midpoint(self):
        path = InterpolatedPath([0.0, 2.0, 1.0], 1)
        np.testing.assert_allclose(path(np.array([0.25, 0.75])), [[1.0], [1.5]])

    def test_domain(self):
        with pytest.raises(ValueError):
            InterpolatedPath([0.0, 1.0], 0)(1.5)

    def test_from_cm(self):
        hp = HurstParams(0.35)
        h = CameronMartinPath.constant(1.0)
        path = InterpolatedPath.from_cm(h, hp, 3)
        np.testing.assert_allclose(path(0.5), h.evaluate(hp, 0.5))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 6), st.integers(0, 1000))
    def test_coarsen_is_subsampling(self, target, seed):
        p = sample_fbm(0.35, 6, seed)
        q = coarsen(p, target)
        np.testing.assert_array_equal(q.values, p.values[:: 2 ** (6 - target)])
        # the coarse path agrees with the fine one on its own grid
        np.testing.assert_array_equal(interpolate(q, q.times), interpolate(p, q.times))

    def test_coarsen_bounds(self):
        with pytest.raises(ValueError):
            coarsen(sample_fbm(0.35, 3, 0), 4)


class TestCsv:
    def test_round_trip(self, tmp_path):
        p = sample_fbm(HurstParams(0.35, d=2), 3, 21)
        f = tmp_path / "path.csv"
        write_path_csv(p, f)
        cols, data, meta = read_csv(f)
        assert cols == ["t", "x_1", "x_2"]
        assert data.shape == (9, 3)
        np.testing.assert_array_equal(data[:, 1:], p.values)
        assert meta["seed"] == "21" and meta["m"] == "3"
