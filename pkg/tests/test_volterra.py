import json

import numpy as np
import pytest
from scipy import integrate

from roughfbm._io import read_csv
from roughfbm.kernel import CameronMartinPath, HurstParams, kernel_eval, kernel_values
from roughfbm.sampler import InterpolatedPath
from roughfbm.tensor import chen_compose
from roughfbm.volterra import (
    HoelderFunction,
    IntegralReport,
    LevelTwoCache,
    cm_increment,
    cm_level2,
    cm_level3,
    discrete_increment,
    integrate_against_h,
    integrate_against_hm,
    k_norm,
    k_star,
    prop5_convergence_study,
    thm2_check,
)

HP = HurstParams(0.35)
TWO_STEP = CameronMartinPath([0, 0.5, 1], [1.0, -1.0])
D2 = CameronMartinPath([0, 0.4, 1], [[1.0, -0.5], [-0.7, 1.2]])
ONE = HoelderFunction.polynomial([1.0])
RAMP = HoelderFunction.polynomial([0.0, 1.0])


def quad_h(h, t, coord=0):
    pts = [b for b in h.breakpoints if 0 < b < t]
    val, _ = integrate.quad(lambda r: float(h.evaluate(HP, r)[coord]), 0.0, t, points=pts or None,
                            epsabs=1e-13, limit=200)
    return val


class TestHoelderFunction:
    def test_constants(self):
        f = HoelderFunction.polynomial([0.0, 2.0])
        assert f.constant == pytest.approx(2.0, rel=1e-12)
        assert f.sup_norm == pytest.approx(2.0)

    def test_divergent_combination(self):
        f = HoelderFunction(lambda r: np.sqrt(np.abs(r)), 0.1)
        with pytest.raises(ValueError, match="lambda \\+ H"):
            f.check(HP)

    def test_exponent_range(self):
        with pytest.raises(ValueError):
            HoelderFunction(lambda r: r, 1.5)

    def test_from_cm(self):
        f = HoelderFunction.from_cm(TWO_STEP, HP, coord=0)
        assert f.exponent == HP.H
        assert f.constant <= TWO_STEP.norm * (1 + 1e-9)
        assert f.singular_points == (0.5,)

    def test_step(self):
        f = HoelderFunction.step([0, 0.3, 1], [2.0, -1.0])
        np.testing.assert_array_equal(f(np.array([0.0, 0.29, 0.3, 1.0])), [2.0, 2.0, -1.0, -1.0])


class TestScalarReferences:
    def test_k_norm_of_one(self):
        assert k_norm(ONE, HP) == pytest.approx(1.0, abs=1e-8)

    def test_k_norm_homogeneous(self):
        two = HoelderFunction.polynomial([0.0, 2.0])
        assert k_norm(two, HP) == pytest.approx(2.0 * k_norm(RAMP, HP), rel=1e-7)

    def test_k_star_constant(self):
        c = HoelderFunction.polynomial([3.0])
        for s in (0.1, 0.5, 0.9):
            assert k_star(c, HP, 1.0, s) == pytest.approx(3.0 * kernel_eval(HP, 1.0, s), rel=1e-10)

    @pytest.mark.parametrize("t,s", [(1.0, 0.3), (0.7, 0.2), (0.5, 0.45)])
    def test_k_star_ramp_by_parts(self, t, s):
        # integration by parts: K*(r 1_[0,t])(s) = t K(t,s) - int_s^t K(r,s) dr
        tail, _ = integrate.quad(lambda r: float(kernel_values(HP, r, s)), s, t, epsabs=1e-13, limit=200)
        oracle = t * kernel_eval(HP, t, s) - tail
        assert k_star(RAMP, HP, t, s) == pytest.approx(oracle, rel=1e-8)

    def test_k_star_vanishes_beyond_t(self):
        assert k_star(RAMP, HP, 0.4, 0.6) == 0.0


class TestIntegrateAgainstH:
    @pytest.mark.parametrize("t", [0.25, 0.5, 0.8, 1.0])
    def test_constant_integrand_gives_h(self, t):
        np.testing.assert_allclose(integrate_against_h(ONE, TWO_STEP, HP, t), TWO_STEP.evaluate(HP, t),
                                   rtol=1e-8, atol=1e-10)

    @pytest.mark.parametrize("t", [0.3, 0.5, 1.0])
    def test_ramp_by_parts(self, t):
        oracle = t * TWO_STEP.evaluate(HP, t)[0] - quad_h(TWO_STEP, t)
        assert integrate_against_h(RAMP, TWO_STEP, HP, t)[0] == pytest.approx(oracle, abs=1e-8)

    def test_step_integrand(self):
        # for a step integrand the integral is a finite sum of increments
        phi = HoelderFunction.step([0, 0.3, 0.7, 1], [2.0, -1.0, 0.5])
        h = lambda r: TWO_STEP.evaluate(HP, r)[0]  # noqa: E731
        oracle = 2.0 * h(0.3) - 1.0 * (h(0.7) - h(0.3)) + 0.5 * (h(1.0) - h(0.7))
        assert integrate_against_h(phi, TWO_STEP, HP, 1.0)[0] == pytest.approx(oracle, abs=1e-8)

    def test_vector_t_and_zero(self):
        v = integrate_against_h(ONE, TWO_STEP, HP, np.array([0.0, 0.5]))
        assert v.shape == (2, 1)
        assert v[0, 0] == 0.0

    def test_linear_in_phi(self):
        f = HoelderFunction.polynomial([0.5, -1.0, 2.0])
        g = HoelderFunction.polynomial([0.0, 3.0])
        fg = HoelderFunction.polynomial([0.5, 2.0, 2.0])
        a = integrate_against_h(f, D2, HP, 0.9)
        b = integrate_against_h(g, D2, HP, 0.9)
        np.testing.assert_allclose(integrate_against_h(fg, D2, HP, 0.9), a + b, rtol=1e-9, atol=1e-11)

    def test_error_estimate_small(self):
        _, err = integrate_against_h(RAMP, TWO_STEP, HP, 0.8, return_error=True)
        assert np.all(err < 1e-7)

    def test_domain(self):
        with pytest.raises(ValueError):
            integrate_against_h(ONE, TWO_STEP, HP, 1.5)


class TestIntegrateAgainstHm:
    def test_constant_gives_interpolation(self):
        t = np.linspace(0, 1, 23)
        for m in (2, 5):
            vals = integrate_against_hm(ONE, TWO_STEP, HP, m, t)
            np.testing.assert_allclose(vals, InterpolatedPath.from_cm(TWO_STEP, HP, m)(t), rtol=1e-12, atol=1e-14)

    def test_riemann_sum_oracle(self):
        # with a ramp, each cell contributes its midpoint times the increment
        m = 4
        grid = np.linspace(0, 1, 2**m + 1)
        dh = np.diff(TWO_STEP.evaluate(HP, grid)[:, 0])
        oracle = np.sum(0.5 * (grid[:-1] + grid[1:]) * dh)
        assert integrate_against_hm(RAMP, TWO_STEP, HP, m, 1.0)[0] == pytest.approx(oracle, rel=1e-13)

    def test_converges_to_continuous(self):
        exact = integrate_against_h(RAMP, TWO_STEP, HP, 1.0)[0]
        errs = [abs(integrate_against_hm(RAMP, TWO_STEP, HP, m, 1.0)[0] - exact) for m in (4, 6, 8, 10)]
        assert np.all(np.diff(errs) < 0) and errs[-1] < 1e-4


class TestIteratedIntegrals:
    def test_level2_constant_density(self):
        h = CameronMartinPath.constant(1.0)
        h1 = h.evaluate(HP, 1.0)[0]
        assert cm_level2(h, HP, 0.0, 1.0)[0, 0] == pytest.approx(h1**2 / 2, rel=1e-8)

    def test_level3_constant_density(self):
        h = CameronMartinPath.constant(1.0)
        h1 = h.evaluate(HP, 1.0)[0]
        assert cm_level3(h, HP, 0.0, 1.0)[0, 0, 0] == pytest.approx(h1**3 / 6, rel=1e-5)

    def test_level2_symmetric_part(self):
        # the symmetric part of a geometric level 2 is half the square of level 1
        x1 = D2.evaluate(HP, 0.8) - D2.evaluate(HP, 0.2)
        x2 = cm_level2(D2, HP, 0.2, 0.8)
        np.testing.assert_allclose(x2 + x2.T, np.outer(x1, x1), rtol=1e-7, atol=1e-9)

    def test_routes_agree(self):
        cache = LevelTwoCache(D2, HP, 8)
        a = cm_increment(D2, HP, 0.1, 0.9, 8, route="kstar", cache=cache)
        b = cm_increment(D2, HP, 0.1, 0.9, 8, route="derivative", cache=cache)
        np.testing.assert_allclose(a.level2, b.level2, atol=1e-7)
        np.testing.assert_allclose(a.level3, b.level3, atol=1e-6)

    def test_chen(self):
        cache = LevelTwoCache(D2, HP, 9)
        whole = cm_increment(D2, HP, 0.0, 1.0, 9, cache=cache)
        comp = chen_compose(cm_increment(D2, HP, 0.0, 0.3, 9, cache=cache),
                            cm_increment(D2, HP, 0.3, 1.0, 9, cache=cache))
        for j in (1, 2, 3):
            rel = np.linalg.norm(comp.level(j) - whole.level(j)) / np.linalg.norm(whole.level(j))
            assert rel < 1e-4

    def test_empty_window(self):
        assert np.all(cm_level2(D2, HP, 0.4, 0.4) == 0.0)
        with pytest.raises(ValueError):
            cm_level2(D2, HP, 0.6, 0.4)

    def test_unknown_route(self):
        with pytest.raises(ValueError):
            cm_increment(D2, HP, 0.0, 1.0, 6, route="magic")

    def test_cache_interpolates_grid_values(self):
        cache = LevelTwoCache(D2, HP, 6)
        np.testing.assert_array_equal(cache(cache.grid[3]), cache.values[3])
        assert cache(np.array([0.2, 0.7])).shape == (2, 2, 2)

    def test_discrete_increment_grid_check(self):
        with pytest.raises(ValueError):
            discrete_increment(D2, HP, 2, 0.1, 1.0)


class TestThm2:
    @pytest.fixture(scope="class")
    def report(self):
        return thm2_check(D2, HP, range(6, 10), grid_depth=9)

    def test_errors_decrease(self, report):
        assert np.all(np.diff(report.level2_error) < 0)
        assert np.all(np.diff(report.level3_error) < 0)

    def test_chen(self, report):
        assert max(report.chen_relative.values()) < 1e-3

    def test_json(self, report):
        data = json.loads(report.to_json())
        assert data["m"] == [6, 7, 8, 9] and "level1" in data["chen_relative"]


class TestProp5:
    def test_discrepancy_decays(self):
        G = HoelderFunction.polynomial([0.2, 1.0, -1.0])
        rep = prop5_convergence_study(G, lambda m: G, TWO_STEP, HP, range(3, 8), t_depth=8)
        assert np.all(np.diff(rep.values) < 0)
        assert rep.meta["hypothesis_flag"] is False
        assert rep.meta["c_m"] == [0.0] * 5

    def test_flag_when_cm_grows(self):
        G = HoelderFunction.polynomial([0.0, 1.0])
        bad = lambda m: HoelderFunction.polynomial([0.0, 1.0 + 0.01 * m])  # noqa: E731
        rep = prop5_convergence_study(G, bad, TWO_STEP, HP, range(3, 6), t_depth=6)
        assert rep.meta["hypothesis_flag"] is True


class TestIntegralReport:
    def test_serialisation(self, tmp_path):
        rep = IntegralReport([0.0, 0.5, 1.0], [0.0, 1.0, 2.0], [0.0, 1e-9, 2e-9], 1, "demo", {"H": 0.35})
        data = json.loads(rep.to_json())
        assert data["values"] == [0.0, 1.0, 2.0] and data["meta"]["H"] == 0.35
        rep.write_csv(tmp_path / "r.csv")
        cols, arr, meta = read_csv(tmp_path / "r.csv")
        assert cols == ["t", "value", "error"] and arr.shape == (3, 3) and meta["label"] == "demo"

    def test_non_finite_errors(self):
        with pytest.raises(ValueError):
            IntegralReport([0.0], [1.0], [np.nan], 0)
