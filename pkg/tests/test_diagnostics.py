import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from opinionfit.diagnostics import (
    chi_square_cdf,
    chi_square_ppf,
    ci_alt,
    ci_mle,
    ci_mos,
    compare_fits,
    nbic,
    stimulus_residual_std,
)
from opinionfit.errors import DataError, NumericalError
from opinionfit.model import ModelParams, MosParams, ScoreTensor
from opinionfit.solvers import solve_ap

from conftest import random_tensor


class TestChiSquare:
    def test_two_dof_median(self):
        assert chi_square_ppf(2, 0.5) == pytest.approx(2 * math.log(2), abs=1e-9)

    def test_one_dof_95(self):
        assert chi_square_ppf(1, 0.95) == pytest.approx(3.841459, abs=1e-6)

    @pytest.mark.parametrize("k", [1, 2, 3, 7, 30, 100, 500, 5000])
    @pytest.mark.parametrize("p", [0.001, 0.025, 0.5, 0.975, 0.999])
    def test_against_scipy(self, k, p):
        x = chi_square_ppf(k, p)
        assert stats.chi2.cdf(x, k) == pytest.approx(p, abs=1e-8)
        assert x == pytest.approx(stats.chi2.ppf(p, k), rel=1e-8)

    def test_cdf_against_scipy(self):
        for k in (1, 4, 51, 400):
            for x in np.linspace(0.01, 3 * k + 10, 17):
                assert chi_square_cdf(x, k) == pytest.approx(stats.chi2.cdf(x, k), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(k=st.integers(1, 300), p1=st.floats(0.001, 0.999), p2=st.floats(0.001, 0.999))
    def test_monotone(self, k, p1, p2):
        if p1 < p2 - 1e-6:
            assert chi_square_ppf(k, p1) < chi_square_ppf(k, p2)

    @pytest.mark.parametrize("k,p", [(0, 0.5), (-1, 0.5), (2.5, 0.5), (2, 0.0), (2, 1.0), (2, 1.5)])
    def test_bad_arguments(self, k, p):
        with pytest.raises(ValueError):
            chi_square_ppf(k, p)


def complete_unit(I, J):
    g = np.random.default_rng(I * 100 + J)
    return ScoreTensor.from_dense(g.normal(3, 1, (I, J))), ModelParams(np.full(J, 3.0), np.zeros(I), np.ones(I))


class TestCiMle:
    def test_unit_inconsistency_length(self):
        t, p = complete_unit(9, 5)
        ci = ci_mle(t, p)
        np.testing.assert_allclose(ci.psi[:, 1] - ci.psi[:, 0], 3.92 / 3)

    def test_delta_interval(self):
        t = ScoreTensor.from_dense(np.zeros((1, 16)) + np.arange(16))
        p = ModelParams(np.arange(16.0), [0.3], [2.0])
        ci = ci_mle(t, p)
        np.testing.assert_allclose(ci.delta[0], [0.3 - 0.98, 0.3 + 0.98])

    def test_upsilon_interval_hundred_votes(self):
        t = ScoreTensor.from_dense(np.zeros((1, 100)))
        ci = ci_mle(t, ModelParams(np.zeros(100), [0.0], [1.0]))
        lo, hi = ci.upsilon[0]
        assert lo == pytest.approx(math.sqrt(100 / stats.chi2.ppf(0.975, 100)), rel=1e-9)
        assert hi == pytest.approx(math.sqrt(100 / stats.chi2.ppf(0.025, 100)), rel=1e-9)
        assert lo == pytest.approx(0.87854, abs=1e-5)
        assert hi == pytest.approx(1.16074, abs=1e-5)

    def test_contains_estimates(self, rng):
        for _ in range(10):
            t = random_tensor(rng, 6, 9, 2, missing=0.3)
            r = solve_ap(t)
            for ci, est in ((r.psi_ci, r.psi), (r.delta_ci, r.params.delta), (r.psi_ci2, r.psi)):
                assert np.all(ci[:, 0] <= est) and np.all(est <= ci[:, 1])
            assert np.all(r.upsilon_ci[:, 0] < r.params.upsilon)
            assert np.all(r.params.upsilon < r.upsilon_ci[:, 1])

    def test_complete_equal_lengths(self, rng):
        t = random_tensor(rng, 7, 12, 2)
        p = ModelParams(rng.uniform(1, 5, 12), rng.normal(0, 1, 7), rng.uniform(0.2, 2.0, 7))
        ci = ci_mle(t, p)
        lengths = ci.psi[:, 1] - ci.psi[:, 0]
        # same weights summed in the same order; only psi +- h rounding differs
        np.testing.assert_allclose(lengths, lengths[0], rtol=1e-12, atol=0)

    def test_missing_unequal_lengths(self, rng):
        t = random_tensor(rng, 7, 12, 1, missing=0.3)
        r = solve_ap(t)
        assert np.ptp(r.psi_ci[:, 1] - r.psi_ci[:, 0]) > 0

    def test_nonpositive_upsilon(self):
        t, p = complete_unit(3, 3)
        with pytest.raises(NumericalError):
            ci_mle(t, ModelParams(p.psi, p.delta, [1.0, 0.0, 1.0]))


class TestCiAlt:
    def test_zero_residuals(self, noiseless_panel):
        t, psi, delta = noiseless_panel
        ci = ci_alt(t, ModelParams(psi, delta, np.ones_like(delta)))
        np.testing.assert_allclose(ci[:, 1] - ci[:, 0], 0, atol=1e-12)

    def test_two_point(self):
        t = ScoreTensor.from_dense([[2.0], [4.0]])
        p = ModelParams([3.0], [0.0, 0.0], [1.0, 1.0])
        assert stimulus_residual_std(t, p)[0] == 1.0
        np.testing.assert_allclose(ci_alt(t, p)[0], [3 - 1.96 / math.sqrt(2), 3 + 1.96 / math.sqrt(2)])

    def test_wider_with_inconsistent_subjects(self):
        from opinionfit.synthetic import PanelLayout, generate_synthetic

        g = np.random.default_rng(9)
        ups = np.r_[np.full(22, 0.4), np.full(4, 2.0)]
        delta = g.normal(0, 0.3, 26)
        params = ModelParams(g.uniform(1, 5, 79), delta - delta.mean(), ups)
        r = solve_ap(generate_synthetic(params, PanelLayout(26, 79, seed=9)))
        assert np.mean(r.psi_ci2[:, 1] - r.psi_ci2[:, 0]) > np.mean(r.psi_ci[:, 1] - r.psi_ci[:, 0])


class TestCiMos:
    def test_unanimous(self):
        t = ScoreTensor.from_dense([[3.0], [3.0]])
        np.testing.assert_array_equal(ci_mos(t, MosParams([3.0], [0.0])), [[3.0, 3.0]])

    def test_four_votes(self):
        t = ScoreTensor.from_dense([[1.0], [2.0], [3.0], [4.0]])
        ci = ci_mos(t, MosParams([2.5], [math.sqrt(1.25)]))
        np.testing.assert_allclose(ci[0], [2.5 - 1.96 * 1.118034 / 2, 2.5 + 1.96 * 1.118034 / 2], atol=1e-6)

    def test_shape_check(self):
        with pytest.raises(DataError):
            ci_mos(ScoreTensor.from_dense([[1.0, 2.0]]), MosParams([1.0], [0.0]))


class TestNbic:
    def test_formula(self):
        assert nbic(0.0, 10, 100) == pytest.approx(0.460517, abs=1e-6)

    def test_single_observation(self):
        assert nbic(-3.5, 7, 1) == 7.0

    @settings(max_examples=50)
    @given(L=st.floats(-1e4, 1e4), d=st.floats(0.01, 100), k=st.integers(1, 500), n=st.integers(2, 10**6))
    def test_monotone(self, L, d, k, n):
        assert nbic(L + d, k, n) < nbic(L, k, n)
        assert nbic(L, k + 1, n) > nbic(L, k, n)

    def test_bad_count(self):
        with pytest.raises(ValueError):
            nbic(0.0, 1, 0)


class TestCompareFits:
    def test_identical(self):
        c = compare_fits([1.0, 3.0, 2.0], [1.0, 3.0, 2.0])
        assert c.plcc == pytest.approx(1.0) and c.srocc == pytest.approx(1.0)
        assert c.diff_mean == c.diff_std == c.rmse == 0.0

    def test_negated(self):
        c = compare_fits([1.0, 3.0, 2.0], [-1.0, -3.0, -2.0])
        assert c.plcc == pytest.approx(-1.0) and c.srocc == pytest.approx(-1.0)

    def test_doubled(self):
        c = compare_fits([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])
        assert c.plcc == pytest.approx(1.0) and c.srocc == pytest.approx(1.0)
        assert c.rmse == pytest.approx(math.sqrt(14 / 3))
        assert c.diff_mean == pytest.approx(2.0)
        assert c.diff_std == pytest.approx(math.sqrt(2 / 3))

    def test_ties_average_rank(self):
        a, b = [1.0, 2.0, 2.0, 3.0], [1.0, 3.0, 2.0, 4.0]
        assert compare_fits(a, b).srocc == pytest.approx(np.corrcoef([1, 2.5, 2.5, 4], [1, 3, 2, 4])[0, 1])

    def test_constant_input(self):
        with pytest.raises(NumericalError):
            compare_fits([1.0, 1.0], [1.0, 2.0])

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            compare_fits([1.0, 2.0], [1.0, 2.0, 3.0])
