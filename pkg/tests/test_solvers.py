import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opinionfit import kernels
from opinionfit.model import ModelParams, ScoreTensor, log_likelihood
from opinionfit.solvers import (
    Method,
    SolverConfig,
    ap_initialize,
    fit,
    nr_initialize,
    solve_ap,
    solve_mos,
    solve_nr,
)
from opinionfit.synthetic import PanelLayout, generate_synthetic, random_model_params


def synthetic(I=20, J=40, R=1, seed=0, missing=0.0, upsilon_range=(0.4, 1.2)):
    p = random_model_params(I, J, seed, upsilon_range=upsilon_range)
    return generate_synthetic(p, PanelLayout(I, J, R, missing, seed)), p


class TestMos:
    def test_single_stimulus(self):
        r = solve_mos(ScoreTensor.from_dense([[1.0], [2.0], [3.0], [4.0]]))
        assert r.psi[0] == 2.5
        assert r.params.upsilon_j[0] == pytest.approx(math.sqrt(1.25))
        half = 1.96 * math.sqrt(1.25) / 2
        assert r.psi_ci[0, 0] == pytest.approx(2.5 - half)
        assert r.psi_ci[0, 1] == pytest.approx(2.5 + half)

    def test_unanimous_stimulus_finite(self):
        r = solve_mos(ScoreTensor.from_dense([[3.0, 1.0], [3.0, 2.0]]))
        assert np.isfinite(r.log_likelihood)
        assert r.params.upsilon_j[0] == 0.0
        assert r.num_params == 4


class TestInitialization:
    def test_nr_initialize(self):
        p = nr_initialize(ScoreTensor.from_dense([[1.0, 2.0], [2.0, 5.0]]))
        np.testing.assert_allclose(p.psi, [1.5, 3.5])
        np.testing.assert_array_equal(p.delta, [0.0, 0.0])
        np.testing.assert_allclose(p.upsilon, [0.5, 0.5])

    def test_ap_initialize(self):
        psi, delta = ap_initialize(ScoreTensor.from_dense([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_allclose(psi, [2.0, 3.0])
        np.testing.assert_allclose(delta, [-1.0, 1.0])

    def test_nr_floor(self):
        p = nr_initialize(ScoreTensor.from_dense([[1.0, 2.0], [1.0, 2.0]]))
        np.testing.assert_array_equal(p.upsilon, [1e-8, 1e-8])


class TestConfig:
    @pytest.mark.parametrize("kw", [{"alpha": 0}, {"alpha": 1.5}, {"psi_threshold": -1}, {"max_iterations": 0},
                                    {"upsilon_floor": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)

    def test_iteration_cap(self):
        t, _ = synthetic(seed=1)
        r = solve_nr(t, SolverConfig(max_iterations=3))
        assert r.iterations == 3 and not r.converged
        assert any("did not converge" in w for w in r.warnings)


class TestNoiseless:
    @pytest.mark.parametrize("solver", [solve_nr, solve_ap])
    def test_recovers_quality(self, solver, noiseless_panel):
        t, psi, _ = noiseless_panel
        r = solver(t)
        assert r.converged
        np.testing.assert_allclose(r.psi, psi, atol=1e-6)

    def test_ap_upsilon_at_floor(self, noiseless_panel):
        r = solve_ap(noiseless_panel[0])
        np.testing.assert_array_equal(r.params.upsilon, 1e-8)

    def test_nr_complete_stops_at_once(self, noiseless_panel):
        # psi starts at the exact answer, so the first psi step is already below threshold
        r = solve_nr(noiseless_panel[0])
        assert r.iterations == 1
        assert np.all(r.params.upsilon < 2e-8)

    @pytest.mark.parametrize("solver", [solve_nr, solve_ap])
    def test_recovers_all_with_missing(self, solver, noiseless_panel):
        t, psi, delta = noiseless_panel
        mask = np.random.default_rng(1).random((10, 20)) > 0.2
        r = solver(ScoreTensor.from_dense(t.dense().filled(0)[:, :, 0], mask))
        np.testing.assert_allclose(r.psi, psi, atol=1e-6)
        np.testing.assert_allclose(r.params.delta, delta, atol=1e-6)
        assert np.all(r.params.upsilon < 1e-3)


class TestAgreement:
    def test_nr_ap_same_optimum(self):
        for seed in range(5):
            t, _ = synthetic(seed=seed, missing=0.1)
            a, b = solve_nr(t), solve_ap(t)
            np.testing.assert_allclose(a.psi, b.psi, atol=1e-4)
            np.testing.assert_allclose(a.params.delta, b.params.delta, atol=1e-4)
            np.testing.assert_allclose(a.params.upsilon, b.params.upsilon, atol=1e-4)
            assert a.log_likelihood == pytest.approx(b.log_likelihood, rel=1e-7)

    def test_ap_faster(self):
        t, _ = synthetic(26, 79, seed=7)
        assert solve_ap(t).iterations < solve_nr(t).iterations

    def test_ap_improves_likelihood(self):
        for seed in range(5):
            t, _ = synthetic(seed=seed)
            psi0, delta0 = ap_initialize(t)
            eps = t.scores - psi0[t.stimulus_index] - delta0[t.subject_index]
            ups0 = np.maximum(kernels.subject_sigma(t.subject_index, eps, t.num_subjects), 1e-8)
            L0 = log_likelihood(t, ModelParams(psi0, delta0, ups0))
            assert solve_ap(t).log_likelihood >= L0

    def test_zero_mean_bias(self):
        t, _ = synthetic(seed=3, missing=0.2)
        for r in (solve_nr(t), solve_ap(t)):
            assert abs(r.params.delta.sum()) < 1e-12

    def test_parameter_count(self):
        t, _ = synthetic(12, 30, seed=2)
        assert solve_ap(t).num_params == 30 + 24


class TestEquivariance:
    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_permutation(self, seed):
        t, _ = synthetic(8, 15, seed=seed)
        g = np.random.default_rng(seed)
        ps, pj = g.permutation(8), g.permutation(15)
        d = t.dense().filled(np.nan)[ps][:, pj]
        t2 = ScoreTensor.from_dense(d, subjects=[t.subjects[i] for i in ps], stimuli=[t.stimuli[j] for j in pj])
        a, b = solve_ap(t), solve_ap(t2)
        np.testing.assert_allclose(b.psi, a.psi[pj], atol=1e-12)
        np.testing.assert_allclose(b.params.delta, a.params.delta[ps], atol=1e-12)
        np.testing.assert_allclose(b.params.upsilon, a.params.upsilon[ps], atol=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 10_000), c=st.floats(-5, 5))
    def test_shift(self, seed, c):
        t, _ = synthetic(8, 15, seed=seed)
        a = solve_ap(t)
        b = solve_ap(t.with_scores(t.scores + c))
        np.testing.assert_allclose(b.psi, a.psi + c, atol=1e-9)
        np.testing.assert_allclose(b.params.delta, a.params.delta, atol=1e-9)
        np.testing.assert_allclose(b.params.upsilon, a.params.upsilon, atol=1e-9)


class TestWeighting:
    def test_quadrupled_inconsistency_quarters_weight(self):
        # stimulus 0 voted by two subjects; compare against the weighted-mean formula
        subj = np.array([0, 1])
        stim = np.array([0, 0])
        u = np.array([2.0, 5.0])
        delta = np.zeros(2)
        for v0 in (0.5, 1.0):
            psi = kernels.psi_update(subj, stim, u, 1, delta, np.array([v0, 1.0]))
            w0 = 1.0 / v0**2
            assert psi[0] == pytest.approx((w0 * 2.0 + 5.0) / (w0 + 1.0))
        low = kernels.psi_update(subj, stim, u, 1, delta, np.array([1.0, 1.0]))
        high = kernels.psi_update(subj, stim, u, 1, delta, np.array([2.0, 1.0]))
        # doubling upsilon moves the weight from 1 to 1/4
        assert low[0] == pytest.approx(3.5)
        assert high[0] == pytest.approx((0.25 * 2 + 5) / 1.25)


class TestEdgeCases:
    def test_single_vote_subject_flagged(self):
        u = np.array([[1.0, 2.0, 3.0], [2.0, 3.0, 4.5], [1.5, 2.0, 3.5], [9.0, 0.0, 0.0]])
        mask = np.ones_like(u, dtype=bool)
        mask[3, 1:] = False
        t = ScoreTensor.from_dense(u, mask)
        for r in (solve_nr(t), solve_ap(t)):
            assert r.flagged_subjects == (3,)
            assert r.params.upsilon[3] == 1e-8
            assert any("single vote" in w for w in r.warnings)

    def test_collapse_warned(self):
        # subject 0 agrees exactly with the consensus of a noisy panel
        g = np.random.default_rng(0)
        u = g.normal(3, 1, size=(6, 10))
        u[0] = np.mean(u[1:], axis=0)
        r = solve_ap(ScoreTensor.from_dense(u))
        assert any("collapsed" in w for w in r.warnings)

    def test_deterministic(self):
        t, _ = synthetic(seed=11, missing=0.15)
        for m in Method:
            a, b = fit(t, m), fit(t, m)
            np.testing.assert_array_equal(a.psi, b.psi)
            assert a.log_likelihood == b.log_likelihood

    def test_repetitions(self):
        t, p = synthetic(10, 25, R=3, seed=4)
        r = solve_ap(t)
        assert r.num_obs == 750
        assert np.sqrt(np.mean((r.psi - p.psi) ** 2)) < 0.3
