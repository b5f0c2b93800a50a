"""Recursive emulator: closed-form moments against sampling references,
variance decomposition, fantasy updates, persistence."""

import numpy as np
import pytest

from rnagp.benchmarks import get_problem, make_dataset
from rnagp.data import MultiFidelityDataset
from rnagp.emulator import PosteriorMoments, RnaEmulator
from rnagp.gp import ConditioningError, FitOptions, conditional_moments
from rnagp.kernels import KernelKind, psi
from rnagp.serialize import (
    StaleModelError,
    emulator_to_dict,
    load_emulator,
    save_emulator,
)

GH_NODES, GH_WEIGHTS = np.polynomial.hermite.hermgauss(200)


def mc_chain(models, x, n, rng):
    """Sequential sampling through the level chain, one draw at a time.

    Uses only the plain single-level conditional, so it shares no
    integration code with the closed-form recursion it checks.
    """
    mu, var = conditional_moments(models[0], np.asarray(x, dtype=float))
    f = rng.normal(mu, np.sqrt(var), size=n)
    for model in models[1:]:
        mus = np.empty(n)
        vs = np.empty(n)
        for s in range(n):
            z = np.append(x, f[s])
            mus[s], vs[s] = conditional_moments(model, z)
        f = rng.normal(mus, np.sqrt(vs))
    return f


def mean_and_var_with_se(samples):
    m = float(np.mean(samples))
    v = float(np.var(samples, ddof=1))
    n = samples.size
    se_m = float(np.std(samples, ddof=1) / np.sqrt(n))
    dev = (samples - m) ** 2
    se_v = float(np.std(dev, ddof=1) / np.sqrt(n))
    return m, v, se_m, se_v


class TestInterpolation:
    def test_training_points_are_reproduced_per_level(self, perd_dataset,
                                                      perd_emulator):
        for lv in range(1, 3):
            xs = perd_dataset.designs[lv - 1]
            y = perd_dataset.outputs[lv - 1]
            pm = perd_emulator.predict(xs)
            mu, var = pm.level(lv)
            span = float(np.ptp(y))
            tau = perd_emulator.models[lv - 1].tau_sq
            assert np.max(np.abs(mu - y)) <= 1e-6 * span
            assert np.max(var) <= 1e-8 * tau


class TestSequentialSamplingEquivalence:
    def test_closed_moments_match_independent_chain(self, perd_emulator):
        rng = np.random.default_rng(5)
        for x in (np.array([0.21]), np.array([0.68])):
            samples = mc_chain(perd_emulator.models, x, 3000,
                               np.random.default_rng(11))
            m, v, se_m, se_v = mean_and_var_with_se(samples)
            pm = perd_emulator.predict(x[None, :])
            assert abs(float(pm.mean[0]) - m) <= 4.0 * se_m
            assert abs(float(pm.variance[0]) - v) <= 4.0 * se_v

    def test_closed_moments_match_posterior_sampler(self, perd_emulator):
        rng = np.random.default_rng(42)
        for x in (np.array([0.1]), np.array([0.45]), np.array([0.9])):
            samples = perd_emulator.sample_posterior(x, 40_000, rng)
            m, v, se_m, se_v = mean_and_var_with_se(samples)
            pm = perd_emulator.predict(x[None, :])
            assert abs(float(pm.mean[0]) - m) <= 4.0 * se_m
            assert abs(float(pm.variance[0]) - v) <= 4.0 * se_v

    def test_three_level_sampler_agrees(self, branin_emulator):
        rng = np.random.default_rng(7)
        x = np.array([2.0, 4.0])
        samples = branin_emulator.sample_posterior(x, 40_000, rng)
        m, v, se_m, se_v = mean_and_var_with_se(samples)
        pm = branin_emulator.predict(x[None, :])
        assert abs(float(pm.mean[0]) - m) <= 4.0 * se_m
        assert abs(float(pm.variance[0]) - v) <= 4.0 * se_v


class TestPredictShape:
    def test_moment_shapes_and_level_access(self, perd_emulator):
        xs = np.linspace(0.0, 1.0, 9)[:, None]
        pm = perd_emulator.predict(xs)
        assert pm.means.shape == (2, 9)
        assert pm.variances.shape == (2, 9)
        mu1, var1 = pm.level(1)
        assert mu1.shape == (9,)
        assert np.all(var1 >= 0.0)
        with pytest.raises(ValueError, match="out of range"):
            pm.level(3)

    def test_chunked_prediction_matches_full_batch(self, perd_emulator):
        xs = np.linspace(0.0, 1.0, 23)[:, None]
        full = perd_emulator.predict(xs)
        small = perd_emulator.predict(xs, chunk=5)
        # chunk size steers einsum's contraction order, so the last couple
        # of digits may differ
        np.testing.assert_allclose(small.means, full.means, rtol=1e-10)
        np.testing.assert_allclose(small.variances, full.variances,
                                   rtol=1e-10, atol=1e-13)

    def test_dimension_mismatch_rejected(self, perd_emulator):
        with pytest.raises(ValueError):
            perd_emulator.predict(np.zeros((3, 2)))


class TestPriorReversion:
    def test_far_from_data_moments_revert(self, perd_dataset):
        # short lengthscales make x = 6 effectively uncorrelated with [0, 1]
        from rnagp.kernels import Lengthscales

        em = RnaEmulator.from_hyperparameters(
            perd_dataset, KernelKind.SQEXP,
            [Lengthscales(np.array([0.01])),
             Lengthscales(np.array([0.01]), output_scale=0.5)])
        pm = em.predict(np.array([[6.0]]))
        for lv in (1, 2):
            model = em.models[lv - 1]
            mu, var = pm.level(lv)
            assert float(mu[0]) == pytest.approx(model.alpha, rel=1e-9)
            assert float(var[0]) == pytest.approx(model.tau_sq, rel=1e-9)


class TestDegenerateInnerVariance:
    def test_recursion_collapses_to_plain_conditional(self, perd_dataset,
                                                      perd_emulator):
        # at a nested training point the level-1 variance is ~1e-12 tau^2,
        # so the recursive step must agree with conditioning on the level-1
        # mean to the same order
        x = perd_dataset.designs[1][2]
        pm = perd_emulator.predict(x[None, :])
        mu1 = float(pm.level(1)[0][0])
        mu2, var2 = conditional_moments(perd_emulator.models[1],
                                        np.append(x, mu1))
        tau_sq = perd_emulator.models[1].tau_sq
        assert float(pm.mean[0]) == pytest.approx(mu2, rel=1e-6, abs=1e-9)
        # the residual gap is the level-1 uncertainty contribution, which
        # scales with the (tiny but nonzero) level-1 variance here
        assert abs(float(pm.variance[0]) - var2) <= 1e-8 * tau_sq


class TestVarianceDecomposition:
    def test_two_level_shares_sum_exactly(self, perd_emulator, rng):
        xs = rng.uniform(size=(10, 1))
        for x in xs:
            dec = perd_emulator.decompose_variance(x)
            assert dec.se is None
            assert dec.contributions.shape == (2,)
            assert np.sum(dec.contributions) == pytest.approx(
                dec.total, rel=1e-10, abs=1e-13)

    def test_batch_matches_per_point(self, perd_emulator, rng):
        xs = rng.uniform(size=(6, 1))
        batch = perd_emulator.decompose_variance_two_batch(xs)
        assert batch.shape == (2, 6)
        for j, x in enumerate(xs):
            dec = perd_emulator.decompose_variance(x)
            np.testing.assert_allclose(batch[:, j], dec.contributions,
                                       rtol=1e-9, atol=1e-13)

    def test_three_level_shares_sum_within_sampling_error(
            self, branin_emulator):
        x = np.array([-2.0, 9.0])
        dec = branin_emulator.decompose_variance(
            x, n_samples=6000, rng=np.random.default_rng(3))
        assert dec.contributions.shape == (3,)
        assert dec.se is not None and dec.se > 0.0
        gap = abs(float(np.sum(dec.contributions)) - dec.total)
        assert gap <= 4.0 * dec.se

    def test_single_level_returns_total(self):
        problem = get_problem("perdikaris")
        rng = np.random.default_rng(0)
        x1 = problem.sample_inputs(8, rng)
        ds = MultiFidelityDataset(
            bounds=problem.bounds, designs=(x1,),
            outputs=(np.array([problem.evaluate(1, x) for x in x1]),),
            costs=(1.0,))
        em = RnaEmulator.fit(ds, KernelKind.SQEXP, FitOptions(restarts=1))
        dec = em.decompose_variance(np.array([0.4]))
        assert dec.contributions.shape == (1,)
        assert dec.contributions[0] == dec.total

    def test_four_levels_not_supported(self):
        rng = np.random.default_rng(2)
        x1 = np.sort(rng.uniform(size=8))[:, None]
        y = np.sin(3.0 * x1[:, 0])
        ds = MultiFidelityDataset(
            bounds=np.array([[0.0, 1.0]]),
            designs=(x1, x1[:6], x1[:4], x1[:3]),
            outputs=(y, y[:6] * 0.9, y[:4] * 0.8, y[:3] * 0.7),
            costs=(1.0, 2.0, 4.0, 8.0))
        em = RnaEmulator.fit(ds, KernelKind.SQEXP, FitOptions(restarts=1))
        with pytest.raises(NotImplementedError):
            em.decompose_variance(np.array([0.5]))


class TestScalingFactor:
    def test_bounded_and_near_one_at_training_points(self, perd_dataset,
                                                     perd_emulator):
        grid = np.linspace(0.0, 1.0, 41)[:, None]
        factor = perd_emulator.scaling_factor(grid)
        assert factor.shape == (41,)
        assert np.all(factor > 0.0) and np.all(factor <= 1.0)
        at_data = perd_emulator.scaling_factor(perd_dataset.designs[0][:5])
        assert np.all(at_data > 0.999)

    def test_sqexp_factor_matches_quadrature_ratio(self, perd_emulator):
        # the closed form equals E[psi(f, y)] / psi(mu, y) evaluated at
        # y = mu, where the tilt term drops and only the prefactor is left
        x = np.array([[0.37]])
        pm = perd_emulator.predict(x)
        model = perd_emulator.models[1]
        lo_y = float(model.lo[1])
        span_y = float(model.hi[1] - model.lo[1])
        mu_t = (float(pm.level(1)[0][0]) - lo_y) / span_y
        var_t = float(pm.level(1)[1][0]) / span_y**2
        theta = model.scales.output_scale
        f = mu_t + np.sqrt(2.0 * var_t) * GH_NODES
        ref = float(GH_WEIGHTS @ psi(KernelKind.SQEXP, f, mu_t, theta))
        ref /= np.sqrt(np.pi)
        got = float(perd_emulator.scaling_factor(x)[0])
        assert got == pytest.approx(ref, rel=1e-9)

    def test_matern_path_is_bounded(self, perd_dataset):
        em = RnaEmulator.fit(perd_dataset, KernelKind.MATERN25,
                             FitOptions(restarts=1))
        factor = em.scaling_factor(np.linspace(0.0, 1.0, 11)[:, None])
        assert np.all(factor > 0.0) and np.all(factor <= 1.0)

    def test_level_argument_validation(self, perd_emulator):
        with pytest.raises(ValueError, match="level must be"):
            perd_emulator.scaling_factor(np.array([[0.5]]), level=1)


class TestFantasyUpdates:
    def test_imputed_point_is_interpolated(self, perd_emulator):
        x = np.array([0.333])
        fantasy = perd_emulator.with_imputed(x, [0.2, -0.4])
        pm = fantasy.predict(x[None, :])
        assert float(pm.mean[0]) == pytest.approx(-0.4, abs=1e-6)
        assert float(pm.variance[0]) <= 1e-8 * fantasy.models[1].tau_sq
        # the base emulator is untouched
        assert perd_emulator.models[0].design.shape[0] == 13

    def test_fanned_level1_matches_explicit_loop(self, perd_emulator):
        x = np.array([0.52])
        draws = np.linspace(-0.5, 0.5, 7)[:, None]
        xs = np.linspace(0.05, 0.95, 5)[:, None]
        fanned = perd_emulator.imputed_top_variance(x, draws, xs)
        assert fanned.shape == (7, 5)
        for s, chain in enumerate(draws):
            fantasy = perd_emulator.with_imputed(x, chain)
            want = fantasy.predict(xs).variance
            np.testing.assert_allclose(fanned[s], want, rtol=1e-8,
                                       atol=1e-12)

    def test_fanned_level2_matches_explicit_loop(self, perd_emulator):
        x = np.array([0.52])
        chains = np.column_stack([np.linspace(-0.5, 0.5, 5),
                                  np.linspace(1.0, 2.0, 5)])
        xs = np.linspace(0.05, 0.95, 4)[:, None]
        fanned = perd_emulator.imputed_top_variance(x, chains, xs)
        assert fanned.shape == (5, 4)
        for s, chain in enumerate(chains):
            fantasy = perd_emulator.with_imputed(x, chain)
            want = fantasy.predict(xs).variance
            np.testing.assert_allclose(fanned[s], want, rtol=1e-8,
                                       atol=1e-12)

    def test_skip_level_reuses_known_output(self, perd_dataset,
                                            perd_emulator):
        # row 9 exists at level 1 only; acquiring level 2 there must not
        # re-add the level-1 point
        x = perd_dataset.designs[0][9]
        y1 = float(perd_dataset.outputs[0][9])
        chains = np.column_stack([np.full(3, y1),
                                  np.linspace(-1.0, 1.0, 3)])
        fanned = perd_emulator.imputed_top_variance(
            x, chains, np.array([[0.4]]), skip_levels={1})
        for s, chain in enumerate(chains):
            fantasy = perd_emulator.with_imputed(x, chain, skip_levels={1})
            assert fantasy.models[0].design.shape[0] == 13
            assert fantasy.models[1].design.shape[0] == 9
            want = fantasy.predict(np.array([[0.4]])).variance
            np.testing.assert_allclose(fanned[s], want, rtol=1e-8)

    def test_chain_length_validation(self, perd_emulator):
        with pytest.raises(ValueError, match="y_chain"):
            perd_emulator.with_imputed(np.array([0.5]), [1.0, 2.0, 3.0])

    def test_duplicate_location_raises(self, perd_dataset, perd_emulator):
        x = perd_dataset.designs[0][0]
        with pytest.raises(ConditioningError):
            perd_emulator.with_imputed(x, [0.0])


class TestPersistence:
    def test_round_trip_reproduces_predictions(self, tmp_path, perd_dataset,
                                               perd_emulator):
        path = tmp_path / "emulator.json"
        save_emulator(perd_emulator, path)
        back = load_emulator(path, perd_dataset)
        xs = np.linspace(0.0, 1.0, 17)[:, None]
        a = perd_emulator.predict(xs)
        b = back.predict(xs)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.variances, b.variances)

    def test_payload_carries_per_level_scales(self, perd_emulator):
        payload = emulator_to_dict(perd_emulator)
        assert len(payload["levels"]) == 2
        assert "output_lengthscale" in payload["levels"][1]
        assert payload["levels"][0].get("output_lengthscale") is None

    def test_stale_dataset_is_rejected(self, tmp_path, perd_dataset,
                                       perd_emulator):
        path = tmp_path / "emulator.json"
        save_emulator(perd_emulator, path)
        other = make_dataset(get_problem("perdikaris"), (13, 8), seed=1)
        with pytest.raises(StaleModelError, match="different dataset"):
            load_emulator(path, other)

    def test_rebuild_from_scales_is_exact(self, perd_dataset, perd_emulator):
        em = RnaEmulator.from_hyperparameters(
            perd_dataset, KernelKind.SQEXP,
            [m.scales for m in perd_emulator.models])
        xs = np.linspace(0.0, 1.0, 13)[:, None]
        a = perd_emulator.predict(xs)
        b = em.predict(xs)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.variances, b.variances)


class TestRefit:
    def test_refit_after_growth_interpolates_new_point(self):
        problem = get_problem("perdikaris")
        ds = make_dataset(problem, (9, 5), seed=3)
        em = RnaEmulator.fit(ds, KernelKind.SQEXP, FitOptions(restarts=1))
        x = np.array([0.42])
        grown = ds.with_point(
            2, x, {1: problem.evaluate(1, x), 2: problem.evaluate(2, x)})
        em2 = em.refit(grown)
        assert em2.models[0].design.shape[0] == 10
        pm = em2.predict(x[None, :])
        want = problem.evaluate(2, x)
        assert float(pm.mean[0]) == pytest.approx(want, abs=1e-5)
