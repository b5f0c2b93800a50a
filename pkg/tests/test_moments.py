"""Kernel expectation checks against two independent references.

The closed forms are compared against 200-node Gauss-Hermite on
randomized well-scaled cases, and against 50-digit mpmath integrals
(split at the integrand kinks) in the regimes fixed-node quadrature
cannot resolve: near-zero variance, wide variance, far tails, strong
exponential tilt. Neither reference shares code with the implementation.
"""

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnagp.kernels import SQRT3, SQRT5, KernelKind, psi
from rnagp.moments import (
    expected_psi,
    expected_psi_cross,
    expected_psi_elem,
    expected_psi_pair,
)

GH_NODES, GH_WEIGHTS = np.polynomial.hermite.hermgauss(200)

MATERN_KINDS = [KernelKind.MATERN15, KernelKind.MATERN25]
ALL_KINDS = [KernelKind.SQEXP, *MATERN_KINDS]


def gh_expect(fn, mu, var):
    """E[fn(f)], f ~ N(mu, var), by 200-node Gauss-Hermite."""
    f = mu + np.sqrt(2.0 * var) * GH_NODES
    return float(GH_WEIGHTS @ fn(f)) / np.sqrt(np.pi)


def draw_case(rng):
    """A case Gauss-Hermite can resolve.

    The integrand has a kink at each conditioning value, and fixed-node
    quadrature converges there only while the kink stays blunt relative
    to the density width: the error is set by sqrt(3) sigma / theta (a
    measured e-7 at 0.3, e-4 at 1, e-1 at 10). Keeping the ratio under
    0.085 holds 200 nodes comfortably below 1e-6; sharper regimes are
    covered by the arbitrary-precision reference below instead.
    """
    theta = 10.0 ** rng.uniform(-1.0, 1.0)
    sigma = theta * 10.0 ** rng.uniform(-3.0, -1.07)
    mu = rng.uniform(-3.0, 3.0)
    y = mu + sigma * rng.uniform(-5.0, 5.0)
    return mu, sigma * sigma, y, theta


class TestGaussHermiteXi:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
    def test_matches_quadrature_on_randomized_cases(self, kind):
        rng = np.random.default_rng(202)
        checked = 0
        while checked < 120:
            mu, var, y, theta = draw_case(rng)
            ref = gh_expect(lambda f: psi(kind, f, y, theta), mu, var)
            if ref < 1e-10:
                continue
            got = float(expected_psi(kind, mu, var, np.array([y]), theta)[0])
            assert got == pytest.approx(ref, rel=1e-6), (mu, var, y, theta)
            checked += 1

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
    def test_batched_rows_match_scalar_calls(self, kind):
        rng = np.random.default_rng(17)
        mu = rng.uniform(-1.0, 1.0, size=6)
        var = 10.0 ** rng.uniform(-3.0, 0.0, size=6)
        y = rng.uniform(-1.5, 1.5, size=4)
        full = expected_psi(kind, mu, var, y, 0.7)
        assert full.shape == (6, 4)
        for i in range(6):
            row = expected_psi(kind, mu[i], var[i], y, 0.7)
            assert np.array_equal(full[i], row)


class TestGaussHermiteZeta:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
    def test_matches_quadrature_on_randomized_cases(self, kind):
        rng = np.random.default_rng(404)
        checked = 0
        while checked < 120:
            mu, var, y1, theta = draw_case(rng)
            y2 = mu + np.sqrt(var) * rng.uniform(-5.0, 5.0)
            ref = gh_expect(
                lambda f, a=y1, b=y2: psi(kind, f, a, theta)
                * psi(kind, f, b, theta),
                mu, var)
            if ref < 1e-10:
                continue
            got = float(expected_psi_cross(kind, mu, var, y1, y2, theta))
            assert got == pytest.approx(ref, rel=1e-6), (mu, var, y1, y2, theta)
            checked += 1

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
    def test_swapping_conditioning_values_changes_nothing(self, kind):
        rng = np.random.default_rng(11)
        for _ in range(30):
            mu, var, y1, theta = draw_case(rng)
            y2 = mu + np.sqrt(var) * rng.uniform(-5.0, 5.0)
            a = expected_psi_cross(kind, mu, var, y1, y2, theta)
            b = expected_psi_cross(kind, mu, var, y2, y1, theta)
            assert np.array_equal(a, b)


def _mp_psi(kind, d, theta):
    """The correlation at distance d >= 0, in mpmath arithmetic."""
    if kind is KernelKind.SQEXP:
        return mp.e ** (-(d * d) / theta)
    root = mp.sqrt(3) if kind is KernelKind.MATERN15 else mp.sqrt(5)
    u = root * d / theta
    if kind is KernelKind.MATERN15:
        return (1 + u) * mp.e ** (-u)
    return (1 + u + u * u / 3) * mp.e ** (-u)


# Both references integrate in standardized coordinates t = (f - mu)/sigma
# so the density never degenerates into a needle the quadrature misses,
# and split the range at the density peak and every kink.

def mp_xi(kind, mu, var, y, theta):
    mu, var, y, theta = map(mp.mpf, (mu, var, y, theta))
    sigma = mp.sqrt(var)

    def integrand(t):
        d = abs(sigma * t - (y - mu))
        return (_mp_psi(kind, d, theta)
                * mp.e ** (-t * t / 2) / mp.sqrt(2 * mp.pi))

    pts = sorted({-mp.inf, mp.mpf(0), (y - mu) / sigma, mp.inf})
    return mp.quad(integrand, pts)


def mp_zeta(kind, mu, var, y1, y2, theta):
    mu, var, y1, y2, theta = map(mp.mpf, (mu, var, y1, y2, theta))
    sigma = mp.sqrt(var)

    def integrand(t):
        f = sigma * t
        return (_mp_psi(kind, abs(f - (y1 - mu)), theta)
                * _mp_psi(kind, abs(f - (y2 - mu)), theta)
                * mp.e ** (-t * t / 2) / mp.sqrt(2 * mp.pi))

    pts = sorted({-mp.inf, mp.mpf(0), (y1 - mu) / sigma,
                  (y2 - mu) / sigma, mp.inf})
    return mp.quad(integrand, pts)


# Regimes chosen to exercise every evaluation branch: the recurrence
# (kink near the mean), the Gauss-Laguerre tail (kink many sigma out),
# near-degenerate and wide variances, and short and long lengthscales.
DEEP_CASES = [
    (0.3, 1e-12, 0.31, 0.5),
    (0.0, 1e-6, 0.002, 0.5),
    (0.0, 50.0, 1.0, 0.5),
    (1.0, 0.04, 7.0, 0.5),
    (0.0, 1.0, 30.0, 2.0),
    (-2.0, 0.25, -2.1, 0.01),
    (0.5, 4.0, 0.0, 100.0),
]


class TestDeepReference:
    @pytest.mark.parametrize("kind", MATERN_KINDS, ids=lambda k: k.value)
    @pytest.mark.parametrize("case", DEEP_CASES, ids=repr)
    def test_xi_in_hard_regimes(self, kind, case):
        mu, var, y, theta = case
        with mp.workdps(50):
            ref = float(mp_xi(kind, mu, var, y, theta))
        got = float(expected_psi(kind, mu, var, np.array([y]), theta)[0])
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("kind", MATERN_KINDS, ids=lambda k: k.value)
    @pytest.mark.parametrize(
        "case",
        [
            (0.3, 1e-12, 0.31, 0.29, 0.5),
            (0.0, 1e-6, 0.002, -0.001, 0.5),
            (0.0, 50.0, 1.0, -1.0, 0.5),
            (1.0, 0.04, 7.0, 6.0, 0.5),
            (0.0, 1.0, 30.0, -3.0, 2.0),
            (-2.0, 0.25, -2.1, -1.9, 0.01),
        ],
        ids=repr,
    )
    def test_zeta_in_hard_regimes(self, kind, case):
        mu, var, y1, y2, theta = case
        with mp.workdps(50):
            ref = float(mp_zeta(kind, mu, var, y1, y2, theta))
        got = float(expected_psi_cross(kind, mu, var, y1, y2, theta))
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-300)


class TestDegenerateVariance:
    @pytest.mark.parametrize("kind", MATERN_KINDS, ids=lambda k: k.value)
    def test_zero_variance_xi_is_exact_kernel_value(self, kind):
        got = expected_psi(kind, 0.4, 0.0, np.array([1.1, -0.2]), 0.7)
        want = psi(kind, 0.4, np.array([1.1, -0.2]), 0.7)
        assert np.array_equal(got, want)

    @pytest.mark.parametrize("kind", MATERN_KINDS, ids=lambda k: k.value)
    def test_zero_variance_zeta_is_exact_kernel_product(self, kind):
        got = expected_psi_cross(kind, 0.4, 0.0, 1.1, -0.2, 0.7)
        want = psi(kind, 0.4, -0.2, 0.7) * psi(kind, 0.4, 1.1, 0.7)
        assert float(got) == float(want)

    def test_zero_variance_sqexp_matches_kernel(self):
        got = expected_psi(KernelKind.SQEXP, 0.4, 0.0, np.array([1.1]), 0.7)
        want = psi(KernelKind.SQEXP, 0.4, 1.1, 0.7)
        assert float(got[0]) == pytest.approx(float(want), rel=1e-14)

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
    def test_tiny_variance_approaches_kernel(self, kind):
        got = expected_psi(kind, 0.4, 1e-300, np.array([1.1]), 0.7)
        want = psi(kind, 0.4, 1.1, 0.7)
        assert float(got[0]) == pytest.approx(float(want), rel=1e-12)


class TestConsistencyAcrossEntryPoints:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
    def test_pair_matrix_agrees_with_cross(self, kind):
        rng = np.random.default_rng(5)
        y = rng.uniform(-1.0, 1.0, size=5)
        Z = expected_psi_pair(kind, 0.2, 0.3, y, 0.8)
        assert Z.shape == (5, 5)
        for i in range(5):
            for k in range(5):
                direct = expected_psi_cross(kind, 0.2, 0.3, y[i], y[k], 0.8)
                assert float(Z[i, k]) == float(direct)

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
    def test_pair_matrix_is_symmetric(self, kind):
        rng = np.random.default_rng(6)
        y = rng.uniform(-2.0, 2.0, size=7)
        Z = expected_psi_pair(kind, -0.4, 0.9, y, 0.6)
        assert np.array_equal(Z, Z.T)

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
    def test_elem_matches_vector_entry_points(self, kind):
        rng = np.random.default_rng(7)
        mu = rng.uniform(-1.0, 1.0, size=4)
        var = 10.0 ** rng.uniform(-3.0, 0.0, size=4)
        y = rng.uniform(-1.0, 1.0, size=4)
        elem = expected_psi_elem(kind, mu, var, y, 0.8)
        for i in range(4):
            ref = expected_psi(kind, mu[i], var[i], np.array([y[i]]), 0.8)[0]
            assert float(elem[i]) == float(ref)

    def test_sqexp_pair_diagonal_halves_the_lengthscale(self):
        # psi(f, y)^2 under sqexp is the same correlation at theta / 2
        y = np.array([0.3, -1.2])
        Z = expected_psi_pair(KernelKind.SQEXP, 0.1, 0.5, y, 0.9)
        xi_half = expected_psi(KernelKind.SQEXP, 0.1, 0.5, y, 0.45)
        np.testing.assert_allclose(np.diag(Z), xi_half, rtol=1e-12)


@st.composite
def moment_args(draw):
    mu = draw(st.floats(-50.0, 50.0))
    var = draw(st.floats(0.0, 1e4))
    y1 = draw(st.floats(-50.0, 50.0))
    y2 = draw(st.floats(-50.0, 50.0))
    theta = draw(st.floats(1e-2, 1e2))
    return mu, var, y1, y2, theta


class TestInvariants:
    @settings(max_examples=150, deadline=None)
    @given(args=moment_args(), kind=st.sampled_from(ALL_KINDS))
    def test_bounds_and_product_ordering(self, args, kind):
        mu, var, y1, y2, theta = args
        xi = expected_psi(kind, mu, var, np.array([y1, y2]), theta)
        zeta = float(expected_psi_cross(kind, mu, var, y1, y2, theta))
        assert np.all(xi >= 0.0) and np.all(xi <= 1.0 + 1e-12)
        assert 0.0 <= zeta <= 1.0 + 1e-12
        # psi <= 1 pointwise, so the product expectation is below either factor
        assert zeta <= float(np.min(xi)) + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(args=moment_args(), kind=st.sampled_from(ALL_KINDS))
    def test_cauchy_schwarz_between_pair_entries(self, args, kind):
        mu, var, y1, y2, theta = args
        Z = expected_psi_pair(kind, mu, var, np.array([y1, y2]), theta)
        bound = np.sqrt(Z[0, 0] * Z[1, 1])
        assert Z[0, 1] <= bound + 1e-12
