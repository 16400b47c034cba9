"""Tests for the Markov kernels: balance identities, stationarity, and the
analytically tractable mixture kernel."""

import numpy as np
import pytest

from smckit import (GaussianOracle, IndepMixtureKernel, KernelSpec,
                    MALAKernel, PCNKernel, RWMKernel, indep_mixture_step,
                    make_kernel, mala_step, pcn_rho_for_lambda, pcn_step,
                    rwm_step)
from smckit.errors import ConfigError, StateCorruptionError
from smckit.kernels import KernelStats, default_mala_h


def gauss_logpi(x):
    return -0.5 * np.sum(x * x, axis=-1)


def gauss_grad(x):
    return -x


def batch_se_of_mean(chain, n_batches=100):
    """Standard error of an autocorrelated chain mean via batch means."""
    n = chain.size - chain.size % n_batches
    means = chain[:n].reshape(n_batches, -1).mean(axis=1)
    return means.std(ddof=1) / np.sqrt(n_batches)


class TestDetailedBalance:
    """log[pi(x) q(x->y) alpha(x->y)] == log[pi(y) q(y->x) alpha(y->x)]
    within 1e-10 over proposal-generated pairs, using the kernels' own
    acceptance probabilities and independently coded proposal densities."""

    N_PAIRS = 10_000

    def test_rwm(self):
        rng = np.random.default_rng(11)
        scale = 0.9
        kern = RWMKernel(gauss_logpi, scale)
        x = rng.standard_normal((self.N_PAIRS, 2))
        y = x + scale * rng.standard_normal((self.N_PAIRS, 2))
        # symmetric proposal: q terms cancel, include them anyway
        def q(a, b):
            return -np.sum((b - a) ** 2) / (2 * scale**2)
        for xi, yi in zip(x, y):
            lhs = gauss_logpi(xi) + q(xi, yi) + kern.log_alpha(xi, yi)
            rhs = gauss_logpi(yi) + q(yi, xi) + kern.log_alpha(yi, xi)
            assert abs(lhs - rhs) < 1e-10

    def test_mala(self):
        rng = np.random.default_rng(12)
        h = 0.3
        kern = MALAKernel(gauss_logpi, gauss_grad, h)
        x = rng.standard_normal((self.N_PAIRS, 2))
        y = x + h * gauss_grad(x) + np.sqrt(2 * h) * rng.standard_normal(x.shape)
        def q(a, b):
            return -np.sum((b - a - h * gauss_grad(a)) ** 2) / (4 * h)
        for xi, yi in zip(x, y):
            lhs = gauss_logpi(xi) + q(xi, yi) + kern.log_alpha(xi, yi)
            rhs = gauss_logpi(yi) + q(yi, xi) + kern.log_alpha(yi, xi)
            assert abs(lhs - rhs) < 1e-10

    def test_pcn(self):
        rng = np.random.default_rng(13)
        rho, lam = 0.7, 0.8
        phi = lambda x: lam * 0.5 * np.sum(x * x, axis=-1)
        kern = PCNKernel(phi, rho, cov=np.eye(2))
        x = rng.standard_normal((self.N_PAIRS, 2))
        y = rho * x + np.sqrt(1 - rho**2) * rng.standard_normal(x.shape)
        # target: N(0, I) * exp(-phi); proposal N(rho x, (1-rho^2) I)
        def logpi(a):
            return -0.5 * np.sum(a * a) - lam * 0.5 * np.sum(a * a)
        def q(a, b):
            return -np.sum((b - rho * a) ** 2) / (2 * (1 - rho**2))
        for xi, yi in zip(x, y):
            lhs = logpi(xi) + q(xi, yi) + kern.log_alpha(xi, yi)
            rhs = logpi(yi) + q(yi, xi) + kern.log_alpha(yi, xi)
            assert abs(lhs - rhs) < 1e-10


class TestStationarity:
    """Exact samples stay exact: after k kernel steps the first and second
    moments deviate from the analytic values by at most 4 standard errors."""

    N_CHAINS = 4000

    def setup_method(self):
        self.orc = GaussianOracle([0.3, -0.2], [[1.2, 0.2], [0.2, 0.9]],
                                  [0.0, 0.5], [[0.8, 0.0], [0.0, 1.1]],
                                  [0.5, 1.0])
        self.seq = self.orc.sequence(curvature=(1.0, 1.0, 1.0))

    def _check(self, kernel, s, seed):
        mean, cov = self.orc.mean(s), self.orc.cov(s)
        se_mean = np.sqrt(np.diag(cov) / self.N_CHAINS)
        se_var = np.sqrt(2 * np.diag(cov) ** 2 / self.N_CHAINS)
        for k in (1, 10, 100):
            rng = np.random.default_rng(seed + k)
            x0 = self.orc.sample(s, self.N_CHAINS, rng)
            x, _ = kernel.run_chain(x0, k, rng, keep="last")
            assert np.all(np.abs(x.mean(axis=0) - mean) < 4 * se_mean)
            second = np.mean((x - mean) ** 2, axis=0)
            assert np.all(np.abs(second - np.diag(cov)) < 4 * se_var)

    def test_rwm_stationary(self):
        kern = make_kernel(KernelSpec("rwm", 0.8), self.seq, 1)
        self._check(kern, 0, 101)

    def test_mala_stationary(self):
        kern = make_kernel(KernelSpec("mala", 0.15), self.seq, 1)
        self._check(kern, 0, 102)

    def test_pcn_stationary(self):
        kern = make_kernel(KernelSpec("pcn", 0.6), self.seq, 1)
        self._check(kern, 0, 103)

    def test_mixture_stationary(self):
        kern = make_kernel(KernelSpec("indep_mixture", 0.4), self.seq, 1)
        self._check(kern, 0, 104)


class TestRWM:
    def test_uphill_always_accepted(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            x = rng.standard_normal(2) + 2.0
            # move towards the mode: logpi increases, MH ratio >= 1
            y_dir = -x / np.linalg.norm(x)
            kern = RWMKernel(gauss_logpi, 0.5)
            assert kern.log_alpha(x, x + 0.1 * y_dir) == 0.0

    def test_default_scale_is_2_38_over_sqrt_d(self):
        orc = GaussianOracle(np.zeros(4), np.eye(4), np.zeros(4),
                             0.5 * np.eye(4), [1.0])
        kern = make_kernel(KernelSpec("rwm", "auto"), orc.sequence(), 1)
        assert kern.scale == pytest.approx(2.38 / np.sqrt(4))

    def test_long_run_moments_d1(self):
        rng = np.random.default_rng(22)
        kern = RWMKernel(gauss_logpi, 2.38)
        path, stats = kern.run_chain(np.array([[0.0]]), 100_000, rng, keep="all")
        chain = path[:, 0, 0]
        se = batch_se_of_mean(chain)
        assert abs(chain.mean()) < 4 * se
        assert abs(chain.var() - 1.0) < 0.05
        assert 0.1 < stats.rate < 0.9

    def test_single_step_interface(self):
        rng = np.random.default_rng(23)
        x, acc = rwm_step(lambda p: -0.5 * float(p @ p), np.zeros(2), 0.5, rng)
        assert x.shape == (2,) and isinstance(acc, bool)

    def test_corrupt_state_raises(self):
        rng = np.random.default_rng(24)
        with pytest.raises(StateCorruptionError):
            rwm_step(lambda p: np.nan, np.zeros(2), 0.5, rng)


class TestMALA:
    def test_zero_drift_reduces_to_rwm_ratio(self):
        h = 0.125
        mala = MALAKernel(gauss_logpi, lambda x: np.zeros_like(x), h)
        rwm = RWMKernel(gauss_logpi, np.sqrt(2 * h))
        rng = np.random.default_rng(31)
        for _ in range(300):
            x, y = rng.standard_normal((2, 3))
            assert mala.log_alpha(x, y) == pytest.approx(rwm.log_alpha(x, y),
                                                         abs=1e-12)

    def test_long_run_moments_d1(self):
        rng = np.random.default_rng(32)
        kern = MALAKernel(gauss_logpi, gauss_grad, 0.5)
        path, stats = kern.run_chain(np.array([[0.0]]), 100_000, rng, keep="all")
        chain = path[:, 0, 0]
        se = batch_se_of_mean(chain)
        assert abs(chain.mean()) < 4 * se
        assert abs(chain.var() - 1.0) < 0.05
        assert stats.rate > 0.4

    def test_default_step_size_formula(self):
        # h = 1/(beta_V sqrt(d) max(1, kappa_V))
        assert default_mala_h((1.0, 0.5, 2.0), 4) == pytest.approx(
            1.0 / (2.0 * 2.0 * 4.0))
        assert default_mala_h((1.0, 2.0, 1.0), 9) == pytest.approx(1.0 / 3.0)

    def test_non_finite_gradient_raises(self):
        rng = np.random.default_rng(33)
        with pytest.raises(StateCorruptionError):
            mala_step(lambda p: 0.0, lambda p: np.array([np.inf]),
                      np.zeros(1), 0.1, rng)


class TestPCN:
    def test_zero_potential_always_accepts_and_preserves_prior(self):
        rng = np.random.default_rng(41)
        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        kern = PCNKernel(lambda x: np.zeros(x.shape[0]), 0.6, cov=cov)
        x0 = rng.multivariate_normal(np.zeros(2), cov, size=5000)
        x, stats = kern.run_chain(x0, 20, rng, keep="last")
        assert stats.accepts == stats.proposals
        assert np.allclose(np.cov(x.T), cov, atol=0.15)

    def test_rho_zero_is_independence_sampler(self):
        rng = np.random.default_rng(42)
        kern = PCNKernel(lambda x: np.zeros(x.shape[0]), 0.0, cov=np.eye(1))
        x, _ = kern.run_chain(np.full((20000, 1), 7.0), 1, rng, keep="last")
        # one step forgets the start completely
        assert abs(x.mean()) < 0.03
        assert abs(x.var() - 1.0) < 0.03

    def test_gaussian_times_quadratic_potential_moments(self):
        # lambda=1, V = x^2/2, C = I_1: invariant law is N(0, 1/2)
        rng = np.random.default_rng(43)
        kern = PCNKernel(lambda x: 0.5 * np.sum(x * x, axis=-1), 0.5,
                         cov=np.eye(1))
        path, _ = kern.run_chain(np.array([[0.0]]), 100_000, rng, keep="all")
        chain = path[:, 0, 0]
        se = batch_se_of_mean(chain)
        assert abs(chain.mean()) < 4 * se
        assert abs(chain.var() - 0.5) < 0.03

    def test_single_step_interface(self):
        rng = np.random.default_rng(44)
        x, acc = pcn_step(lambda p: 0.5 * float(p @ p), np.ones(1), 0.9,
                          np.eye(1), rng)
        assert x.shape == (1,)


class TestPCNRho:
    def test_below_threshold_is_zero(self):
        # lambda_crit = 1/(2 * 2 * 1) = 0.25
        assert pcn_rho_for_lambda(0.1, 2.0, 1.0) == 0.0

    def test_at_threshold_is_zero(self):
        assert pcn_rho_for_lambda(0.25, 2.0, 1.0) == 0.0

    def test_direct_substitution(self):
        # beta=1, Tr C = 1: lambda_crit = 0.5; rho(1) = sqrt(0.5)
        assert pcn_rho_for_lambda(1.0, 1.0, 1.0) == pytest.approx(
            np.sqrt(0.5), abs=1e-15)

    def test_invalid_inputs(self):
        with pytest.raises(ConfigError):
            pcn_rho_for_lambda(0.5, -1.0, 1.0)
        with pytest.raises(ConfigError):
            pcn_rho_for_lambda(1.5, 1.0, 1.0)


class TestIndepMixture:
    def sampler(self, n, rng):
        return rng.standard_normal((n, 1))

    def test_gamma_one_is_fresh_iid(self):
        rng = np.random.default_rng(51)
        kern = IndepMixtureKernel(self.sampler, 1.0)
        x0 = np.full((3, 1), 100.0)
        path, stats = kern.run_chain(x0, 50, rng, keep="all")
        assert stats.accepts == stats.proposals
        assert np.all(np.abs(path[1:]) < 10)  # start forgotten immediately
        # no two consecutive states equal (continuous draws)
        assert np.all(path[1:] != path[:-1])

    def test_stay_or_refresh(self):
        rng = np.random.default_rng(52)
        x0 = np.full((1, 1), 5.0)
        kern = IndepMixtureKernel(self.sampler, 0.5)
        path, stats = kern.run_chain(x0, 2000, rng, keep="all")
        moves = np.mean(path[1:] != path[:-1])
        assert abs(moves - 0.5) < 0.05

    def test_asymptotic_variance(self):
        # P Var[ergodic mean of h(x)=x] -> Var[h] (2-gamma)/gamma = 3
        gamma, p, reps = 0.5, 10_000, 200
        rng = np.random.default_rng(53)
        kern = IndepMixtureKernel(self.sampler, gamma)
        x0 = self.sampler(reps, rng)  # stationary starts
        path, _ = kern.run_chain(x0, p - 1, rng, keep="all")
        means = path[:, :, 0].mean(axis=0)
        got = p * means.var(ddof=1)
        assert abs(got - 3.0) / 3.0 < 0.15

    def test_lag_autocorrelation_matches_power_law(self):
        gamma, p, reps = 0.5, 4000, 64
        rng = np.random.default_rng(54)
        kern = IndepMixtureKernel(self.sampler, gamma)
        x0 = self.sampler(reps, rng)
        path, _ = kern.run_chain(x0, p, rng, keep="all")
        chains = path[:, :, 0]
        for k in range(1, 6):
            a, b = chains[:-k], chains[k:]
            rho_per_rep = np.array([
                np.corrcoef(a[:, r], b[:, r])[0, 1] for r in range(reps)])
            se = rho_per_rep.std(ddof=1) / np.sqrt(reps)
            assert abs(rho_per_rep.mean() - (1 - gamma) ** k) < 3 * se

    def test_single_step_interface(self):
        rng = np.random.default_rng(55)
        out = indep_mixture_step(self.sampler, np.array([3.0]), 0.5, rng)
        assert out.shape == (1,)


class TestSpecsAndStats:
    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            KernelSpec("rwm", -1.0)
        with pytest.raises(ConfigError):
            KernelSpec("pcn", 1.0)
        with pytest.raises(ConfigError):
            KernelSpec("indep_mixture", 0.0)
        with pytest.raises(ConfigError):
            KernelSpec("hmc")

    def test_stats_invariant(self):
        st = KernelStats()
        st.add(10, 4)
        st.add(10, 10)
        assert st.proposals == 20 and st.accepts == 14
        assert st.rate == pytest.approx(0.7)

    def test_mixture_requires_explicit_gamma(self):
        orc = GaussianOracle([0.0], [[1.0]], [0.0], [[0.5]], [1.0])
        with pytest.raises(ConfigError):
            make_kernel(KernelSpec("indep_mixture", "auto"), orc.sequence(), 1)

    def test_pcn_auto_rho_uses_previous_temperature(self):
        orc = GaussianOracle([0.0], [[1.0]], [0.0], [[0.5]], [0.8, 1.0])
        seq = orc.sequence(curvature=(1.0, 1.0, 1.0))
        # the kernel at iteration 1 targets pi_0, i.e. temperature 0.8
        kern = make_kernel(KernelSpec("pcn", "auto"), seq, 1)
        assert kern.rho == pytest.approx(pcn_rho_for_lambda(0.8, 1.0, 1.0))
        assert kern.rho == pytest.approx(np.sqrt(1.0 - 0.5 / 0.8))
