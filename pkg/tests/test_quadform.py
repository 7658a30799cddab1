"""Tests for characteristic functions, cumulants, CDFs and densities of one quadratic form."""

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from tko_noise.errors import ValidationError
from tko_noise.gaussian_model import GaussianVectorModel, SpectralDecomposition, decompose
from tko_noise.montecarlo import McConfig, sample_quadform
from tko_noise.quadform import (
    ChfEvaluator,
    CumulantSet,
    cdf_gil_pelaez,
    cdf_grid,
    chf_complex,
    chf_diagonal,
    chf_matrix,
    chf_narrowband,
    cumulants,
    cumulants_diagonal,
    make_density_grid,
    mixture_cumulants,
    pdf_numeric,
    pdf_rician_mode,
    pdf_single_lambda,
    pdf_two_pos_two_neg,
    quad_converged,
    quad_with_retry,
    sign_split,
)

CHI2_1 = SpectralDecomposition(np.array([1.0]), np.array([0.0]), 1.0)
TWO_TWO = SpectralDecomposition(np.array([1.0, 0.5, -0.8, -0.3]), np.zeros(4), 1.0)


class TestChf:
    def test_origin_is_one(self, random_model):
        """Test every chf form is 1 at xi = 0."""
        model, J = random_model
        decomp = decompose(model, J)
        assert chf_matrix(0.0, model.mu, model.M, J) == pytest.approx(1.0)
        assert chf_diagonal(0.0, decomp) == pytest.approx(1.0)
        assert chf_narrowband(0.0, decomp) == pytest.approx(1.0)
        assert chf_complex(0.0, [1.0 + 1j], [[2.0]], [[1.0]]) == pytest.approx(1.0)

    def test_chi_square(self):
        """Test the one-dimensional central form gives (1 - 2i xi)^-1/2."""
        xi = np.linspace(-5, 5, 11)
        expected = (1 - 2j * xi) ** -0.5
        assert np.allclose(chf_matrix(xi, [0.0], [[1.0]], [[1.0]]), expected)
        assert np.allclose(chf_diagonal(xi, CHI2_1), expected)

    def test_matrix_and_diagonal_agree(self, random_model):
        """Test the two real representations agree over xi in [-50, 50]."""
        model, J = random_model
        xi = np.linspace(-50, 50, 201)
        matrix = ChfEvaluator.from_model(model, J, representation="matrix")
        diagonal = ChfEvaluator.from_model(model, J)
        assert np.allclose(matrix(xi), diagonal(xi), rtol=0, atol=1e-10)

    def test_matrix_and_diagonal_agree_on_tone_model(self, tone_psi01, rng):
        """Test the two representations agree on the Psi_0^1 tone model."""
        model, kernel = tone_psi01
        xi = rng.uniform(-20, 20, size=20)
        decomp = decompose(model, kernel.J)
        assert np.allclose(
            chf_matrix(xi, model.mu, model.M, kernel.J), chf_diagonal(xi, decomp), atol=1e-10
        )

    def test_hermitian_symmetry(self, random_model):
        """Test phi(-xi) = conj(phi(xi))."""
        model, J = random_model
        chf = ChfEvaluator.from_model(model, J)
        xi = np.linspace(0.1, 10, 25)
        assert np.allclose(chf(-xi), np.conj(chf(xi)))

    def test_blocks_factorize(self, random_model):
        """Test the chf of a decomposition is the product over disjoint mode blocks."""
        model, J = random_model
        decomp = decompose(model, J)
        xi = np.linspace(-3, 3, 13)
        product = chf_diagonal(xi, decomp.subset([0, 1])) * chf_diagonal(xi, decomp.subset([2, 3]))
        assert np.allclose(chf_diagonal(xi, decomp), product)

    def test_narrowband_is_real_times_noise_alone(self):
        """Test the narrowband chf is a real chf times its noise-only value, at half xi."""
        decomp = SpectralDecomposition(np.array([0.9, -0.4]), np.array([0.7, 1.2]), 0.8)
        doubled = SpectralDecomposition(decomp.lambdas, np.sqrt(2) * decomp.s, decomp.N0)
        central = SpectralDecomposition(decomp.lambdas, np.zeros(2), decomp.N0)
        xi = np.linspace(-6, 6, 25)
        factors = chf_diagonal(xi / 2, doubled) * chf_diagonal(xi / 2, central)
        assert np.allclose(chf_narrowband(xi, decomp), factors)

    def test_narrowband_single_mode_is_exponential(self):
        """Test a central narrowband mode has an exponential chf."""
        decomp = SpectralDecomposition(np.array([2.0]), np.array([0.0]), 0.5)
        xi = np.linspace(-4, 4, 9)
        assert np.allclose(chf_narrowband(xi, decomp), 1.0 / (1.0 - 1j * xi))

    def test_complex_diagonal(self):
        """Test a diagonal complex model with zero mean gives prod (1 - i xi l q)^-1."""
        xi = np.linspace(-3, 3, 7)
        value = chf_complex(xi, [0.0, 0.0], np.diag([2.0, 0.5]), np.diag([1.0, -1.5]))
        expected = 1.0 / ((1 - 2j * xi) * (1 + 0.75j * xi))
        assert np.allclose(value, expected)

    def test_complex_reduces_to_narrowband(self, rng):
        """Test the complex chf equals the narrowband chf of its eigen decomposition."""
        A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        Lc = A @ A.conj().T + np.eye(2)
        B = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        Q = (B + B.conj().T) / 2
        c = rng.normal(size=2) + 1j * rng.normal(size=2)

        L = np.linalg.cholesky(Lc)
        lambdas, P = np.linalg.eigh(L.conj().T @ Q @ L)
        s = np.abs(P.conj().T @ np.linalg.solve(L, c))
        decomp = SpectralDecomposition(lambdas, s, 1.0)
        xi = np.linspace(-2, 2, 17)
        assert np.allclose(chf_complex(xi, c, Lc, Q), chf_narrowband(xi, decomp), atol=1e-10)

    def test_complex_rejects_non_hermitian(self):
        """Test non-Hermitian covariance or form matrices are rejected."""
        with pytest.raises(ValidationError):
            chf_complex(1.0, [0.0, 0.0], [[1.0, 1j], [1j, 1.0]], np.eye(2))
        with pytest.raises(ValidationError):
            chf_complex(1.0, [0.0, 0.0], np.eye(2), [[1.0, 1.0], [0.0, 1.0]])

    def test_evaluator_rejects_narrowband_matrix(self, random_model):
        """Test the matrix representation is only offered for the real variant."""
        model, J = random_model
        with pytest.raises(ValidationError):
            ChfEvaluator.from_model(model, J, representation="matrix", variant="narrowband")


class TestCumulants:
    def test_chi_square_three(self):
        """Test M = J = I3, mu = 0 gives the chi-square(3) cumulants."""
        result = cumulants(np.zeros(3), np.eye(3), np.eye(3), s_max=4)
        assert np.allclose(result.kappa, [3.0, 6.0, 24.0, 144.0])
        assert result.skewness == pytest.approx(24.0 / 6.0**1.5)

    def test_first_cumulant_with_mean(self, random_model):
        """Test kappa_1 = tr(MJ) + mu'J mu."""
        model, J = random_model
        result = cumulants(model.mu, model.M, J)
        assert result.mean == pytest.approx(np.trace(model.M @ J) + model.mu @ J @ model.mu)
        assert result.kappa.size == 8
        assert result.rho.size == 6

    def test_diagonal_route_agrees(self, random_model):
        """Test cumulants from (lambda, s) match the matrix formula."""
        model, J = random_model
        scaled = GaussianVectorModel(model.mu, model.M, N0=1.7)
        matrix = cumulants(model.mu, model.M, J, s_max=6).kappa
        diagonal = cumulants_diagonal(decompose(scaled, J), s_max=6).kappa
        assert np.allclose(diagonal, matrix, rtol=1e-9)

    def test_narrowband_cumulants(self):
        """Test narrowband cumulants are (s-1)! (lambda N0)^s (1 + s s^2 / N0)."""
        decomp = SpectralDecomposition(np.array([2.0]), np.array([0.0]), 0.5)
        kappa = cumulants_diagonal(decomp, s_max=4, variant="narrowband").kappa
        assert np.allclose(kappa, [1.0, 1.0, 2.0, 6.0])

    def test_log_chf_derivatives(self, tone_psi01):
        """Test finite differences of log phi at 0 recover kappa_1 and kappa_2."""
        model, kernel = tone_psi01
        chf = ChfEvaluator.from_model(model, kernel.J)
        kappa = cumulants(model.mu, model.M, kernel.J).kappa
        h = 1e-5
        first = (np.log(chf(h)) - np.log(chf(-h))) / (2j * h)
        assert first.real == pytest.approx(kappa[0], rel=1e-6)
        h = 1e-4
        second = -(np.log(chf(h)) - 2 * np.log(chf(0.0)) + np.log(chf(-h))) / h**2
        assert second.real == pytest.approx(kappa[1], rel=1e-6)

    def test_requires_two_orders(self):
        """Test s_max below 2 is rejected."""
        with pytest.raises(ValidationError):
            cumulants(np.zeros(1), [[1.0]], [[1.0]], s_max=1)

    def test_matches_sample_kstatistics(self, random_model, small_mc):
        """Test kappa_1..kappa_4 lie within 5 standard errors of the sample k-statistics."""
        model, J = random_model
        sample = sample_quadform(model, J, small_mc)
        z = sample.z_scores(cumulants(model.mu, model.M, J).kappa)
        assert np.all(np.abs(z) < 5)

    @pytest.mark.slow
    def test_matches_sample_kstatistics_full(self, random_model):
        """Test the k-statistic agreement at one million samples."""
        model, J = random_model
        cfg = McConfig(seed=31, n_samples=1_000_000, n_partitions=16)
        sample = sample_quadform(model, J, cfg)
        z = sample.z_scores(cumulants(model.mu, model.M, J).kappa)
        assert np.all(np.abs(z) < 5)


    def test_mixture_of_one_set_is_unchanged(self, random_model):
        """Test the mixture of a single cumulant set returns the same cumulants."""
        model, J = random_model
        single = cumulants(model.mu, model.M, J, s_max=6)
        assert np.allclose(mixture_cumulants([single]).kappa, single.kappa, rtol=1e-9)

    def test_mixture_of_shifted_gaussians(self):
        """Test N(-1, 1) and N(1, 1) mix to mean 0, variance 2 and kappa_4 = -2."""
        def gaussian(mean):
            kappa = np.array([mean, 1.0, 0.0, 0.0])
            return CumulantSet(kappa, np.zeros(2))

        mixed = mixture_cumulants([gaussian(-1.0), gaussian(1.0)])
        assert np.allclose(mixed.kappa, [0.0, 2.0, 0.0, -2.0], atol=1e-12)
        assert mixed.kurtosis == pytest.approx(-0.5)

    def test_mixture_rejects_empty_and_mixed_orders(self, random_model):
        """Test an empty list and sets of different orders are rejected."""
        model, J = random_model
        with pytest.raises(ValidationError):
            mixture_cumulants([])
        with pytest.raises(ValidationError):
            mixture_cumulants(
                [cumulants(model.mu, model.M, J, 4), cumulants(model.mu, model.M, J, 6)]
            )


class TestCdf:
    def test_chi_square_one(self):
        """Test P(chi2_1 <= 1) = 2 Phi(1) - 1."""
        chf = ChfEvaluator(CHI2_1)
        assert cdf_gil_pelaez(1.0, chf) == pytest.approx(2 * stats.norm.cdf(1.0) - 1, abs=1e-7)

    def test_below_support(self):
        """Test the CDF of a positive form is 0 below zero."""
        chf = ChfEvaluator(CHI2_1)
        assert cdf_gil_pelaez(-2.0, chf) == pytest.approx(0.0, abs=1e-7)

    def test_symmetric_form_median(self):
        """Test lambda = (1, -1) has F(0) = 1/2."""
        decomp = SpectralDecomposition(np.array([1.0, -1.0]), np.zeros(2), 1.0)
        assert cdf_gil_pelaez(0.0, ChfEvaluator(decomp)) == pytest.approx(0.5, abs=1e-8)

    def test_narrowband_exponential(self):
        """Test a central narrowband mode inverts to 1 - exp(-v / (lambda N0))."""
        decomp = SpectralDecomposition(np.array([2.0]), np.array([0.0]), 0.5)
        chf = ChfEvaluator(decomp, variant="narrowband")
        for v in (0.3, 1.0, 2.5):
            assert cdf_gil_pelaez(v, chf) == pytest.approx(1 - np.exp(-v), abs=1e-7)

    def test_noncentral_matches_scipy(self):
        """Test a noncentral chi-square(1) CDF against scipy."""
        decomp = SpectralDecomposition(np.array([1.0]), np.array([1.5]), 1.0)
        chf = ChfEvaluator(decomp)
        for v in (0.5, 2.0, 6.0):
            expected = stats.ncx2.cdf(v, 1, 1.5**2)
            assert cdf_gil_pelaez(v, chf) == pytest.approx(expected, abs=1e-7)

    def test_grid_is_monotone(self, tone_psi01):
        """Test cdf_grid is nondecreasing on an increasing grid."""
        model, kernel = tone_psi01
        chf = ChfEvaluator.from_model(model, kernel.J)
        grid = np.linspace(-1.0, 3.0, 21)
        cdf = cdf_grid(grid, chf)
        assert np.all(np.diff(cdf) >= -1e-9)
        assert 0.0 <= cdf[0] < cdf[-1] <= 1.0


class TestClosedFormDensities:
    def test_single_lambda_central(self):
        """Test s = 0 gives the scaled chi-square(1) density."""
        v = np.array([0.1, 1.0, 4.0])
        expected = np.exp(-v / 3.0) / np.sqrt(2 * np.pi * 1.5 * v)
        assert np.allclose(pdf_single_lambda(v, 1.5, 0.0, 1.0), expected)

    def test_single_lambda_integrates_to_one(self):
        """Test (lambda, s, N0) = (1, 1, 1) integrates to 1."""
        f = lambda v: float(pdf_single_lambda(v, 1.0, 1.0, 1.0))  # noqa: E731
        total = quad(f, 0, 1)[0] + quad(f, 1, np.inf)[0]
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_single_lambda_matches_scipy(self):
        """Test the cosh form against the noncentral chi-square density."""
        v = np.array([0.2, 1.0, 3.0, 8.0])
        expected = stats.ncx2.pdf(v / 2.0, 1, 1.2**2) / 2.0
        assert np.allclose(pdf_single_lambda(v, 2.0, 1.2, 1.0), expected)

    def test_single_lambda_zero_below_support(self):
        """Test the density vanishes for v <= 0 and lambda must be positive."""
        assert np.all(pdf_single_lambda(np.array([-1.0, 0.0]), 1.0, 0.5) == 0.0)
        with pytest.raises(ValidationError):
            pdf_single_lambda(1.0, -1.0, 0.0)

    def test_rician_central_is_exponential(self):
        """Test s = 0 gives an exponential density with mean lambda N0."""
        v = np.array([0.1, 1.0, 3.0])
        assert np.allclose(pdf_rician_mode(v, 2.0, 0.0, 0.5), np.exp(-v))

    def test_rician_integrates_to_one(self):
        """Test (lambda, s, N0) = (2, 1, 0.5) integrates to 1."""
        f = lambda v: float(pdf_rician_mode(v, 2.0, 1.0, 0.5))  # noqa: E731
        assert quad(f, 0, np.inf, limit=200)[0] == pytest.approx(1.0, abs=1e-8)

    def test_two_two_symmetric(self):
        """Test a mirror-symmetric spectrum gives an even density."""
        v = np.array([0.2, 0.9, 2.5])
        assert np.allclose(
            pdf_two_pos_two_neg(v, 1.0, 0.5, -1.0, -0.5),
            pdf_two_pos_two_neg(-v, 1.0, 0.5, -1.0, -0.5),
            atol=1e-9,
        )

    def test_two_two_equal_pair(self):
        """Test equal eigenvalues in a pair use the exponential limit."""
        v = np.array([-0.5, 0.5])
        values = pdf_two_pos_two_neg(v, 1.0, 1.0, -1.0, -1.0)
        # difference of two exponentials with mean 2: Laplace density
        assert np.allclose(values, np.exp(-np.abs(v) / 2.0) / 4.0, atol=1e-10)

    def test_two_two_integrates_to_one(self):
        """Test (1, 0.5, -0.8, -0.3) integrates to 1."""
        f = lambda v: float(pdf_two_pos_two_neg(v, 1.0, 0.5, -0.8, -0.3))  # noqa: E731
        total = quad(f, -np.inf, 0)[0] + quad(f, 0, np.inf)[0]
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_two_two_rejects_signs(self):
        """Test the sign pattern is enforced."""
        with pytest.raises(ValidationError):
            pdf_two_pos_two_neg(0.0, 1.0, -0.5, -0.8, -0.3)
        with pytest.raises(ValidationError):
            pdf_two_pos_two_neg(0.0, 1.0, 0.5, 0.8, -0.3)

    def test_two_two_matches_monte_carlo(self):
        """Test the convolution density against a sampled histogram."""
        rng = np.random.default_rng(5)
        Z = rng.standard_normal((1_000_000, 4))
        values = Z**2 @ TWO_TWO.lambdas
        edges = np.linspace(-4, 6, 81)
        counts, _ = np.histogram(values, bins=edges)
        density = counts / values.size / np.diff(edges)
        centers = (edges[1:] + edges[:-1]) / 2
        reference = pdf_two_pos_two_neg(centers, 1.0, 0.5, -0.8, -0.3)
        assert np.sum(np.abs(density - reference) * np.diff(edges)) < 0.02


class TestPdfNumeric:
    def test_chi_square_one(self):
        """Test inversion reproduces the chi-square(1) density."""
        v = np.array([0.05, 0.5, 1.0, 3.0, 10.0])
        grid = pdf_numeric(v, ChfEvaluator(CHI2_1))
        assert np.allclose(grid.pdf, pdf_single_lambda(v, 1.0, 0.0), atol=1e-6)

    def test_noncentral_single_lambda(self):
        """Test inversion against the cosh form at v in {0.1, 1, 5}."""
        decomp = SpectralDecomposition(np.array([1.0]), np.array([1.0]), 1.0)
        v = np.array([0.1, 1.0, 5.0])
        grid = pdf_numeric(v, ChfEvaluator(decomp))
        assert np.allclose(grid.pdf, pdf_single_lambda(v, 1.0, 1.0), atol=1e-6)

    def test_narrowband_rician(self):
        """Test narrowband inversion reproduces the Rician-mode density."""
        decomp = SpectralDecomposition(np.array([1.0]), np.array([1.0]), 1.0)
        v = np.array([0.1, 0.8, 2.0, 6.0])
        grid = pdf_numeric(v, ChfEvaluator(decomp, variant="narrowband"))
        assert np.allclose(grid.pdf, pdf_rician_mode(v, 1.0, 1.0, 1.0), atol=1e-6)

    def test_two_two_convolution(self):
        """Test inversion agrees with the convolution route."""
        v = np.array([-2.0, -0.5, 0.3, 1.5, 4.0])
        grid = pdf_numeric(v, ChfEvaluator(TWO_TWO))
        assert np.allclose(grid.pdf, pdf_two_pos_two_neg(v, 1.0, 0.5, -0.8, -0.3), atol=1e-5)

    def test_density_grid_normalizes(self, tone_psi01):
        """Test a grid covering the bulk integrates to 1 and is marked ok."""
        model, kernel = tone_psi01
        chf = ChfEvaluator.from_model(model, kernel.J)
        kappa = cumulants_diagonal(chf.decomposition, 2)
        sd = np.sqrt(kappa.variance)
        grid = pdf_numeric(np.linspace(kappa.mean - 12 * sd, kappa.mean + 16 * sd, 201), chf)
        assert grid.meta["status"] == "ok"
        assert grid.mass() == pytest.approx(1.0, abs=1e-2)
        assert grid.mean() == pytest.approx(kappa.mean, rel=1e-2)
        assert grid.cdf is not None
        assert np.all(np.diff(grid.cdf) >= 0)


class TestDensityGrid:
    def test_clamp_and_flag(self):
        """Test negative values are clamped and poor normalization is flagged."""
        v = np.linspace(0, 1, 11)
        grid = make_density_grid(v, np.where(v < 0.5, -0.01, 0.5))
        assert np.all(grid.pdf >= 0)
        assert grid.meta["clamped"] == pytest.approx(0.01)
        assert grid.meta["status"] == "flagged"

    def test_nonfinite_points_are_counted(self):
        """Test NaN entries count as failed points."""
        v = np.linspace(0, 1, 5)
        grid = make_density_grid(v, [1.0, np.nan, 1.0, 1.0, 1.0])
        assert grid.meta["failed_points"] == 1
        assert grid.meta["status"] == "flagged"

    def test_quantile_and_mass(self):
        """Test quantiles and partial masses of a uniform density."""
        v = np.linspace(0, 2, 201)
        grid = make_density_grid(v, np.full(v.size, 0.5))
        assert grid.meta["status"] == "ok"
        assert grid.quantile(0.25) == pytest.approx(0.5)
        assert grid.mass_between(0.0, 1.0) == pytest.approx(0.5)
        assert grid.variance() == pytest.approx(1.0 / 3.0, rel=1e-3)


class TestQuadratureGate:
    def test_error_is_relative_to_large_values(self):
        """Test an error of 1e-5 on a value of 40 is accepted, on a value of 0.5 it is not."""
        assert quad_converged(40.0, 1e-5)
        assert not quad_converged(0.5, 1e-5)
        assert quad_converged(0.5, 5e-7)

    def test_nonfinite_value_is_rejected(self):
        """Test a NaN integral never passes."""
        assert not quad_converged(float("nan"), 0.0)

    def test_retry_returns_converged_integral(self):
        """Test a peaked integrand that needs more subdivisions still converges."""
        value, error = quad_with_retry(
            lambda x: 1.0 / (1e-4 + x * x), -1.0, 1.0, "peak", limit=5
        )
        assert value == pytest.approx(2e2 * np.arctan(1e2), rel=1e-8)
        assert quad_converged(value, error)

    def test_failed_abscissae_are_recorded(self):
        """Test the grid values of NaN entries are listed in the metadata."""
        v = np.linspace(0, 1, 5)
        grid = make_density_grid(v, [1.0, np.nan, 1.0, np.nan, 1.0])
        assert grid.meta["failed_at"] == [0.25, 0.75]


class TestSignSplit:
    def test_split_by_sign(self):
        """Test positive and negative modes separate and zero modes drop out."""
        decomp = SpectralDecomposition(
            np.array([1.0, -0.5, 0.0, 2.0]), np.array([0.1, 0.2, 0.3, 0.4]), 1.0
        )
        positive, negative = sign_split(decomp)
        assert np.array_equal(positive.lambdas, [1.0, 2.0])
        assert np.array_equal(negative.lambdas, [0.5])
        assert np.array_equal(negative.s, [0.2])
