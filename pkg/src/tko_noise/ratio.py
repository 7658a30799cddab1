"""Densities of ratios of two quadratic forms in one Gaussian vector.

Covers the IF-squared ratio Psi[xdot]/Psi[x], the envelope-squared ratio Psi[x]^2/Psi[xdot],
the I/Q sine and tangent correlator ratios, and thresholded (conditioned) ratios.
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad

from tko_noise.errors import ConvergenceError, PreconditionError, ValidationError
from tko_noise.gaussian_model import (
    CovarianceKernel,
    GaussianVectorModel,
    SignalLaw,
    check_form,
    derivative_pair_model,
)
from tko_noise.kernels import OperatorKernel
from tko_noise.logs import get_logger
from tko_noise.montecarlo import McConfig, RatioSample, sample_ratio
from tko_noise.quadform import (
    ChfEvaluator,
    DensityGrid,
    cdf_gil_pelaez,
    chf_matrix,
    cumulants,
    make_density_grid,
    quad_converged,
    quad_with_retry,
)

FloatArray = NDArray[np.float64]

logger = get_logger("ratio")

DENOMINATOR_NEGATIVE_LIMIT = 0.01
MIN_ACCEPTANCE = 0.01
TARGET_PEAK_SE = 0.02
DEFAULT_MAX_SAMPLES = 1 << 22
_SPLIT_XI = 10.0
_QUAD_EPS = 1e-11


@dataclass(frozen=True, eq=False)
class RatioSpec:
    """R = V1 / V2 (V1^2 / V2 when numerator_squared) with V_k = X'J_k X on one model."""

    J_num: FloatArray
    J_den: FloatArray
    model: GaussianVectorModel
    threshold: Optional[float] = None
    numerator_squared: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "J_num", check_form(self.J_num, self.model.dim))
        object.__setattr__(self, "J_den", check_form(self.J_den, self.model.dim))
        if self.threshold is not None and not self.threshold >= 0:
            raise ValidationError(f"threshold must be nonnegative, got {self.threshold}")

    def with_threshold(self, threshold: Optional[float]) -> "RatioSpec":
        return replace(self, threshold=threshold)

    def denominator_mean(self) -> float:
        return cumulants(self.model.mu, self.model.M, self.J_den, s_max=2).mean

    def noiseless_ratio(self) -> float:
        """mu'J_num mu / mu'J_den mu (numerator squared when requested)."""
        mu = self.model.mu
        num = float(mu @ self.J_num @ mu)
        den = float(mu @ self.J_den @ mu)
        if den == 0.0:
            raise ValidationError("the noiseless denominator is zero")
        return (num**2 if self.numerator_squared else num) / den


def if_squared_spec(
    kernel: OperatorKernel,
    covariance: CovarianceKernel,
    signal: SignalLaw,
    center_time: float = 0.0,
    threshold: Optional[float] = None,
) -> RatioSpec:
    """Psi[xdot] / Psi[x], the squared instantaneous-frequency estimate."""
    model, J_x, J_dx = derivative_pair_model(kernel, covariance, signal, center_time)
    return RatioSpec(J_dx, J_x, model, threshold)


def envelope_squared_spec(
    kernel: OperatorKernel,
    covariance: CovarianceKernel,
    signal: SignalLaw,
    center_time: float = 0.0,
    threshold: Optional[float] = None,
) -> RatioSpec:
    """Psi[x]^2 / Psi[xdot], the squared amplitude-envelope estimate."""
    model, J_x, J_dx = derivative_pair_model(kernel, covariance, signal, center_time)
    return RatioSpec(J_x, J_dx, model, threshold, numerator_squared=True)


def joint_chf(xi1: float, xi2: float, spec: RatioSpec) -> complex:
    """E exp(i (xi1 V1 + xi2 V2)) as the chf of the single form xi1 J_num + xi2 J_den at 1."""
    m = spec.model
    return complex(chf_matrix(1.0, m.mu, m.M, xi1 * spec.J_num + xi2 * spec.J_den))


def joint_chf_dxi2(xi1: float, xi2: float, spec: RatioSpec) -> complex:
    """Analytic partial derivative of joint_chf with respect to xi2.

    With A = L'(xi1 J_num + xi2 J_den)L, B = L'J_den L, m = L^-1 mu and K = (I - 2iA)^-1:
    d phi / d xi2 = i phi [tr(K B) + (K m)' B (K m)].
    """
    m = spec.model
    L = m.L
    A = L.T @ (xi1 * spec.J_num + xi2 * spec.J_den) @ L
    lambdas, P = np.linalg.eigh((A + A.T) / 2.0)
    G = P.T @ (L.T @ spec.J_den @ L) @ P
    t = P.T @ scipy.linalg.solve_triangular(L, m.mu, lower=True)
    return complex(_phi_and_derivative(1.0, lambdas, t, G)[1])


def _phi_and_derivative(
    xi: float, lambdas: FloatArray, t: FloatArray, G: FloatArray
) -> tuple[complex, complex]:
    d = 1.0 - 2j * xi * lambdas
    phi = np.exp(np.sum(-0.5 * np.log(d) + 1j * xi * lambdas * t**2 / d))
    kt = t / d
    return complex(phi), complex(1j * phi * (np.sum(np.diag(G) / d) + kt @ G @ kt))


def _proportionality(J_num: FloatArray, J_den: FloatArray) -> Optional[float]:
    """c with J_num = c J_den, or None."""
    norm = float(np.sum(J_den * J_den))
    if norm == 0.0:
        raise ValidationError("denominator form is identically zero")
    c = float(np.sum(J_num * J_den) / norm)
    residual = float(np.sqrt(np.sum((J_num - c * J_den) ** 2) / norm))
    return c if residual < 1e-12 else None


def denominator_negative_probability(spec: RatioSpec) -> float:
    """P(V2 <= 0) by Gil-Pelaez inversion; exactly 0 for a nonnegative-definite form."""
    evaluator = ChfEvaluator.from_model(spec.model, spec.J_den)
    if np.all(evaluator.decomposition.lambdas >= 0):
        return 0.0
    return cdf_gil_pelaez(0.0, evaluator)


def _require_positive_denominator(spec: RatioSpec) -> None:
    p_neg = denominator_negative_probability(spec)
    logger.debug("P(V2 <= 0) = %.3e", p_neg)
    if p_neg >= DENOMINATOR_NEGATIVE_LIMIT:
        raise PreconditionError(
            f"denominator is nonpositive with probability {p_neg:.4f} "
            f"(limit {DENOMINATOR_NEGATIVE_LIMIT}); set a threshold to condition on V2 > tau",
            p_neg,
        )


def _geary_point(r: float, spec: RatioSpec, L: FloatArray, m_white: FloatArray) -> float:
    Jr = spec.J_num - r * spec.J_den
    A = L.T @ Jr @ L
    lambdas, P = np.linalg.eigh((A + A.T) / 2.0)
    G = P.T @ (L.T @ spec.J_den @ L) @ P
    t = P.T @ m_white
    scale = float(np.max(np.abs(lambdas)))
    if scale == 0.0:
        raise ConvergenceError(f"numerator and denominator coincide at r={r:g}")
    split = _SPLIT_XI / scale

    def integrand(xi: float) -> float:
        return _phi_and_derivative(xi, lambdas, t, G)[1].imag

    total = 0.0
    error = 0.0
    for lo, hi in ((0.0, split), (split, np.inf)):
        value, err = quad_with_retry(
            integrand, lo, hi, f"ratio density at r={r:g}",
            limit=400, epsabs=_QUAD_EPS, epsrel=_QUAD_EPS,
        )
        total += value
        error += err
    if not quad_converged(total, error):
        raise ConvergenceError(
            f"ratio density quadrature did not converge at r={r:g} (error {error:.3e})", error
        )
    return total / np.pi


def _point_mass(grid: FloatArray, at: float) -> FloatArray:
    pdf = np.zeros_like(grid)
    idx = int(np.argmin(np.abs(grid - at)))
    if grid.size == 1:
        pdf[idx] = 1.0
        return pdf
    lo = grid[idx] - grid[idx - 1] if idx > 0 else grid[1] - grid[0]
    hi = grid[idx + 1] - grid[idx] if idx < grid.size - 1 else grid[-1] - grid[-2]
    pdf[idx] = 2.0 / (lo + hi)
    return pdf


def ratio_pdf_geary(r_grid: ArrayLike, spec: RatioSpec) -> DensityGrid:
    """f_R(r) = (1/pi) int_0^inf Im h(xi) dxi, h = d phi_{V1,V2} / d xi2 at (xi, -r xi).

    Requires P(V2 <= 0) < 0.01. Proportional forms give a point mass at the
    constant ratio, placed on the nearest grid node.
    """
    if spec.numerator_squared:
        raise ValidationError("numerator-squared ratios have no Geary form; use envelope_ratio_pdf")
    grid = np.asarray(r_grid, dtype=np.float64).reshape(-1)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValidationError("ratio grid must be non-empty and strictly increasing")
    _require_positive_denominator(spec)

    constant = _proportionality(spec.J_num, spec.J_den)
    if constant is not None:
        logger.info("numerator is %g times the denominator; ratio is a point mass", constant)
        return make_density_grid(grid, _point_mass(grid, constant), method="point-mass")

    L = spec.model.L
    m_white = scipy.linalg.solve_triangular(L, spec.model.mu, lower=True)
    pdf = np.empty(grid.size)
    for k, r in enumerate(grid):
        try:
            pdf[k] = _geary_point(float(r), spec, L, m_white)
        except ConvergenceError as e:
            logger.warning("%s", e)
            pdf[k] = np.nan
    return make_density_grid(grid, pdf, method="geary")


def grid_edges(grid: ArrayLike) -> FloatArray:
    """Cell edges around grid nodes: midpoints inside, half a step beyond the ends."""
    g = np.asarray(grid, dtype=np.float64).reshape(-1)
    if g.size < 2 or np.any(np.diff(g) <= 0):
        raise ValidationError("grid must be strictly increasing with at least 2 nodes")
    mid = (g[1:] + g[:-1]) / 2.0
    return np.concatenate([[g[0] - (mid[0] - g[0])], mid, [g[-1] + (g[-1] - mid[-1])]])


def _mc_ratio_density(
    grid: FloatArray,
    spec: RatioSpec,
    cfg: McConfig,
    max_samples: int,
    method: str,
) -> DensityGrid:
    edges = grid_edges(grid)
    run_cfg = cfg.model_copy(update={"edges": tuple(edges), "bins": None})
    while True:
        sample: RatioSample = sample_ratio(spec, run_cfg)
        if sample.acceptance < MIN_ACCEPTANCE:
            raise PreconditionError(
                f"acceptance probability {sample.acceptance:.4g} is below {MIN_ACCEPTANCE}",
                sample.acceptance,
            )
        relative = sample.peak_relative_se()
        if relative < TARGET_PEAK_SE or run_cfg.n_samples >= max_samples:
            break
        run_cfg = run_cfg.with_samples(min(2 * run_cfg.n_samples, max_samples))
        logger.info("cell error %.3f of peak; doubling to %d samples", relative, run_cfg.n_samples)

    inside = (sample.ratios >= edges[0]) & (sample.ratios < edges[-1])
    expected = float(np.mean(inside))
    grid_density = make_density_grid(
        grid,
        sample.histogram.density,
        expected_mass=expected,
        method=method,
        acceptance=sample.acceptance,
        acceptance_se=sample.acceptance_se,
        n_samples=run_cfg.n_samples,
        peak_relative_se=relative,
        mass_outside_grid=1.0 - expected,
    )
    if relative >= TARGET_PEAK_SE:
        logger.warning("cell error %.3f of peak after %d samples", relative, run_cfg.n_samples)
        grid_density.meta["status"] = "flagged"
    return grid_density


def ratio_pdf_conditioned(
    r_grid: ArrayLike,
    spec: RatioSpec,
    cfg: Optional[McConfig] = None,
    max_samples: int = DEFAULT_MAX_SAMPLES,
) -> DensityGrid:
    """Density of V1/V2 given V2 > threshold, by Monte Carlo with rejection.

    Sample size doubles until every cell's standard error is below 2% of the peak
    density (or max_samples is reached, which flags the result).
    """
    if spec.threshold is None or not spec.threshold > 0:
        raise ValidationError("conditioned ratio density needs a positive threshold")
    grid = np.asarray(r_grid, dtype=np.float64).reshape(-1)
    return _mc_ratio_density(grid, spec, cfg or McConfig(), max_samples, "conditioned-mc")


def envelope_ratio_pdf(
    r_grid: ArrayLike,
    spec: RatioSpec,
    cfg: Optional[McConfig] = None,
    max_samples: int = DEFAULT_MAX_SAMPLES,
) -> DensityGrid:
    """Density of V1^2/V2 by bivariate Monte Carlo; V2 > threshold (or > 0) is required."""
    if not spec.numerator_squared:
        raise ValidationError("envelope ratio needs numerator_squared=True")
    if spec.threshold is None:
        _require_positive_denominator(spec)
    grid = np.asarray(r_grid, dtype=np.float64).reshape(-1)
    return _mc_ratio_density(grid, spec, cfg or McConfig(), max_samples, "envelope-mc")


def squared_numerator_pdf(
    v3: ArrayLike, pdf_v1: Callable[[FloatArray], FloatArray]
) -> FloatArray:
    """f_V3(v) = [f_V1(sqrt v) + f_V1(-sqrt v)] / (2 sqrt v) for V3 = V1^2."""
    v = np.asarray(v3, dtype=np.float64)
    out = np.zeros_like(v)
    pos = v > 0
    root = np.sqrt(v[pos])
    out[pos] = (pdf_v1(root) + pdf_v1(-root)) / (2.0 * root)
    return out


def independent_ratio_pdf(
    r_grid: ArrayLike,
    pdf_num: Callable[[FloatArray], FloatArray],
    pdf_den: Callable[[FloatArray], FloatArray],
    den_upper: float = np.inf,
) -> FloatArray:
    """int_0^inf v f_num(r v) f_den(v) dv for independent V1, V2 with V2 > 0."""
    grid = np.asarray(r_grid, dtype=np.float64).reshape(-1)
    out = np.empty(grid.size)
    for k, r in enumerate(grid):

        def integrand(v: float, r: float = float(r)) -> float:
            x = np.array([v])
            return float(v * pdf_num(r * x)[0] * pdf_den(x)[0])

        out[k] = quad(integrand, 0.0, den_upper, limit=400, epsabs=1e-12)[0]
    return out


def iq_model(
    snr_db: float,
    phase_difference: float,
    rho: float = 0.0,
    theta0: float = np.pi / 4.0,
    N0: float = 1.0,
) -> GaussianVectorModel:
    """(I1, Q1, I2, Q2) of two adjacent complex samples of a tone in narrowband noise.

    Each component has variance N0/2; I1, I2 and Q1, Q2 correlate with rho; SNR = A^2 / N0.
    """
    if not -1.0 < rho < 1.0:
        raise ValidationError(f"adjacent-sample correlation must lie in (-1, 1), got {rho}")
    amplitude = np.sqrt(N0 * 10.0 ** (snr_db / 10.0))
    mu = amplitude * np.array(
        [
            np.cos(theta0),
            np.sin(theta0),
            np.cos(theta0 + phase_difference),
            np.sin(theta0 + phase_difference),
        ]
    )
    M = (N0 / 2.0) * np.array(
        [[1.0, 0.0, rho, 0.0],
         [0.0, 1.0, 0.0, rho],
         [rho, 0.0, 1.0, 0.0],
         [0.0, rho, 0.0, 1.0]]
    )
    return GaussianVectorModel(mu, M, N0 / 2.0)


def _iq_form(i1q2: float, q1i2: float) -> FloatArray:
    J = np.zeros((4, 4))
    J[0, 3] = J[3, 0] = i1q2
    J[1, 2] = J[2, 1] = q1i2
    return J


def sine_spec(model: GaussianVectorModel) -> RatioSpec:
    """2 (I1 Q2 - I2 Q1) / (I1^2 + I2^2 + Q1^2 + Q2^2)."""
    return RatioSpec(_iq_form(1.0, -1.0), np.eye(4), model)


def tangent_spec(model: GaussianVectorModel, threshold: Optional[float] = None) -> RatioSpec:
    """(I1 Q2 - I2 Q1) / (I1 Q2 + I2 Q1)."""
    return RatioSpec(_iq_form(0.5, -0.5), _iq_form(0.5, 0.5), model, threshold)


@dataclass(frozen=True, eq=False)
class IqRatios:
    sine: DensityGrid
    tangent: DensityGrid


def iq_correlator_ratios(
    model: GaussianVectorModel,
    sine_grid: ArrayLike,
    tangent_grid: ArrayLike,
    threshold: Optional[float] = None,
    cfg: Optional[McConfig] = None,
) -> IqRatios:
    """Sine ratio through the Geary form, tangent ratio through conditioned Monte Carlo.

    The tangent denominator is indefinite; its default threshold is 0.1 of its mean,
    or 0.1 of its standard deviation when the mean is not positive.
    """
    if model.dim != 4:
        raise ValidationError("I/Q model must have dimension 4 (I1, Q1, I2, Q2)")
    sine = ratio_pdf_geary(sine_grid, sine_spec(model))
    tangent = tangent_spec(model)
    if threshold is None:
        stats = cumulants(model.mu, model.M, tangent.J_den, s_max=2)
        threshold = 0.1 * (stats.mean if stats.mean > 0 else np.sqrt(stats.variance))
    tangent_density = ratio_pdf_conditioned(tangent_grid, tangent.with_threshold(threshold), cfg)
    return IqRatios(sine, tangent_density)


def ratio_grid(n_points: int, center: Optional[float] = None, spread: float = 4.0) -> FloatArray:
    """Ratio grid for tabulating densities.

    Logarithmic on [center/spread, center*spread] around a positive noiseless ratio,
    symmetric linear on [-spread, spread] otherwise.
    """
    if n_points < 2:
        raise ValidationError("grid needs at least 2 points")
    if not spread > 1.0 and center is not None:
        raise ValidationError("logarithmic spread must exceed 1")
    if center is not None and center > 0:
        return np.geomspace(center / spread, center * spread, n_points)
    return np.linspace(-spread, spread, n_points)
