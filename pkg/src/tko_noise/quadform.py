"""Characteristic functions, cumulants, CDFs and densities of a single quadratic form X'JX."""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import cumulative_trapezoid, quad, trapezoid
from scipy.special import i0e

from tko_noise.errors import ConvergenceError, ValidationError
from tko_noise.gaussian_model import GaussianVectorModel, SpectralDecomposition, decompose
from tko_noise.logs import get_logger

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]
Variant = Literal["real", "narrowband"]

logger = get_logger("quadform")

# Below this (relative to the form's scale) the Gil-Pelaez integrand uses its series limit.
_SERIES_XI = 1e-4
# Split point of the half-line integral, in units of 1 / scale.
_SPLIT_XI = 10.0
_QUAD_EPS = 1e-10
# Accepted quadrature error, relative to max(1, |integral|).
_FAIL_TOL = 1e-6
_NORMALIZATION_FLAG = 0.01


def _flat_xi(xi: ArrayLike) -> tuple[FloatArray, tuple[int, ...]]:
    arr = np.asarray(xi, dtype=np.float64)
    return arr.reshape(-1), arr.shape


def _unflatten(values: ComplexArray, shape: tuple[int, ...]) -> Any:
    if shape == ():
        return complex(values[0])
    return values.reshape(shape)


def _model_eigenvalues(M: FloatArray, J: FloatArray) -> FloatArray:
    L = np.linalg.cholesky(M)
    A = L.T @ J @ L
    return np.linalg.eigvalsh((A + A.T) / 2.0)


def chf_matrix(xi: ArrayLike, mu: ArrayLike, M: ArrayLike, J: ArrayLike) -> Any:
    """Matrix-form chf of X'JX, X ~ N(mu, M).

    The mean term is -1/2 mu'[I - (I - 2i xi J M)^-1] M^-1 mu; the square root of
    det(I - 2i xi M J) is the product of per-eigenvalue principal roots, each factor
    having a positive real part for real xi.
    """
    mu_v = np.asarray(mu, dtype=np.float64).reshape(-1)
    Mm = np.asarray(M, dtype=np.float64)
    Jm = np.asarray(J, dtype=np.float64)
    r = mu_v.size
    if Mm.shape != (r, r) or Jm.shape != (r, r):
        raise ValidationError("mu, M and J dimensions disagree")
    if not np.allclose(Jm, Jm.T):
        raise ValidationError("kernel matrix is not symmetric")
    try:
        lambdas = _model_eigenvalues(Mm, Jm)
    except np.linalg.LinAlgError as e:
        raise ValidationError(f"covariance matrix is not positive definite: {e}") from e

    x, shape = _flat_xi(xi)
    Minv_mu = np.linalg.solve(Mm, mu_v)
    JM = Jm @ Mm
    eye = np.eye(r)
    B = eye[None, :, :] - 2j * x[:, None, None] * JM[None, :, :]
    try:
        y = np.linalg.solve(B, np.broadcast_to(Minv_mu.astype(complex), (x.size, r))[..., None])
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(f"singular I - 2i xi J M encountered: {e}") from e
    exponent = -0.5 * (mu_v @ Minv_mu - np.einsum("i,ni->n", mu_v, y[..., 0]))
    det_root = np.prod(np.sqrt(1.0 - 2j * x[:, None] * lambdas[None, :]), axis=1)
    return _unflatten(np.exp(exponent) / det_root, shape)


def chf_diagonal(xi: ArrayLike, decomp: SpectralDecomposition) -> Any:
    """Diagonal-form chf: prod_j (1 - 2i xi lambda_j N0)^-1/2 exp(i xi lambda_j s_j^2 / (...))."""
    x, shape = _flat_xi(xi)
    d = 1.0 - 2j * x[:, None] * decomp.lambdas[None, :] * decomp.N0
    log_phi = np.sum(
        -0.5 * np.log(d) + 1j * x[:, None] * decomp.lambdas[None, :] * decomp.s[None, :] ** 2 / d,
        axis=1,
    )
    return _unflatten(np.exp(log_phi), shape)


def chf_narrowband(xi: ArrayLike, decomp: SpectralDecomposition) -> Any:
    """Two-degree-of-freedom-per-mode chf: prod_j (1 - i xi lambda_j N0)^-1 exp(...)."""
    x, shape = _flat_xi(xi)
    d = 1.0 - 1j * x[:, None] * decomp.lambdas[None, :] * decomp.N0
    log_phi = np.sum(
        -np.log(d) + 1j * x[:, None] * decomp.lambdas[None, :] * decomp.s[None, :] ** 2 / d,
        axis=1,
    )
    return _unflatten(np.exp(log_phi), shape)


def chf_complex(xi: ArrayLike, Cbar: ArrayLike, Lc: ArrayLike, Q: ArrayLike) -> Any:
    """chf of the real form C^dagger Q C with complex Gaussian C of mean Cbar, covariance Lc."""
    c = np.asarray(Cbar, dtype=np.complex128).reshape(-1)
    Lm = np.asarray(Lc, dtype=np.complex128)
    Qm = np.asarray(Q, dtype=np.complex128)
    r = c.size
    if Lm.shape != (r, r) or Qm.shape != (r, r):
        raise ValidationError("Cbar, Lc and Q dimensions disagree")
    if not np.allclose(Lm, Lm.conj().T):
        raise ValidationError("complex covariance is not Hermitian")
    if not np.allclose(Qm, Qm.conj().T):
        raise ValidationError("form matrix Q is not Hermitian")
    if np.linalg.eigvalsh(Lm)[0] <= 0:
        raise ValidationError("complex covariance is not positive definite")

    x, shape = _flat_xi(xi)
    Linv_c = np.linalg.solve(Lm, c)
    QL = Qm @ Lm
    eye = np.eye(r)
    out = np.empty(x.size, dtype=np.complex128)
    for k, xk in enumerate(x):
        B = eye - 1j * xk * QL
        inner = Linv_c - np.linalg.solve(B, Linv_c)
        out[k] = np.exp(-(c.conj() @ inner)) / np.linalg.det(B)
    return _unflatten(out, shape)


@dataclass(frozen=True, eq=False)
class CumulantSet:
    """kappa[0] is kappa_1; rho[0] is rho_3."""

    kappa: FloatArray
    rho: FloatArray

    @property
    def mean(self) -> float:
        return float(self.kappa[0])

    @property
    def variance(self) -> float:
        return float(self.kappa[1])

    @property
    def skewness(self) -> float:
        return float(self.rho[0]) if self.rho.size > 0 else float("nan")

    @property
    def kurtosis(self) -> float:
        return float(self.rho[1]) if self.rho.size > 1 else float("nan")


def _standardize(kappa: FloatArray) -> FloatArray:
    k2 = kappa[1]
    if k2 <= 0:
        return np.full(max(kappa.size - 2, 0), np.nan)
    orders = np.arange(3, kappa.size + 1)
    return np.asarray(kappa[2:] * k2 ** (-orders / 2.0))


def cumulants(mu: ArrayLike, M: ArrayLike, J: ArrayLike, s_max: int = 8) -> CumulantSet:
    """kappa_s = 2^(s-1) (s-1)! {tr (MJ)^s + s mu' J (MJ)^(s-1) mu}, s = 1..s_max."""
    if s_max < 2:
        raise ValidationError("s_max must be at least 2")
    mu_v = np.asarray(mu, dtype=np.float64).reshape(-1)
    MJ = np.asarray(M, dtype=np.float64) @ np.asarray(J, dtype=np.float64)
    Jm = np.asarray(J, dtype=np.float64)
    kappa = np.empty(s_max)
    power = np.eye(mu_v.size)
    for s in range(1, s_max + 1):
        previous = power
        power = power @ MJ
        kappa[s - 1] = 2 ** (s - 1) * math.factorial(s - 1) * (
            np.trace(power) + s * mu_v @ Jm @ previous @ mu_v
        )
    return CumulantSet(kappa, _standardize(kappa))


def cumulants_diagonal(
    decomp: SpectralDecomposition, s_max: int = 8, variant: Variant = "real"
) -> CumulantSet:
    """Cumulants from the (lambda, s) representation.

    Narrowband modes carry two degrees of freedom each.
    """
    lam, s2, n0 = decomp.lambdas, decomp.s**2, decomp.N0
    kappa = np.empty(s_max)
    for order in range(1, s_max + 1):
        base = 2 ** (order - 1) * math.factorial(order - 1)
        if variant == "real":
            kappa[order - 1] = base * np.sum((lam * n0) ** order * (1.0 + order * s2 / n0))
        else:
            kappa[order - 1] = base * np.sum(
                (lam * n0 / 2.0) ** order * (2.0 + 2.0 * order * s2 / n0)
            )
    return CumulantSet(kappa, _standardize(kappa))


def _raw_moments(kappa: FloatArray) -> FloatArray:
    """m_n = sum_k C(n-1, k-1) kappa_k m_(n-k), m_0 = 1."""
    m = np.zeros(kappa.size + 1)
    m[0] = 1.0
    for n in range(1, kappa.size + 1):
        m[n] = sum(math.comb(n - 1, k - 1) * kappa[k - 1] * m[n - k] for k in range(1, n + 1))
    return m


def _cumulants_from_moments(m: FloatArray) -> FloatArray:
    kappa = np.zeros(m.size - 1)
    for n in range(1, m.size):
        kappa[n - 1] = m[n] - sum(
            math.comb(n - 1, k - 1) * kappa[k - 1] * m[n - k] for k in range(1, n)
        )
    return kappa


def mixture_cumulants(sets: Sequence[CumulantSet]) -> CumulantSet:
    """Cumulants of an equal-weight mixture, e.g. the output at a uniformly random time.

    Raw moments are averaged and converted back, so the result is the
    cycle average of the moments rather than of the cumulants.
    """
    if not sets:
        raise ValidationError("mixture needs at least one cumulant set")
    orders = {s.kappa.size for s in sets}
    if len(orders) > 1:
        raise ValidationError(f"cumulant sets have different orders {sorted(orders)}")
    moments = np.mean([_raw_moments(s.kappa) for s in sets], axis=0)
    kappa = _cumulants_from_moments(moments)
    return CumulantSet(kappa, _standardize(kappa))


@dataclass(frozen=True, eq=False)
class ChfEvaluator:
    """A chf together with the facts the inversion routines need (mean, scale, envelope).

    representation="matrix" evaluates through chf_matrix on (mu, M, J); "diagonal"
    through the spectral form. variant="narrowband" is only available diagonally.
    """

    decomposition: SpectralDecomposition
    variant: Variant = "real"
    matrix: Optional[tuple[FloatArray, FloatArray, FloatArray]] = None
    mean: float = field(init=False)

    def __post_init__(self) -> None:
        if self.variant not in ("real", "narrowband"):
            raise ValidationError(f"unknown chf variant {self.variant!r}")
        if self.matrix is not None and self.variant != "real":
            raise ValidationError("the matrix representation exists for the real variant only")
        kappa1 = cumulants_diagonal(self.decomposition, 2, self.variant).mean
        object.__setattr__(self, "mean", kappa1)

    @classmethod
    def from_model(
        cls,
        model: GaussianVectorModel,
        J: ArrayLike,
        representation: Literal["diagonal", "matrix"] = "diagonal",
        variant: Variant = "real",
    ) -> "ChfEvaluator":
        Jm = np.asarray(J, dtype=np.float64)
        decomp = decompose(model, Jm)
        if representation == "matrix":
            return cls(decomp, variant, (model.mu, model.M, Jm))
        return cls(decomp, variant)

    @property
    def representation(self) -> str:
        return "matrix" if self.matrix is not None else "diagonal"

    @property
    def scale(self) -> float:
        return self.decomposition.scale

    def __call__(self, xi: ArrayLike) -> Any:
        if self.matrix is not None:
            mu, M, J = self.matrix
            return chf_matrix(xi, mu, M, J)
        if self.variant == "narrowband":
            return chf_narrowband(xi, self.decomposition)
        return chf_diagonal(xi, self.decomposition)

    def envelope(self, xi: ArrayLike) -> FloatArray:
        """Upper bound on |phi(xi)| from the eigenvalues alone."""
        x = np.abs(np.asarray(xi, dtype=np.float64))[..., None]
        lam_n0 = self.decomposition.lambdas * self.decomposition.N0
        if self.variant == "narrowband":
            return np.asarray(np.prod((1.0 + x**2 * lam_n0**2) ** -0.5, axis=-1))
        return np.asarray(np.prod((1.0 + 4.0 * x**2 * lam_n0**2) ** -0.25, axis=-1))


def quad_converged(value: float, error: float) -> bool:
    """Accept a quadrature result whose error is small against max(1, |value|)."""
    return bool(np.isfinite(value)) and error <= _FAIL_TOL * max(1.0, abs(value))


def quad_with_retry(
    f: Callable[[float], float], a: float, b: float, what: str, **kwargs: Any
) -> tuple[float, float]:
    """scipy quad; a result that fails quad_converged is retried once with 5x the subdivisions."""
    result = quad(f, a, b, full_output=1, **kwargs)
    value, error = float(result[0]), float(result[1])
    if quad_converged(value, error):
        return value, error
    if len(result) > 3:
        logger.debug("%s: quadrature message: %s", what, str(result[3]).splitlines()[0])
    retry = dict(kwargs)
    retry["limit"] = 5 * int(kwargs.get("limit", 50))
    if "weight" in kwargs:
        retry["limlst"] = 5 * int(kwargs.get("limlst", 50))
    result = quad(f, a, b, full_output=1, **retry)
    again, again_error = float(result[0]), float(result[1])
    logger.debug("%s: retried, error %.3e -> %.3e", what, error, again_error)
    if np.isfinite(again) and (not np.isfinite(value) or again_error < error):
        return again, again_error
    return value, error


def _checked_quad(
    f: Callable[[float], float], a: float, b: float, what: str, **kwargs: Any
) -> tuple[float, float]:
    value, error = quad_with_retry(f, a, b, what, **kwargs)
    if not quad_converged(value, error):
        raise ConvergenceError(
            f"{what}: quadrature did not converge (error estimate {error:.3e})", error
        )
    return value, error


def _half_line_integral(
    chf: ChfEvaluator, v: float, kind: Literal["cdf", "pdf"]
) -> tuple[float, float]:
    """Integral over (0, inf) of Im[e^{-i xi v} phi]/xi (cdf) or Re[e^{-i xi v} phi] (pdf).

    (0, a] is integrated directly; [a, inf) as a Fourier integral against cos/sin weights
    so that the slowly decaying tail is summed cycle by cycle rather than truncated.
    """
    scale = chf.scale
    if scale <= 0.0:
        raise ValidationError("form has no nonzero eigenvalue")
    split = _SPLIT_XI / scale
    series_below = _SERIES_XI / scale
    kappa1 = chf.mean

    def phi(x: float) -> complex:
        return complex(chf(x))

    if kind == "cdf":

        def head(x: float) -> float:
            if x < series_below:
                return kappa1 - v
            return (np.exp(-1j * x * v) * phi(x)).imag / x

        def tail_cos(x: float) -> float:
            return phi(x).imag / x

        def tail_sin(x: float) -> float:
            return -phi(x).real / x

    else:

        def head(x: float) -> float:
            return (np.exp(-1j * x * v) * phi(x)).real

        def tail_cos(x: float) -> float:
            return phi(x).real

        def tail_sin(x: float) -> float:
            return phi(x).imag

    total, error = _checked_quad(
        head, 0.0, split, f"{kind} head at v={v:g}", limit=400, epsabs=_QUAD_EPS, epsrel=_QUAD_EPS
    )
    if abs(v) * split < 1e-8:

        def plain(x: float) -> float:
            return tail_cos(x)

        part, err = _checked_quad(
            plain, split, np.inf, f"{kind} tail at v={v:g}", limit=400, epsabs=_QUAD_EPS
        )
        return total + part, error + err

    w = abs(v)
    sign = 1.0 if v > 0 else -1.0
    cos_part, cos_err = _checked_quad(
        tail_cos, split, np.inf, f"{kind} cos tail at v={v:g}",
        weight="cos", wvar=w, limlst=200, epsabs=_QUAD_EPS,
    )
    sin_part, sin_err = _checked_quad(
        tail_sin, split, np.inf, f"{kind} sin tail at v={v:g}",
        weight="sin", wvar=w, limlst=200, epsabs=_QUAD_EPS,
    )
    return total + cos_part + sign * sin_part, error + cos_err + sin_err


def cdf_gil_pelaez(v: float, chf: ChfEvaluator) -> float:
    """F(v) = 1/2 - (1/pi) int_0^inf Im[e^{-i xi v} phi(xi)] / xi dxi, clamped to [0, 1]."""
    integral, error = _half_line_integral(chf, float(v), "cdf")
    logger.debug("cdf at v=%g: integral %.12g (error %.2e)", v, integral, error)
    return float(min(1.0, max(0.0, 0.5 - integral / np.pi)))


def cdf_grid(values: ArrayLike, chf: ChfEvaluator) -> FloatArray:
    """CDF on a grid; quadrature jitter is removed by a running maximum."""
    grid = np.asarray(values, dtype=np.float64)
    raw = np.array([cdf_gil_pelaez(v, chf) for v in grid])
    order = np.argsort(grid)
    raw[order] = np.maximum.accumulate(raw[order])
    return raw


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Tabulated density; meta holds normalization error, support, clamp and status."""

    values: FloatArray
    pdf: FloatArray
    cdf: Optional[FloatArray] = None
    meta: dict[str, Any] = field(default_factory=dict)

    def mass(self) -> float:
        return float(trapezoid(self.pdf, self.values))

    def mass_between(self, lo: float, hi: float) -> float:
        inside = (self.values >= lo) & (self.values <= hi)
        if np.count_nonzero(inside) < 2:
            if np.count_nonzero(inside) == 1:
                idx = int(np.flatnonzero(inside)[0])
                return float(self.pdf[idx] * _cell_widths(self.values)[idx])
            return 0.0
        return float(trapezoid(self.pdf[inside], self.values[inside]))

    def mean(self) -> float:
        return float(trapezoid(self.values * self.pdf, self.values) / self.mass())

    def variance(self) -> float:
        m = self.mean()
        return float(trapezoid((self.values - m) ** 2 * self.pdf, self.values) / self.mass())

    def quantile(self, prob: float) -> float:
        running = cumulative_trapezoid(self.pdf, self.values, initial=0.0)
        running = running / running[-1]
        return float(np.interp(prob, running, self.values))

    def l1_distance(self, other_pdf: ArrayLike) -> float:
        return float(trapezoid(np.abs(self.pdf - np.asarray(other_pdf)), self.values))


def _cell_widths(values: FloatArray) -> FloatArray:
    edges = np.concatenate(
        [[values[0]], (values[1:] + values[:-1]) / 2.0, [values[-1]]]
    )
    return np.diff(edges)


def make_density_grid(
    values: ArrayLike, pdf: ArrayLike, expected_mass: float = 1.0, **meta: Any
) -> DensityGrid:
    """Clamp negatives, record normalization and clamp magnitude, attach a CDF.

    expected_mass is the mass the grid should hold (below 1 when the support is truncated).
    """
    grid = np.asarray(values, dtype=np.float64)
    raw = np.asarray(pdf, dtype=np.float64)
    finite = np.isfinite(raw)
    raw = np.where(finite, raw, 0.0)
    clamped = float(max(0.0, -raw.min())) if raw.size else 0.0
    density = np.maximum(raw, 0.0)
    mass = float(trapezoid(density, grid)) if grid.size > 1 else 0.0
    normalization_error = abs(mass - expected_mass)
    cdf = cumulative_trapezoid(density, grid, initial=0.0) if grid.size > 1 else None
    status = "ok" if normalization_error <= _NORMALIZATION_FLAG and finite.all() else "flagged"
    if clamped > 1e-6:
        logger.warning("density clamped: most negative value %.3e", -clamped)
    if status == "flagged":
        logger.warning(
            "density flagged: normalization error %.3e, %d failed points",
            normalization_error, int(np.count_nonzero(~finite)),
        )
    info = {
        "normalization_error": normalization_error,
        "support": (float(grid[0]), float(grid[-1])) if grid.size else (0.0, 0.0),
        "clamped": clamped,
        "failed_points": int(np.count_nonzero(~finite)),
        "failed_at": [float(g) for g in grid[~finite]],
        "status": status,
    }
    info.update(meta)
    return DensityGrid(grid, density, cdf, info)


def pdf_numeric(grid: ArrayLike, chf: ChfEvaluator) -> DensityGrid:
    """f(v) = (1/pi) int_0^inf Re[e^{-i xi v} phi(xi)] dxi on every grid point."""
    values = np.asarray(grid, dtype=np.float64)
    pdf = np.empty(values.size)
    for k, v in enumerate(values):
        try:
            integral, _ = _half_line_integral(chf, float(v), "pdf")
            pdf[k] = integral / np.pi
        except ConvergenceError as e:
            logger.warning("pdf inversion failed at v=%g: %s", v, e)
            pdf[k] = np.nan
    return make_density_grid(values, pdf, method="inversion", variant=chf.variant)


def pdf_single_lambda(v: ArrayLike, lam: float, s: float, N0: float = 1.0) -> FloatArray:
    """Density of lambda (sqrt(N0) U + s)^2 for lambda > 0 (cosh closed form)."""
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    x = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    root = np.sqrt(x[pos] / lam)
    # exp(-(s^2 + v/lam)/2N0) cosh(s root / N0), written without overflow
    mixed = 0.5 * (
        np.exp(-((root - s) ** 2) / (2.0 * N0)) + np.exp(-((root + s) ** 2) / (2.0 * N0))
    )
    out[pos] = mixed / np.sqrt(2.0 * np.pi * N0 * lam * x[pos])
    return out


def pdf_rician_mode(v: ArrayLike, lam: float, s: float, N0: float = 1.0) -> FloatArray:
    """Density of a narrowband mode: scaled noncentral chi-square with two degrees of freedom."""
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    x = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    root = np.sqrt(x[pos] / lam)
    z = 2.0 * abs(s) * root / N0
    out[pos] = np.exp(-((root - abs(s)) ** 2) / N0) * i0e(z) / (lam * N0)
    return out


def _pair_density(u: FloatArray, a: float, b: float, N0: float) -> FloatArray:
    """Density of a N0 chi2_1 + b N0 chi2_1 for u > 0, a, b > 0."""
    z = u * (1.0 / a - 1.0 / b) / (4.0 * N0)
    return np.asarray(
        np.exp(-u / (2.0 * N0 * max(a, b))) * i0e(np.abs(z)) / (2.0 * N0 * np.sqrt(a * b))
    )


def pdf_two_pos_two_neg(
    v: ArrayLike, lam1: float, lam2: float, lam3: float, lam4: float, N0: float = 1.0
) -> FloatArray:
    """Central density for eigenvalues lam1, lam2 > 0 and lam3, lam4 < 0.

    The positive pair has the Bessel-I0 density; the negative pair is its mirror
    image with (|lam3|, |lam4|). The two are convolved over u >= max(0, v).
    """
    if not (lam1 > 0 and lam2 > 0):
        raise ValidationError("lam1 and lam2 must be positive")
    if not (lam3 < 0 and lam4 < 0):
        raise ValidationError("lam3 and lam4 must be negative")
    a3, a4 = abs(lam3), abs(lam4)
    x = np.asarray(v, dtype=np.float64)
    flat = x.reshape(-1)
    out = np.empty(flat.size)
    reach = 2.0 * N0 * max(lam1, lam2, a3, a4)
    for k, vk in enumerate(flat):
        lower = max(0.0, float(vk))

        def integrand(u: float, vk: float = float(vk)) -> float:
            return float(
                _pair_density(np.array(u), lam1, lam2, N0)
                * _pair_density(np.array(u - vk), a3, a4, N0)
            )

        head, _ = _checked_quad(
            integrand, lower, lower + 20.0 * reach, "convolution",
            limit=200, epsabs=1e-13, epsrel=1e-11,
        )
        tail, _ = _checked_quad(
            integrand, lower + 20.0 * reach, np.inf, "convolution tail", epsabs=1e-13
        )
        out[k] = head + tail
    return out.reshape(x.shape)


def sign_split(
    decomp: SpectralDecomposition,
) -> tuple[SpectralDecomposition, SpectralDecomposition]:
    """V = V+ - V-: positive modes, and negative modes with |lambda|; zero modes dropped."""
    pos = np.flatnonzero(decomp.lambdas > 0)
    neg = np.flatnonzero(decomp.lambdas < 0)
    negative = SpectralDecomposition(-decomp.lambdas[neg], decomp.s[neg], decomp.N0)
    return decomp.subset(pos), negative
