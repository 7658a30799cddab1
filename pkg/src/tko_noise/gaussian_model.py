"""Gaussian sample-vector model of signal plus noise at the operator taps, and its spectral form."""

from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from tko_noise.errors import ValidationError
from tko_noise.kernels import OperatorKernel, kernel_matrix
from tko_noise.logs import get_logger

FloatArray = NDArray[np.float64]

logger = get_logger("gaussian_model")

_ZERO_EIGEN_RTOL = 1e-12


class SignalLaw(Protocol):
    """Deterministic part of the input, evaluable at arbitrary times."""

    def __call__(self, t: FloatArray) -> FloatArray: ...

    def derivative(self, t: FloatArray) -> FloatArray: ...


@dataclass(frozen=True)
class ToneSet:
    """Sum of cosines a_k cos(w_k t + phi_k)."""

    amplitudes: tuple[float, ...]
    omegas: tuple[float, ...]
    phases: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.amplitudes) != len(self.omegas):
            raise ValidationError("amplitudes and omegas must have the same length")
        if not self.phases:
            object.__setattr__(self, "phases", (0.0,) * len(self.amplitudes))
        elif len(self.phases) != len(self.amplitudes):
            raise ValidationError("phases must match amplitudes in length")

    @classmethod
    def tone(cls, amplitude: float, omega: float, phase: float = 0.0) -> "ToneSet":
        return cls((amplitude,), (omega,), (phase,))

    def __call__(self, t: FloatArray) -> FloatArray:
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros_like(t)
        for a, w, ph in zip(self.amplitudes, self.omegas, self.phases):
            out += a * np.cos(w * t + ph)
        return out

    def derivative(self, t: FloatArray) -> FloatArray:
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros_like(t)
        for a, w, ph in zip(self.amplitudes, self.omegas, self.phases):
            out -= a * w * np.sin(w * t + ph)
        return out

    @property
    def power(self) -> float:
        """Mean squared value over a long window (distinct frequencies)."""
        return float(sum(a * a for a in self.amplitudes) / 2.0)


@dataclass(frozen=True)
class AmTone:
    """a (1 + depth cos(W t)) cos(w t + phase)."""

    amplitude: float
    omega: float
    depth: float = 0.0
    mod_omega: float = 0.0
    phase: float = 0.0

    def envelope(self, t: FloatArray) -> FloatArray:
        return self.amplitude * (1.0 + self.depth * np.cos(self.mod_omega * np.asarray(t)))

    def __call__(self, t: FloatArray) -> FloatArray:
        t = np.asarray(t, dtype=np.float64)
        return self.envelope(t) * np.cos(self.omega * t + self.phase)

    def derivative(self, t: FloatArray) -> FloatArray:
        t = np.asarray(t, dtype=np.float64)
        env_dot = -self.amplitude * self.depth * self.mod_omega * np.sin(self.mod_omega * t)
        return env_dot * np.cos(self.omega * t + self.phase) - self.envelope(
            t
        ) * self.omega * np.sin(self.omega * t + self.phase)

    @property
    def power(self) -> float:
        return float(self.amplitude**2 * (1.0 + self.depth**2 / 2.0) / 2.0)


@dataclass(frozen=True)
class CovarianceKernel:
    """Stationary Gaussian covariance R(t) = scale * exp(-c t^2)."""

    c: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValidationError(f"decay parameter c must be positive, got {self.c}")
        if not self.scale > 0:
            raise ValidationError(f"scale must be positive, got {self.scale}")

    def __call__(self, t: ArrayLike) -> FloatArray:
        t = np.asarray(t, dtype=np.float64)
        return np.asarray(self.scale * np.exp(-self.c * t * t))

    def cross_derivative(self, t: ArrayLike) -> FloatArray:
        """Cov(x(s + t), xdot(s)) = -R'(t) for the lag t."""
        t = np.asarray(t, dtype=np.float64)
        return np.asarray(2.0 * self.c * t * self(t))

    def derivative_covariance(self, t: ArrayLike) -> FloatArray:
        """Cov(xdot(s + t), xdot(s)) = -R''(t)."""
        t = np.asarray(t, dtype=np.float64)
        return np.asarray((2.0 * self.c - 4.0 * self.c**2 * t * t) * self(t))

    @property
    def correlation_time(self) -> float:
        return correlation_time(self.c)


def correlation_time(c: float) -> float:
    """delta_c = 1 / sqrt(c)."""
    return float(1.0 / np.sqrt(c))


@dataclass(frozen=True, eq=False)
class GaussianVectorModel:
    """X ~ N(mu, M); N0 is the noise level of the diagonal chf.

    The spectral decomposition is taken against M / N0, so with the default
    N0 = 1 the eigenvalues are those of M J.
    """

    mu: FloatArray
    M: FloatArray
    N0: float = 1.0
    L: FloatArray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        M = np.asarray(self.M, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValidationError(f"covariance must be square, got shape {M.shape}")
        if M.shape[0] != mu.size:
            raise ValidationError(f"mean has dimension {mu.size}, covariance {M.shape[0]}")
        if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(M).max())):
            raise ValidationError("covariance matrix is not symmetric")
        if not self.N0 > 0:
            raise ValidationError(f"N0 must be positive, got {self.N0}")
        M = (M + M.T) / 2.0
        eigenvalues = np.linalg.eigvalsh(M)
        if eigenvalues[0] <= 1e-12 * max(abs(eigenvalues[-1]), 1e-300):
            raise ValidationError(
                "covariance matrix is not positive definite "
                f"(smallest eigenvalue {eigenvalues[0]:.3e})"
            )
        try:
            L = np.linalg.cholesky(M)
        except np.linalg.LinAlgError as e:
            raise ValidationError(f"covariance matrix is not positive definite: {e}") from e
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "L", L)

    @property
    def dim(self) -> int:
        return int(self.mu.size)

    def noise_only(self) -> "GaussianVectorModel":
        return GaussianVectorModel(np.zeros_like(self.mu), self.M, self.N0)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """V = sum_j lambda_j (sqrt(N0) U_j + s_j)^2 with U_j iid standard normal."""

    lambdas: FloatArray
    s: FloatArray
    N0: float = 1.0

    def __post_init__(self) -> None:
        lambdas = np.asarray(self.lambdas, dtype=np.float64).reshape(-1)
        s = np.asarray(self.s, dtype=np.float64).reshape(-1)
        if lambdas.size != s.size:
            raise ValidationError("lambdas and s must have equal length")
        if not self.N0 > 0:
            raise ValidationError(f"N0 must be positive, got {self.N0}")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "s", s)

    @property
    def r(self) -> int:
        return int(self.lambdas.size)

    @property
    def scale(self) -> float:
        """Largest |lambda| N0, the natural scale of the form."""
        return float(np.max(np.abs(self.lambdas)) * self.N0) if self.r else 0.0

    def subset(self, index: ArrayLike) -> "SpectralDecomposition":
        idx = np.asarray(index)
        return SpectralDecomposition(self.lambdas[idx], self.s[idx], self.N0)


def check_form(J: FloatArray, dim: int) -> FloatArray:
    J = np.asarray(J, dtype=np.float64)
    if J.shape != (dim, dim):
        raise ValidationError(f"kernel matrix has shape {J.shape}, model dimension is {dim}")
    if not np.allclose(J, J.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(J).max())):
        raise ValidationError("kernel matrix is not symmetric")
    return (J + J.T) / 2.0


def build_covariance(kernel: CovarianceKernel, tap_times: ArrayLike) -> FloatArray:
    """M[i, j] = R(t_i - t_j) on strictly increasing tap times."""
    t = np.asarray(tap_times, dtype=np.float64).reshape(-1)
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ValidationError("tap times must be strictly increasing (duplicates make M singular)")
    lags = t[:, None] - t[None, :]
    return kernel(lags)


def decompose(model: GaussianVectorModel, J: ArrayLike) -> SpectralDecomposition:
    """Eigenvalues of L'JL (L the Cholesky factor of M / N0) and noncentralities s = P'L^-1 mu."""
    Jm = check_form(np.asarray(J, dtype=np.float64), model.dim)
    L = model.L / np.sqrt(model.N0)
    A = L.T @ Jm @ L
    lambdas, P = np.linalg.eigh((A + A.T) / 2.0)
    s = P.T @ scipy.linalg.solve_triangular(L, model.mu, lower=True)
    biggest = np.max(np.abs(lambdas)) if lambdas.size else 0.0
    lambdas = np.where(np.abs(lambdas) < _ZERO_EIGEN_RTOL * biggest, 0.0, lambdas)
    logger.debug("decomposed form: lambdas=%s", np.array2string(lambdas, precision=6))
    return SpectralDecomposition(lambdas, s, model.N0)


def lag_covariances(kernel: CovarianceKernel, max_lag: int, T: float = 1.0) -> FloatArray:
    """m_k = R(k T) for k = 0..max_lag."""
    return kernel(np.arange(max_lag + 1) * T)


def tko_mean_variance(
    signal_taps: ArrayLike,
    lags: Sequence[float],
    p: int,
    q: int,
    n0: Optional[float] = None,
) -> tuple[float, float]:
    """Mean and variance of Psi_p^q from tap signal values and covariance lags m_k.

    signal_taps follow the stencil order of the kernel. The noise x noise variance is
    taken from the cumulant formula with mu = 0; the signal x noise part is the
    closed-form tap expansion.
    """
    from tko_noise.quadform import cumulants

    taps = np.asarray(signal_taps, dtype=np.float64).reshape(-1)
    m = np.asarray(lags, dtype=np.float64)
    if m.size <= 2 * q:
        raise ValidationError(f"need covariance lags up to {2 * q}, got {m.size - 1}")
    if p == 0:
        if taps.size != 3:
            raise ValidationError("Psi_0^q needs 3 signal taps")
        s1 = s2 = taps[1]
        s3, s4 = taps[0], taps[2]
    else:
        if taps.size != 4:
            raise ValidationError("Psi_p^q with p > 0 needs 4 signal taps")
        s3, s1, s2, s4 = taps
    noise_power = float(m[0]) if n0 is None else float(n0)

    mean = (s1 * s2 - s3 * s4) + (m[2 * p] - m[2 * q])

    J = kernel_matrix(p, q)
    offsets = np.array((-q, 0, q) if p == 0 else (-q, -p, p, q))
    M = m[np.abs(offsets[:, None] - offsets[None, :])]
    noise_var = cumulants(np.zeros(offsets.size), M, J, s_max=2).kappa[1]
    signal_var = noise_power * (s1**2 + s2**2 + s3**2 + s4**2) + 2.0 * (
        s1 * s2 * m[2 * p]
        + s3 * s4 * m[2 * q]
        - (s1 * s3 + s2 * s4) * m[q - p]
        - (s1 * s4 + s2 * s3) * m[q + p]
    )
    return float(mean), float(noise_var + signal_var)


def signal_tap_vector(
    signal: Callable[[FloatArray], FloatArray], center_time: float, kernel: OperatorKernel
) -> FloatArray:
    """mu_i = s(t_i) at the kernel taps around center_time."""
    return np.asarray(signal(kernel.tap_times(center_time)), dtype=np.float64)


def tone_model(
    kernel: OperatorKernel,
    covariance: CovarianceKernel,
    signal: Callable[[FloatArray], FloatArray],
    center_time: float = 0.0,
    normalize: bool = True,
) -> GaussianVectorModel:
    """Signal-plus-noise model at the kernel taps.

    With normalize=True, N0 is the noise power R(0) so the eigenvalues are those of the
    correlation-normalized M J.
    """
    times = kernel.tap_times(center_time)
    M = build_covariance(covariance, times)
    mu = signal_tap_vector(signal, center_time, kernel)
    return GaussianVectorModel(mu, M, covariance.scale if normalize else 1.0)


def derivative_pair_model(
    kernel: OperatorKernel,
    covariance: CovarianceKernel,
    signal: SignalLaw,
    center_time: float = 0.0,
    normalize: bool = True,
) -> tuple[GaussianVectorModel, FloatArray, FloatArray]:
    """Joint model of (x, xdot) at the kernel taps.

    Returns the model and the block stencils of Psi[x] and Psi[xdot] over the stacked vector.
    """
    times = kernel.tap_times(center_time)
    lags = times[:, None] - times[None, :]
    xx = covariance(lags)
    xd = covariance.cross_derivative(lags)
    dd = covariance.derivative_covariance(lags)
    M = np.block([[xx, xd], [xd.T, dd]])
    mu = np.concatenate([signal(times), signal.derivative(times)])
    r = kernel.taps
    zero = np.zeros((r, r))
    J_x = np.block([[kernel.J, zero], [zero, zero]])
    J_dx = np.block([[zero, zero], [zero, kernel.J]])
    model = GaussianVectorModel(mu, M, covariance.scale if normalize else 1.0)
    return model, J_x, J_dx


def snr_to_scale(snr_db: float, signal_power: float) -> float:
    """Noise power R(0) = signal_power * 10^(-SNR/10)."""
    return float(signal_power * 10.0 ** (-snr_db / 10.0))


def output_snr_db(kappa1_signal_noise: float, kappa1_noise: float) -> float:
    """10 log10(kappa1(S+N) / kappa1(N))."""
    if kappa1_noise <= 0:
        raise ValidationError("noise-only mean must be positive to define an output SNR")
    return float(10.0 * np.log10(kappa1_signal_noise / kappa1_noise))


def summed_output_cumulants(kappa: ArrayLike, count: int) -> FloatArray:
    """Cumulants of a sum of `count` independent copies: cumulants add."""
    if count < 1:
        raise ValidationError("count must be at least 1")
    return np.asarray(kappa, dtype=np.float64) * count
