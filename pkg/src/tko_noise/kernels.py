"""Discrete Teager-Kaiser operator family Psi_p^q: stencils, application and frequency analysis."""

from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import bisect

from tko_noise.errors import ValidationError

FloatArray = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Uniformly sampled real signal; t0 is the time of the first sample."""

    samples: FloatArray
    fs: float
    t0: float = 0.0

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValidationError("samples must be a one-dimensional sequence")
        if not self.fs > 0:
            raise ValidationError(f"sampling rate must be positive, got {self.fs}")
        object.__setattr__(self, "samples", samples)

    @property
    def T(self) -> float:
        return 1.0 / self.fs

    def __len__(self) -> int:
        return int(self.samples.size)

    def times(self) -> FloatArray:
        return self.t0 + np.arange(self.samples.size) / self.fs


def kernel_matrix(p: int, q: int) -> FloatArray:
    """Symmetric stencil J of Psi_p^q.

    Ordered to match (x[n-q], x[n], x[n+q]) for p = 0 and
    (x[n-q], x[n-p], x[n+p], x[n+q]) for p > 0.
    """
    if p < 0 or q < 0:
        raise ValidationError(f"delays must be nonnegative, got p={p}, q={q}")
    if p >= q:
        raise ValidationError(f"delays must satisfy p < q, got p={p}, q={q}")
    if p == 0:
        return np.array(
            [[0.0, 0.0, -0.5],
             [0.0, 1.0, 0.0],
             [-0.5, 0.0, 0.0]]
        )
    return np.array(
        [[0.0, 0.0, 0.0, -0.5],
         [0.0, 0.0, 0.5, 0.0],
         [0.0, 0.5, 0.0, 0.0],
         [-0.5, 0.0, 0.0, 0.0]]
    )


@dataclass(frozen=True)
class OperatorKernel:
    """Delay pair (p, q) of Psi_p^q with its stencil; T scales outputs by 1/T^2."""

    p: int
    q: int
    T: float = 1.0
    J: FloatArray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ValidationError(f"sampling interval must be positive, got {self.T}")
        object.__setattr__(self, "J", kernel_matrix(self.p, self.q))

    @property
    def offsets(self) -> tuple[int, ...]:
        """Tap offsets in samples, in stencil order."""
        if self.p == 0:
            return (-self.q, 0, self.q)
        return (-self.q, -self.p, self.p, self.q)

    @property
    def taps(self) -> int:
        return len(self.offsets)

    def tap_times(self, center_time: float = 0.0) -> FloatArray:
        return center_time + np.asarray(self.offsets, dtype=np.float64) * self.T

    def with_interval(self, T: float) -> "OperatorKernel":
        return OperatorKernel(self.p, self.q, T)

    def label(self) -> str:
        return f"psi_{self.p}^{self.q}"


def _as_samples(signal: Union[SampledSignal, ArrayLike]) -> FloatArray:
    if isinstance(signal, SampledSignal):
        return signal.samples
    return np.asarray(signal, dtype=np.float64)


def apply_tko(signal: Union[SampledSignal, ArrayLike], kernel: OperatorKernel) -> FloatArray:
    """Psi_p^q output aligned to the center sample; the q edge samples on each side are trimmed.

    output[k] belongs to input index n = k + q.
    """
    x = _as_samples(signal)
    p, q = kernel.p, kernel.q
    if x.size < 2 * q + 1:
        raise ValidationError(
            f"signal of length {x.size} is too short for {kernel.label()} "
            f"(needs at least {2 * q + 1} samples)"
        )
    n = x.size - 2 * q
    center = slice(q, q + n)
    outer = x[0:n] * x[2 * q:2 * q + n]
    if p == 0:
        inner = x[center] ** 2
    else:
        inner = x[q - p:q - p + n] * x[q + p:q + p + n]
    out: FloatArray = (inner - outer) / kernel.T**2
    return out


def freq_response(kernel: OperatorKernel, omega: ArrayLike) -> FloatArray:
    """Response to a unit sine of angular frequency omega (rad per unit of T)."""
    w = np.asarray(omega, dtype=np.float64)
    t_p = kernel.p * kernel.T
    t_q = kernel.q * kernel.T
    if kernel.p == 0:
        return np.asarray(1.0 - np.cos(2.0 * w * t_q))
    return np.asarray(np.cos(2.0 * w * t_p) - np.cos(2.0 * w * t_q))


def _discriminator_equation(kernel: OperatorKernel, omega: float) -> float:
    t_p = kernel.p * kernel.T
    t_q = kernel.q * kernel.T
    return float(t_p * np.sin(2.0 * omega * t_p) - t_q * np.sin(2.0 * omega * t_q))


def discriminator_extrema(
    kernel: OperatorKernel, search_interval: tuple[float, float], points_per_pi: int = 1024
) -> list[float]:
    """Roots of t_p sin(2w t_p) = t_q sin(2w t_q) in the interval (extrema of freq_response).

    Sign changes are bracketed on a uniform grid of points_per_pi points per pi/t_q
    and refined by bisection to 1e-10.
    """
    if kernel.p == 0:
        raise ValidationError("discriminator extrema are defined for p > 0 only")
    lo, hi = float(search_interval[0]), float(search_interval[1])
    if not hi > lo:
        raise ValidationError(f"degenerate search interval ({lo}, {hi})")

    t_q = kernel.q * kernel.T
    n_points = max(2, int(np.ceil(points_per_pi * (hi - lo) * t_q / np.pi)) + 1)
    grid = np.linspace(lo, hi, n_points)
    values = np.array([_discriminator_equation(kernel, w) for w in grid])

    roots: list[float] = []
    for i in range(n_points - 1):
        a, b = values[i], values[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0.0:
            root = bisect(
                lambda w: _discriminator_equation(kernel, w), grid[i], grid[i + 1], xtol=1e-10
            )
            roots.append(float(root))
    if values[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


class CrossTerms(NamedTuple):
    dc: float
    sum_coeff: float
    diff_coeff: float


def cross_term_amplitudes(
    a_k: float, a_l: float, omega_k: float, omega_l: float, kernel: OperatorKernel
) -> CrossTerms:
    """Output components of Psi_p^q for x(t) = a_k sin(w_k t) + a_l sin(w_l t).

    dc is the constant part; sum_coeff and diff_coeff multiply cos((w_k + w_l) t) and
    cos((w_k - w_l) t) respectively. Scaling by 1/T^2 is left out, as in the
    continuous-delay form of the operator.
    """
    t_p = kernel.p * kernel.T
    t_q = kernel.q * kernel.T
    dc = a_k**2 * (np.sin(omega_k * t_q) ** 2 - np.sin(omega_k * t_p) ** 2)
    dc += a_l**2 * (np.sin(omega_l * t_q) ** 2 - np.sin(omega_l * t_p) ** 2)
    w_sum = omega_k + omega_l
    w_diff = omega_k - omega_l
    diff_coeff = a_k * a_l * (np.cos(w_sum * t_p) - np.cos(w_sum * t_q))
    sum_coeff = -a_k * a_l * (np.cos(w_diff * t_p) - np.cos(w_diff * t_q))
    return CrossTerms(float(dc), float(sum_coeff), float(diff_coeff))


def sum_of_squares_transform(q: int) -> FloatArray:
    """Linear map from (x[n-q], x[n], x[n+q]) to (x[n], s[n], d[n]).

    s = (x[n+q] + x[n-q]) / 2 and d = (x[n+q] - x[n-q]) / 2; q only documents the taps.
    """
    if q < 1:
        raise ValidationError(f"q must be positive, got {q}")
    return np.array(
        [[0.0, 1.0, 0.0],
         [0.5, 0.0, 0.5],
         [-0.5, 0.0, 0.5]]
    )


def sum_of_squares_matrix() -> FloatArray:
    """Psi_0^q as x^2 - s^2 + d^2 over (x, s, d)."""
    return np.diag([1.0, -1.0, 1.0])


def odd_harmonic_power(signal: Union[SampledSignal, ArrayLike], period_samples: int) -> float:
    """Power in the odd harmonics of a periodic sequence.

    Averages Psi_0^q with q = period/4 (a quarter-period delay) over whole periods:
    even harmonics cancel and each odd harmonic contributes twice its power.
    """
    if period_samples % 4 != 0:
        raise ValidationError("period must be a multiple of 4 samples for a quarter-period delay")
    x = _as_samples(signal)
    q = period_samples // 4
    psi = apply_tko(x, OperatorKernel(0, q))
    whole = (psi.size // period_samples) * period_samples
    if whole == 0:
        raise ValidationError("signal must span at least one full period after trimming")
    return float(np.mean(psi[:whole]) / 2.0)
