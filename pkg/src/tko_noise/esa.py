"""Energy separation: derivative estimation, ESA ratios, threshold gating and post-filtering."""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal as sps

from tko_noise.errors import ValidationError
from tko_noise.kernels import OperatorKernel, SampledSignal, apply_tko
from tko_noise.logs import get_logger

FloatArray = NDArray[np.float64]

logger = get_logger("esa")

# about 135 dB stopband; the interpolated derivative of a tone stays within 1e-4 of
# its gain for omega T up to pi/8
KAISER_BETA = 14.0
HALF_WIDTH = 16
DEFAULT_REFINE = 8
_MIN_LENGTH = 8
# fourth-order central difference
_CENTRAL_STENCIL = np.array([-1.0, 8.0, 0.0, -8.0, 1.0]) / 12.0
_BINOMIAL = np.array([0.25, 0.5, 0.25])


def _half_width(n: int) -> int:
    return min(HALF_WIDTH, (n - 1) // 3)


def interpolate_derivative(signal: SampledSignal, refine: int = DEFAULT_REFINE) -> SampledSignal:
    """Derivative at the original rate from a band-limited refinement of the samples.

    The samples are upsampled by `refine` through a Kaiser-windowed sinc (beta 14,
    HALF_WIDTH original samples each side), differenced centrally on the fine grid
    and decimated back. HALF_WIDTH samples are trimmed at both ends; the result's
    t0 records the shift.
    """
    if refine < 2:
        raise ValidationError(f"refine must be at least 2, got {refine}")
    n = len(signal)
    if n < _MIN_LENGTH:
        raise ValidationError(f"signal of length {n} is too short (needs {_MIN_LENGTH})")
    half = _half_width(n)
    taps = sps.firwin(2 * half * refine + 1, 1.0 / refine, window=("kaiser", KAISER_BETA))
    fine = sps.resample_poly(signal.samples, refine, 1, window=taps)
    h = signal.T / refine
    derivative = np.convolve(fine, _CENTRAL_STENCIL, mode="same") / h
    coarse = derivative[::refine][half:n - half]
    return SampledSignal(coarse, signal.fs, signal.t0 + half * signal.T)


def backward_difference_derivative(signal: SampledSignal) -> SampledSignal:
    """(x[n] - x[n-1]) fs, aligned to sample n; the first sample is dropped."""
    if len(signal) < 2:
        raise ValidationError("backward difference needs at least 2 samples")
    return SampledSignal(np.diff(signal.samples) * signal.fs, signal.fs, signal.t0 + signal.T)


@dataclass(frozen=True, eq=False)
class EsaEstimate:
    """Per-sample omega^2 and a^2 estimates; invalid entries are NaN."""

    omega_sq: FloatArray
    amp_sq: FloatArray
    valid_mask: NDArray[np.bool_]
    times: FloatArray
    psi_x: FloatArray
    psi_dx: FloatArray

    @property
    def omega(self) -> FloatArray:
        return np.asarray(np.sqrt(self.omega_sq))

    @property
    def amplitude(self) -> FloatArray:
        return np.asarray(np.sqrt(self.amp_sq))

    @property
    def valid_fraction(self) -> float:
        return float(np.mean(self.valid_mask)) if self.valid_mask.size else 0.0


def esa_demodulate(
    signal: SampledSignal,
    kernel: OperatorKernel,
    threshold: float = 0.0,
    refine: int = DEFAULT_REFINE,
    threshold_dx: Optional[float] = None,
) -> EsaEstimate:
    """omega^2 = Psi[xdot]/Psi[x] and a^2 = Psi[x]^2/Psi[xdot] per sample.

    A sample is valid when Psi[x] exceeds `threshold` and Psi[xdot] exceeds
    `threshold_dx` (the same threshold when omitted). The kernel's interval is
    set to the signal's sampling interval.
    """
    gate_dx = threshold if threshold_dx is None else threshold_dx
    if threshold < 0 or gate_dx < 0:
        raise ValidationError(f"thresholds must be nonnegative, got {threshold}, {gate_dx}")
    k = kernel.with_interval(signal.T)
    dx = interpolate_derivative(signal, refine)
    offset = int(round((dx.t0 - signal.t0) * signal.fs))
    x = signal.samples[offset:offset + len(dx)]
    if x.size < 2 * k.q + 1:
        raise ValidationError(
            f"signal of length {len(signal)} is too short for {k.label()} after derivative trimming"
        )
    psi_x = apply_tko(x, k)
    psi_dx = apply_tko(dx, k)
    valid = (psi_x > threshold) & (psi_dx > gate_dx)
    with np.errstate(divide="ignore", invalid="ignore"):
        omega_sq = np.where(valid, psi_dx / psi_x, np.nan)
        amp_sq = np.where(valid, psi_x**2 / psi_dx, np.nan)
    times = dx.t0 + (k.q + np.arange(psi_x.size)) * signal.T
    logger.debug("esa: %d of %d samples valid", int(valid.sum()), valid.size)
    return EsaEstimate(omega_sq, amp_sq, valid, times, psi_x, psi_dx)


def binomial_filter(sequence: ArrayLike) -> FloatArray:
    """(x[n-1] + 2 x[n] + x[n+1]) / 4 on interior samples."""
    x = np.asarray(sequence, dtype=np.float64)
    if x.size < 3:
        raise ValidationError("binomial filter needs at least 3 samples")
    return np.asarray(np.convolve(x, _BINOMIAL, mode="valid"))


def sum_outputs(sequence: ArrayLike, count: int) -> FloatArray:
    """Moving sum of `count` consecutive operator outputs."""
    x = np.asarray(sequence, dtype=np.float64)
    if count < 1 or count > x.size:
        raise ValidationError(f"count must be in [1, {x.size}], got {count}")
    return np.asarray(np.convolve(x, np.ones(count), mode="valid"))


class PositivityReport(NamedTuple):
    frac_neg_before: float
    frac_neg_after: float


def _negative_fraction(x: FloatArray) -> float:
    finite = x[np.isfinite(x)]
    return float(np.mean(finite < 0.0)) if finite.size else 0.0


def positivity_report(
    before: Union[ArrayLike, SampledSignal], after: Union[ArrayLike, SampledSignal]
) -> PositivityReport:
    """Fraction of strictly negative (finite) samples before and after filtering.

    When `after` is a binomial_filter output (two samples shorter), `before` is
    trimmed to the same samples.
    """
    b = before.samples if isinstance(before, SampledSignal) else np.asarray(before, dtype=float)
    a = after.samples if isinstance(after, SampledSignal) else np.asarray(after, dtype=float)
    if b.size == a.size + 2:
        b = b[1:-1]
    elif b.size != a.size:
        raise ValidationError(f"cannot align sequences of length {b.size} and {a.size}")
    return PositivityReport(_negative_fraction(b), _negative_fraction(a))
