"""Two-sinusoid input cos(2 pi t) + a cos(2 pi f t + theta0): extrema, negativity and excursions."""

from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from tko_noise.errors import ValidationError
from tko_noise.esa import interpolate_derivative
from tko_noise.kernels import SampledSignal
from tko_noise.logs import get_logger
from tko_noise.montecarlo import McConfig, partition_rng

FloatArray = NDArray[np.float64]
ExtremumKind = Literal["min", "max", "inflection"]

logger = get_logger("two_tone")

TWO_PI = 2.0 * np.pi
BOUNDARY_TOL = 1e-9
_ROOT_XTOL = 1e-12
_MIN_POINTS_PER_PERIOD = 64


@dataclass(frozen=True)
class TwoToneSignal:
    """a is the amplitude ratio a2/a1, f the frequency ratio f2/f1 (time in units of 1/f1)."""

    a: float
    f: float
    theta0: float = 0.0

    def __post_init__(self) -> None:
        if self.a < 0:
            raise ValidationError(f"amplitude ratio must be nonnegative, got {self.a}")
        if not self.f > 0:
            raise ValidationError(f"frequency ratio must be positive, got {self.f}")

    @property
    def fastest(self) -> float:
        return max(1.0, self.f)

    def x(self, t: ArrayLike) -> FloatArray:
        return evaluate(self, t)[0]

    def psi(self, t: ArrayLike) -> FloatArray:
        """Continuous operator output xdot^2 - x xddot."""
        x, xd, xdd = evaluate(self, t)
        return np.asarray(xd**2 - x * xdd)


def evaluate(signal: TwoToneSignal, t: ArrayLike) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Exact (x, xdot, xddot)."""
    tt = np.asarray(t, dtype=np.float64)
    a, f = signal.a, signal.f
    c1, s1 = np.cos(TWO_PI * tt), np.sin(TWO_PI * tt)
    phase = TWO_PI * f * tt + signal.theta0
    c2, s2 = np.cos(phase), np.sin(phase)
    x = c1 + a * c2
    xd = -TWO_PI * (s1 + a * f * s2)
    xdd = -(TWO_PI**2) * (c1 + a * f * f * c2)
    return np.asarray(x), np.asarray(xd), np.asarray(xdd)


class Extremum(NamedTuple):
    t: float
    kind: ExtremumKind
    x: float


def _classify(signal: TwoToneSignal, t: float) -> Extremum:
    x, _, xdd = evaluate(signal, t)
    scale = TWO_PI**2 * (1.0 + signal.a * signal.f**2)
    if abs(float(xdd)) <= BOUNDARY_TOL * scale:
        kind: ExtremumKind = "inflection"
    else:
        kind = "max" if xdd < 0 else "min"
    return Extremum(float(t), kind, float(x))


def find_extrema(
    signal: TwoToneSignal,
    window: tuple[float, float],
    points_per_period: int = _MIN_POINTS_PER_PERIOD,
) -> list[Extremum]:
    """Roots of xdot in the window, bracketed on a grid and refined with brentq to 1e-12."""
    lo, hi = float(window[0]), float(window[1])
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise ValidationError(f"window must be finite and increasing, got ({lo}, {hi})")
    if points_per_period < _MIN_POINTS_PER_PERIOD:
        raise ValidationError(f"need at least {_MIN_POINTS_PER_PERIOD} points per period")

    n = int(np.ceil((hi - lo) * signal.fastest * points_per_period)) + 1
    grid = np.linspace(lo, hi, n)
    xd = evaluate(signal, grid)[1]

    def derivative(t: float) -> float:
        return float(evaluate(signal, t)[1])

    roots: list[float] = []
    for i in range(n - 1):
        if xd[i] == 0.0:
            roots.append(float(grid[i]))
        elif xd[i] * xd[i + 1] < 0.0:
            roots.append(float(brentq(derivative, grid[i], grid[i + 1], xtol=_ROOT_XTOL)))
    if xd[-1] == 0.0:
        roots.append(float(grid[-1]))
    return [_classify(signal, t) for t in roots]


def derivative_components(signal: TwoToneSignal, t: ArrayLike) -> tuple[FloatArray, FloatArray]:
    """(M1, M2): the first tone's derivative and minus the second tone's.

    The curves cross exactly at the extrema of x.
    """
    tt = np.asarray(t, dtype=np.float64)
    m1 = -TWO_PI * np.sin(TWO_PI * tt)
    m2 = TWO_PI * signal.a * signal.f * np.sin(TWO_PI * signal.f * tt + signal.theta0)
    return np.asarray(m1), np.asarray(m2)


def negativity_bounds(signal: TwoToneSignal, t: ArrayLike) -> tuple[FloatArray, FloatArray]:
    """(y_R, y_G) = (-cos(2 pi t)/a, -cos(2 pi t)/(a f^2))."""
    if not signal.a > 0:
        raise ValidationError("bounds need a positive amplitude ratio")
    c = np.cos(TWO_PI * np.asarray(t, dtype=np.float64))
    return np.asarray(-c / signal.a), np.asarray(-c / (signal.a * signal.f**2))


def extremum_quadratic(signal: TwoToneSignal, t0: float) -> float:
    """a^2 f^2 y^2 + a (f^2 + 1) c y + c^2 with c = cos(2 pi t0), y = cos(2 pi f t0 + theta0).

    At an extremum the operator output equals 4 pi^2 times this value.
    """
    a, f = signal.a, signal.f
    c = float(np.cos(TWO_PI * t0))
    y = float(np.cos(TWO_PI * f * t0 + signal.theta0))
    return a * a * f * f * y * y + a * (f * f + 1.0) * c * y + c * c


class NegativityCheck(NamedTuple):
    by_quadratic: bool
    by_bounds: bool


def negativity_check(signal: TwoToneSignal, t0: float) -> NegativityCheck:
    """Both routes to "-x xddot <= 0" at an extremum t0."""
    _, xd, _ = evaluate(signal, t0)
    if abs(float(xd)) > BOUNDARY_TOL * TWO_PI * (1.0 + signal.a * signal.f):
        raise ValidationError(f"t0={t0} is not an extremum (xdot={float(xd):.3e})")
    q = extremum_quadratic(signal, t0)
    by_quadratic = q <= BOUNDARY_TOL
    if signal.a == 0.0:
        return NegativityCheck(by_quadratic, by_quadratic)

    a, f = signal.a, signal.f
    c = float(np.cos(TWO_PI * t0))
    # roots of the quadratic in y; the discriminant a^2 c^2 (f^2 - 1)^2 is never negative
    discriminant = (a * (f * f + 1.0) * c) ** 2 - 4.0 * (a * f) ** 2 * c * c
    if discriminant < 0.0:
        return NegativityCheck(by_quadratic, False)
    y_r, y_g = negativity_bounds(signal, t0)
    lo, hi = sorted((float(y_r), float(y_g)))
    y = float(np.cos(TWO_PI * f * t0 + signal.theta0))
    return NegativityCheck(by_quadratic, lo - BOUNDARY_TOL <= y <= hi + BOUNDARY_TOL)


def is_negative_at_extremum(signal: TwoToneSignal, t0: float) -> bool:
    """True iff the operator output is <= 0 at the extremum t0."""
    check = negativity_check(signal, t0)
    if check.by_quadratic != check.by_bounds:
        # only possible within the boundary tolerance; <= counts as negative
        logger.debug("negativity routes disagree at t0=%.12g (boundary case)", t0)
        return True
    return check.by_quadratic


def vulnerable_extrema(signal: TwoToneSignal, window: tuple[float, float]) -> list[Extremum]:
    """Positive minima and negative maxima, the extrema where negativity can occur."""
    return [
        e for e in find_extrema(signal, window)
        if (e.kind == "min" and e.x > 0) or (e.kind == "max" and e.x < 0)
    ]


@dataclass(frozen=True, eq=False)
class ExcursionStats:
    """Negative excursions of the operator output; durations of complete excursions only."""

    zero_crossing_rate: float
    durations: FloatArray
    intervals: list[tuple[float, float]]
    window: tuple[float, float]

    @property
    def count(self) -> int:
        return int(self.durations.size)

    @property
    def mean_negative_duration(self) -> float:
        return float(self.durations.mean()) if self.durations.size else 0.0

    def histogram(self, bins: Union[int, ArrayLike] = 20) -> tuple[FloatArray, FloatArray]:
        counts, edges = np.histogram(self.durations, bins=bins)
        return counts.astype(np.float64), edges


def _excursions(t: FloatArray, psi: FloatArray) -> ExcursionStats:
    negative = psi < 0.0
    change = np.flatnonzero(negative[1:] != negative[:-1])
    # linear interpolation of each crossing inside its grid cell
    t0, t1 = t[change], t[change + 1]
    p0, p1 = psi[change], psi[change + 1]
    crossings = t0 + (t1 - t0) * p0 / (p0 - p1)
    entering = negative[change + 1]

    intervals: list[tuple[float, float]] = []
    start: Optional[float] = None
    for time, enters in zip(crossings, entering):
        if enters:
            start = float(time)
        elif start is not None:
            intervals.append((start, float(time)))
            start = None
    span = float(t[-1] - t[0])
    durations = np.array([b - a for a, b in intervals], dtype=np.float64)
    return ExcursionStats(crossings.size / span, durations, intervals, (float(t[0]), float(t[-1])))


def negative_excursion_stats(
    source: Union[TwoToneSignal, SampledSignal],
    window: Optional[tuple[float, float]] = None,
    step: Optional[float] = None,
    refine: int = 8,
) -> ExcursionStats:
    """Zero-crossing rate and negative-excursion durations of xdot^2 - x xddot.

    Two-tone signals are evaluated analytically on a grid of the given step
    (at most 1/(64 f_fast)); sampled paths use interpolated derivatives at their own rate.
    """
    if isinstance(source, TwoToneSignal):
        if window is None:
            raise ValidationError("an analytic two-tone signal needs a window")
        limit = 1.0 / (_MIN_POINTS_PER_PERIOD * source.fastest)
        step = limit if step is None else step
        if not 0 < step <= limit * (1.0 + 1e-12):
            raise ValidationError(f"grid step must be in (0, {limit:.6g}]")
        n = int(np.floor((window[1] - window[0]) / step)) + 1
        if n < 2:
            raise ValidationError("window is shorter than one grid step")
        t = window[0] + step * np.arange(n)
        return _excursions(t, source.psi(t))

    dx = interpolate_derivative(source, refine)
    ddx = interpolate_derivative(dx, refine)
    offset = int(round((ddx.t0 - source.t0) * source.fs))
    inner = int(round((ddx.t0 - dx.t0) * source.fs))
    x = source.samples[offset:offset + len(ddx)]
    xd = dx.samples[inner:inner + len(ddx)]
    psi = xd**2 - x * ddx.samples
    t = ddx.times()
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, psi = t[keep], psi[keep]
    if t.size < 2:
        raise ValidationError("sampled path is too short after derivative trimming")
    return _excursions(t, psi)


def rayleigh_two_tone_paths(
    f: float, n_paths: int, sigma: float = 1.0, cfg: Optional[McConfig] = None
) -> list[TwoToneSignal]:
    """Random two-tone signals with a ~ Rayleigh(sigma) and theta0 ~ U(0, 2 pi).

    This reads a sinusoid in narrowband noise as a second tone of random amplitude
    and phase; it is an interpretation, not a derivation of the noisy case.
    """
    if n_paths < 1:
        raise ValidationError("n_paths must be at least 1")
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    seed = (cfg or McConfig()).seed
    paths = []
    for index in range(n_paths):
        rng = partition_rng(seed, index)
        paths.append(
            TwoToneSignal(float(rng.rayleigh(sigma)), f, float(rng.uniform(0.0, TWO_PI)))
        )
    return paths
