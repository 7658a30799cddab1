"""Seeded Monte Carlo oracle: quadratic-form samples, ratio histograms and stationary noise paths.

Every partition owns a counter-based generator keyed by (seed, partition index), so
results depend on (seed, n_partitions) only and not on how many threads ran them.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Optional, Sequence, TypeVar, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import stats

from tko_noise.config import get_default_seed, resolve_workers
from tko_noise.errors import PreconditionError, ValidationError
from tko_noise.gaussian_model import CovarianceKernel, GaussianVectorModel
from tko_noise.kernels import SampledSignal
from tko_noise.logs import get_logger

if TYPE_CHECKING:
    from tko_noise.ratio import RatioSpec

FloatArray = NDArray[np.float64]
T = TypeVar("T")

logger = get_logger("montecarlo")

MAX_PATH_SAMPLES = 10_000_000
MAX_CHOLESKY_SAMPLES = 10_000
_PILOT_SIZE = 10_000
_EMBEDDING_RTOL = 1e-10


class McConfig(BaseModel):
    """Monte Carlo settings; (seed, n_partitions) fixes every draw."""

    model_config = ConfigDict(frozen=True)

    seed: int = Field(default_factory=get_default_seed, ge=0, lt=2**64)
    n_samples: int = Field(default=100_000, ge=4)
    n_partitions: int = Field(default=16, ge=1)
    bins: Optional[int] = Field(default=None, ge=1)
    edges: Optional[tuple[float, ...]] = None

    @field_validator("edges")
    @classmethod
    def _edges_increasing(cls, v: Optional[tuple[float, ...]]) -> Optional[tuple[float, ...]]:
        if v is not None and (len(v) < 2 or np.any(np.diff(v) <= 0)):
            raise ValueError("histogram edges must be strictly increasing with at least 2 entries")
        return v

    def partition_sizes(self) -> list[int]:
        base, extra = divmod(self.n_samples, self.n_partitions)
        return [base + (1 if i < extra else 0) for i in range(self.n_partitions)]

    def with_samples(self, n_samples: int) -> "McConfig":
        return self.model_copy(update={"n_samples": n_samples})


def partition_rng(seed: int, index: int) -> np.random.Generator:
    """Philox generator for one partition, independent of every other index."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(sequence))


def _map_partitions(work: Callable[[int, int], T], cfg: McConfig) -> list[T]:
    """Run work(index, size) for every partition; results come back in partition order."""
    sizes = cfg.partition_sizes()
    workers = min(resolve_workers(), cfg.n_partitions)
    logger.info(
        "running %d samples in %d partitions on %d workers",
        cfg.n_samples, cfg.n_partitions, workers,
    )
    if workers == 1:
        return [work(i, n) for i, n in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, range(cfg.n_partitions), sizes))


def draw_quadforms(
    model: GaussianVectorModel, forms: Sequence[ArrayLike], cfg: McConfig
) -> list[FloatArray]:
    """Joint draws of X'J_k X for every J_k.

    One array per partition, in partition order, each of shape (size, len(forms)).
    """
    Js = [np.asarray(J, dtype=np.float64) for J in forms]
    for J in Js:
        if J.shape != (model.dim, model.dim):
            raise ValidationError(f"form of shape {J.shape} does not match dimension {model.dim}")

    def work(index: int, size: int) -> FloatArray:
        rng = partition_rng(cfg.seed, index)
        X = model.mu + rng.standard_normal((size, model.dim)) @ model.L.T
        return np.stack([np.einsum("ni,ij,nj->n", X, J, X) for J in Js], axis=1)

    return _map_partitions(work, cfg)


def _histogram_edges(values: FloatArray, cfg: McConfig, trim: float = 0.0) -> FloatArray:
    if cfg.edges is not None:
        return np.asarray(cfg.edges, dtype=np.float64)
    pilot = values[:_PILOT_SIZE]
    lo, hi = np.quantile(pilot, [trim, 1.0 - trim]) if trim > 0 else (pilot.min(), pilot.max())
    if not hi > lo:
        hi = lo + 1.0
    if cfg.bins is not None:
        return np.histogram_bin_edges(pilot, bins=cfg.bins, range=(lo, hi))
    return np.histogram_bin_edges(pilot, bins="fd", range=(lo, hi))


def _kstats(values: FloatArray) -> FloatArray:
    return np.array([stats.kstat(values, n) for n in range(1, 5)])


@dataclass(frozen=True, eq=False)
class Histogram:
    """Density histogram with the binomial standard error of every cell."""

    edges: FloatArray
    density: FloatArray
    cell_se: FloatArray
    count: int

    @classmethod
    def from_values(cls, values: FloatArray, edges: FloatArray) -> "Histogram":
        counts, _ = np.histogram(values, bins=edges)
        n = max(values.size, 1)
        widths = np.diff(edges)
        p = counts / n
        return cls(edges, p / widths, np.sqrt(p * (1.0 - p) / n) / widths, int(values.size))

    @property
    def centers(self) -> FloatArray:
        return np.asarray((self.edges[1:] + self.edges[:-1]) / 2.0)

    def l1_distance(self, pdf: Union[Callable[[FloatArray], FloatArray], ArrayLike]) -> float:
        """sum |h - f(center)| * width over the histogram cells."""
        reference = pdf(self.centers) if callable(pdf) else np.asarray(pdf, dtype=np.float64)
        return float(np.sum(np.abs(self.density - reference) * np.diff(self.edges)))


@dataclass(frozen=True, eq=False)
class QuadformSample:
    """k-statistics k1..k4 with delete-one-partition jackknife standard errors."""

    values: FloatArray
    kstats: FloatArray
    kstat_se: FloatArray
    histogram: Histogram

    @property
    def mean(self) -> float:
        return float(self.kstats[0])

    @property
    def variance(self) -> float:
        return float(self.kstats[1])

    def z_scores(self, kappa: ArrayLike) -> FloatArray:
        """(k_s - kappa_s) / se_s for the first four analytic cumulants."""
        reference = np.asarray(kappa, dtype=np.float64)[:4]
        return np.asarray((self.kstats - reference) / self.kstat_se)


def _jackknife_se(
    parts: list[FloatArray], estimator: Callable[[FloatArray], FloatArray]
) -> FloatArray:
    g = len(parts)
    if g < 2:
        return np.full(4, np.nan)
    leave_out = np.array(
        [estimator(np.concatenate(parts[:i] + parts[i + 1:])) for i in range(g)]
    )
    spread = leave_out - leave_out.mean(axis=0)
    return np.asarray(np.sqrt((g - 1) / g * np.sum(spread**2, axis=0)))


def sample_quadform(model: GaussianVectorModel, J: ArrayLike, cfg: McConfig) -> QuadformSample:
    """Draw X ~ N(mu, M), evaluate X'JX; k-statistics, jackknife errors and a histogram."""
    parts = [block[:, 0] for block in draw_quadforms(model, [J], cfg)]
    values = np.concatenate(parts)
    histogram = Histogram.from_values(values, _histogram_edges(values, cfg))
    return QuadformSample(values, _kstats(values), _jackknife_se(parts, _kstats), histogram)


@dataclass(frozen=True, eq=False)
class RatioSample:
    """Accepted ratios V1/V2 (V1^2/V2 in numerator-squared mode) and the acceptance rate."""

    ratios: FloatArray
    acceptance: float
    acceptance_se: float
    histogram: Histogram
    n_drawn: int

    def peak_relative_se(self) -> float:
        peak = float(self.histogram.density.max())
        return float(self.histogram.cell_se.max() / peak) if peak > 0 else float("inf")


def sample_ratio(spec: "RatioSpec", cfg: McConfig, condition: bool = True) -> RatioSample:
    """Joint draws of (V1, V2), keeping the ratio where V2 exceeds the threshold.

    Without a threshold (or with condition=False) only V2 > 0 is required.
    """
    threshold = spec.threshold if (condition and spec.threshold is not None) else 0.0
    blocks = draw_quadforms(spec.model, [spec.J_num, spec.J_den], cfg)
    drawn = np.concatenate(blocks)
    v1, v2 = drawn[:, 0], drawn[:, 1]
    if spec.numerator_squared:
        v1 = v1**2
    keep = v2 > threshold
    accepted = int(np.count_nonzero(keep))
    if accepted == 0:
        raise PreconditionError(
            f"no sample has a denominator above {threshold:g} out of {v2.size}", 0.0
        )
    ratios = v1[keep] / v2[keep]
    rate = accepted / v2.size
    logger.info("ratio sampling: acceptance %.4f (%d of %d)", rate, accepted, v2.size)
    histogram = Histogram.from_values(ratios, _histogram_edges(ratios, cfg, trim=0.005))
    return RatioSample(
        ratios, rate, float(np.sqrt(rate * (1.0 - rate) / v2.size)), histogram, int(v2.size)
    )


def _embedding_eigenvalues(row: FloatArray) -> Optional[FloatArray]:
    eig = np.fft.fft(row).real
    floor = -_EMBEDDING_RTOL * eig.max()
    if eig.min() < floor:
        return None
    return np.asarray(np.clip(eig, 0.0, None))


def sample_noise_path(
    covariance: CovarianceKernel,
    duration: float,
    fs: float,
    cfg: McConfig,
    index: int = 0,
) -> SampledSignal:
    """Stationary zero-mean Gaussian path with covariance R(dt), sampled at fs.

    Uses circulant embedding of the sampled covariance; when the embedding is not
    nonnegative definite it falls back to a dense Cholesky factor (at most
    10^4 samples). index selects an independent path for the same seed.
    """
    if not fs > 0 or not duration > 0:
        raise ValidationError("duration and fs must be positive")
    n = int(round(duration * fs))
    if n > MAX_PATH_SAMPLES:
        raise ValidationError(f"path of {n} samples exceeds the {MAX_PATH_SAMPLES} sample limit")
    if n < 2:
        raise ValidationError("path must have at least 2 samples")
    rng = partition_rng(cfg.seed, index)

    m = 2 * (n - 1)
    lags = np.minimum(np.arange(m), m - np.arange(m)) / fs
    eig = _embedding_eigenvalues(covariance(lags))
    if eig is not None:
        z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        path = np.fft.fft(z * np.sqrt(eig / m)).real[:n]
        return SampledSignal(path, fs)

    if n > MAX_CHOLESKY_SAMPLES:
        raise ValidationError(
            f"circulant embedding is not nonnegative definite and {n} samples is too many "
            "for the dense fallback"
        )
    logger.warning(
        "circulant embedding not nonnegative definite; using dense Cholesky for %d samples", n
    )
    t = np.arange(n) / fs
    dense = covariance(t[:, None] - t[None, :]) + 1e-12 * covariance.scale * np.eye(n)
    L = np.linalg.cholesky(dense)
    return SampledSignal(L @ rng.standard_normal(n), fs)
