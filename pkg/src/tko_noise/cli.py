"""Command-line front end: one subcommand per experiment, CSV or JSON output.

Exit codes: 0 success, 2 usage or validation error, 3 numerical non-convergence or
an unmet statistical precondition.
"""

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Callable, Literal, Optional, Sequence

import numpy as np
import pydantic
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from tko_noise.config import get_default_seed, get_output_format
from tko_noise.errors import ConvergenceError, PreconditionError, TkoError, ValidationError
from tko_noise.esa import binomial_filter, esa_demodulate, positivity_report
from tko_noise.gaussian_model import (
    CovarianceKernel,
    GaussianVectorModel,
    ToneSet,
    decompose,
    output_snr_db,
    snr_to_scale,
    tone_model,
)
from tko_noise.kernels import OperatorKernel, SampledSignal, discriminator_extrema, freq_response
from tko_noise.logs import get_logger, setup_logging
from tko_noise.montecarlo import McConfig, sample_noise_path, sample_quadform
from tko_noise.output import (
    Report,
    Table,
    atomic_write,
    make_report,
    report_schema,
    write_report,
)
from tko_noise.quadform import (
    ChfEvaluator,
    DensityGrid,
    cdf_grid,
    cumulants,
    cumulants_diagonal,
    make_density_grid,
    mixture_cumulants,
    pdf_numeric,
)
from tko_noise.ratio import (
    RatioSpec,
    envelope_ratio_pdf,
    envelope_squared_spec,
    if_squared_spec,
    iq_correlator_ratios,
    iq_model,
    ratio_grid,
    ratio_pdf_conditioned,
    ratio_pdf_geary,
)
from tko_noise.two_tone import (
    TwoToneSignal,
    derivative_components,
    find_extrema,
    is_negative_at_extremum,
    negative_excursion_stats,
    negativity_bounds,
)

FloatArray = NDArray[np.float64]

logger = get_logger("cli")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class ExperimentConfig(BaseModel):
    """Validated flag set of one invocation; echoed into every report."""

    model_config = ConfigDict(extra="ignore", frozen=True)

    command: str
    p: int = Field(default=0, ge=0)
    q: int = Field(default=1, ge=1)
    T: float = Field(default=1.0, gt=0)
    c: float = Field(default=0.5, gt=0)
    snr_db: float = 17.0
    noise_only: bool = False
    amplitude: float = Field(default=1.0, gt=0)
    omega: float = Field(default=0.3, gt=0)
    center_time: float = 0.0
    cycle_points: int = Field(default=1, ge=1)
    points: int = Field(default=201, ge=2)
    variant: Literal["real", "narrowband"] = "real"
    omega_min: float = 0.0
    omega_max: float = float(np.pi)
    kind: Literal["if", "envelope"] = "if"
    method: Literal["auto", "geary", "conditioned"] = "auto"
    threshold: Optional[float] = Field(default=None, ge=0)
    threshold_dx: Optional[float] = Field(default=None, ge=0)
    threshold_fraction: Optional[float] = Field(default=None, gt=0)
    spread: float = Field(default=4.0, gt=1)
    phase_difference: float = 0.3
    rho: float = Field(default=0.0, gt=-1, lt=1)
    a: float = Field(default=0.6, ge=0)
    f: float = Field(default=2.3, gt=0)
    theta0: float = 0.0
    t_start: float = 0.0
    t_end: float = 3.0
    step: Optional[float] = Field(default=None, gt=0)
    input: Optional[Path] = None
    fs: float = Field(default=1.0, gt=0)
    length: int = Field(default=4096, ge=64)
    refine: int = Field(default=8, ge=2)
    filter: bool = True
    validate_mc: bool = False
    n_samples: int = Field(default=100_000, ge=4)
    n_partitions: int = Field(default=16, ge=1)
    seed: int = Field(default_factory=get_default_seed, ge=0)
    format: Literal["csv", "json"] = "csv"
    output: Optional[Path] = None

    @model_validator(mode="after")
    def _check_delays(self) -> "ExperimentConfig":
        if self.p >= self.q:
            raise ValueError(f"delays must satisfy p < q, got p={self.p}, q={self.q}")
        if self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")
        return self

    def kernel(self) -> OperatorKernel:
        return OperatorKernel(self.p, self.q, self.T)

    def tone(self) -> ToneSet:
        return ToneSet.tone(self.amplitude, self.omega)

    def covariance(self) -> CovarianceKernel:
        """Noise power from the input SNR; signal power is that of the tone, a^2/2."""
        return CovarianceKernel(self.c, snr_to_scale(self.snr_db, self.tone().power))

    def mc(self) -> McConfig:
        return McConfig(seed=self.seed, n_samples=self.n_samples, n_partitions=self.n_partitions)

    def echo(self) -> dict[str, Any]:
        return self.model_dump(mode="json", exclude={"output", "format"})


def _tone_model(cfg: ExperimentConfig, center_time: Optional[float] = None) -> GaussianVectorModel:
    at = cfg.center_time if center_time is None else center_time
    model = tone_model(cfg.kernel(), cfg.covariance(), cfg.tone(), at)
    return model.noise_only() if cfg.noise_only else model


def _cycle_models(cfg: ExperimentConfig) -> list[GaussianVectorModel]:
    """Models at cycle_points center times evenly spread over one period of the tone."""
    if cfg.cycle_points == 1 or cfg.noise_only:
        return [_tone_model(cfg)]
    period = 2.0 * np.pi / cfg.omega
    times = cfg.center_time + period * np.arange(cfg.cycle_points) / cfg.cycle_points
    return [_tone_model(cfg, float(t)) for t in times]


def cmd_freq_response(cfg: ExperimentConfig) -> Report:
    kernel = cfg.kernel()
    omega = np.linspace(cfg.omega_min, cfg.omega_max, cfg.points)
    table = Table.from_columns(
        "freq_response",
        {"omega [rad/s]": omega, "response [1]": freq_response(kernel, omega)},
    )
    summary: dict[str, Any] = {"kernel": kernel.label()}
    if kernel.p > 0:
        summary["extrema [rad/s]"] = discriminator_extrema(kernel, (cfg.omega_min, cfg.omega_max))
    return make_report("freq-response", cfg.echo(), [table], summary)


def _pdf_grid(evaluator: ChfEvaluator, kappa1: float, kappa2: float, points: int) -> FloatArray:
    half = 6.0 * np.sqrt(kappa2)
    lo, hi = kappa1 - half, kappa1 + half
    if np.all(evaluator.decomposition.lambdas >= 0):
        lo = max(lo, 0.0)
    return np.linspace(lo, hi, points)


def _moment_summary(cfg: ExperimentConfig, models: list[GaussianVectorModel]) -> dict[str, Any]:
    kernel = cfg.kernel()
    model = models[0]
    decomp = decompose(model, kernel.J)
    stats = mixture_cumulants([cumulants(m.mu, m.M, kernel.J, s_max=4) for m in models])
    noise = cumulants(np.zeros(model.dim), model.M, kernel.J, s_max=4)
    summary: dict[str, Any] = {
        "kernel": kernel.label(),
        "noise_power": model.N0,
        "eigenvalues": decomp.lambdas,
        "kappa": stats.kappa,
        "rho3": stats.skewness,
        "rho4": stats.kurtosis,
    }
    if len(models) == 1:
        summary["noncentralities"] = decomp.s
    else:
        summary["cycle_points"] = len(models)
    if noise.mean > 0:
        summary["output_snr_db"] = output_snr_db(stats.mean, noise.mean)
    return summary


def _validation(
    cfg: ExperimentConfig, model: GaussianVectorModel, J: FloatArray, grid: DensityGrid
) -> dict[str, Any]:
    sample = sample_quadform(model, J, cfg.mc())
    reference = np.interp(sample.histogram.centers, grid.values, grid.pdf, left=0.0, right=0.0)
    kappa = cumulants(model.mu, model.M, J, s_max=4).kappa
    return {
        "l1_distance": sample.histogram.l1_distance(reference),
        "kstats": sample.kstats,
        "kstat_se": sample.kstat_se,
        "z_scores": sample.z_scores(kappa),
        "n_samples": cfg.n_samples,
    }


def _evaluators(cfg: ExperimentConfig, models: list[GaussianVectorModel]) -> list[ChfEvaluator]:
    J = cfg.kernel().J
    return [ChfEvaluator.from_model(m, J, variant=cfg.variant) for m in models]


def _value_grid(cfg: ExperimentConfig, evaluators: list[ChfEvaluator]) -> FloatArray:
    stats = mixture_cumulants(
        [cumulants_diagonal(ev.decomposition, 2, cfg.variant) for ev in evaluators]
    )
    return _pdf_grid(evaluators[0], stats.mean, stats.variance, cfg.points)


def _mixture_density(values: FloatArray, evaluators: list[ChfEvaluator]) -> DensityGrid:
    """Equal-weight mixture of the per-time densities; a failed point fails the mixture."""
    parts = []
    for evaluator in evaluators:
        grid = pdf_numeric(values, evaluator)
        failed = np.isin(values, grid.meta["failed_at"])
        parts.append(np.where(failed, np.nan, grid.pdf))
    return make_density_grid(
        values,
        np.mean(parts, axis=0),
        method="inversion",
        variant=evaluators[0].variant,
        cycle_points=len(evaluators),
    )


def cmd_pdf(cfg: ExperimentConfig) -> Report:
    if cfg.validate_mc and cfg.cycle_points > 1:
        raise ValidationError("--validate compares a single center time; drop --cycle-points")
    models = _cycle_models(cfg)
    evaluators = _evaluators(cfg, models)
    grid = _mixture_density(_value_grid(cfg, evaluators), evaluators)
    n0 = models[0].N0
    table = Table.from_columns(
        "pdf", {"v_over_N0 [1]": grid.values / n0, "pdf_times_N0 [1]": grid.pdf * n0}
    )
    summary = _moment_summary(cfg, models)
    summary["density"] = grid.meta
    if cfg.validate_mc and cfg.variant == "real":
        summary["validation"] = _validation(cfg, models[0], cfg.kernel().J, grid)
    return make_report("pdf", cfg.echo(), [table], summary, cfg.seed, grid.meta["status"])


def cmd_cdf(cfg: ExperimentConfig) -> Report:
    models = _cycle_models(cfg)
    evaluators = _evaluators(cfg, models)
    values = _value_grid(cfg, evaluators)
    cdf = np.mean([cdf_grid(values, ev) for ev in evaluators], axis=0)
    table = Table.from_columns(
        "cdf", {"v_over_N0 [1]": values / models[0].N0, "cdf [1]": cdf}
    )
    return make_report("cdf", cfg.echo(), [table], _moment_summary(cfg, models))


def cmd_cumulants(cfg: ExperimentConfig) -> Report:
    models = _cycle_models(cfg)
    J = cfg.kernel().J
    stats = mixture_cumulants([cumulants(m.mu, m.M, J, s_max=8) for m in models])
    rho = np.concatenate([[np.nan, np.nan], stats.rho])
    table = Table.from_columns(
        "cumulants", {"order": np.arange(1, 9), "kappa": stats.kappa, "rho": rho}
    )
    return make_report("cumulants", cfg.echo(), [table], _moment_summary(cfg, models))


def _ratio_spec(cfg: ExperimentConfig) -> RatioSpec:
    build = if_squared_spec if cfg.kind == "if" else envelope_squared_spec
    spec = build(cfg.kernel(), cfg.covariance(), cfg.tone(), cfg.center_time)
    if cfg.noise_only:
        spec = RatioSpec(
            spec.J_num, spec.J_den, spec.model.noise_only(), None, spec.numerator_squared
        )
    if cfg.threshold is not None:
        return spec.with_threshold(cfg.threshold)
    if cfg.threshold_fraction is not None:
        return spec.with_threshold(cfg.threshold_fraction * spec.denominator_mean())
    return spec


def _grid_summary(grid: DensityGrid) -> dict[str, Any]:
    return {
        "iqr": grid.quantile(0.75) - grid.quantile(0.25),
        "median": grid.quantile(0.5),
        "mode": float(grid.values[int(np.argmax(grid.pdf))]),
        "density": grid.meta,
    }


def cmd_ratio(cfg: ExperimentConfig) -> Report:
    spec = _ratio_spec(cfg)
    center = None if cfg.noise_only else spec.noiseless_ratio()
    r = ratio_grid(cfg.points, center, cfg.spread)
    method = cfg.method
    if method == "auto":
        method = "conditioned" if spec.threshold else "geary"
    if spec.numerator_squared:
        grid = envelope_ratio_pdf(r, spec, cfg.mc())
    elif method == "geary":
        grid = ratio_pdf_geary(r, spec)
    else:
        grid = ratio_pdf_conditioned(r, spec, cfg.mc())
    table = Table.from_columns("ratio", {"r [1]": r, "pdf [1]": grid.pdf})
    summary = _grid_summary(grid)
    summary.update(
        {"noiseless_ratio": center, "threshold": spec.threshold, "method": grid.meta["method"]}
    )
    return make_report("ratio", cfg.echo(), [table], summary, cfg.seed, grid.meta["status"])


def cmd_iq(cfg: ExperimentConfig) -> Report:
    model = iq_model(cfg.snr_db, cfg.phase_difference, cfg.rho)
    sine_center = np.sin(cfg.phase_difference)
    tangent_center = np.tan(cfg.phase_difference)
    sine_r = np.linspace(sine_center - 1.5, sine_center + 1.5, cfg.points)
    tangent_r = np.linspace(tangent_center - 1.5, tangent_center + 1.5, cfg.points)
    ratios = iq_correlator_ratios(model, sine_r, tangent_r, cfg.threshold, cfg.mc())
    tables = [
        Table.from_columns("sine", {"r [1]": sine_r, "pdf [1]": ratios.sine.pdf}),
        Table.from_columns("tangent", {"r [1]": tangent_r, "pdf [1]": ratios.tangent.pdf}),
    ]
    summary = {
        "sine_variance": ratios.sine.variance(),
        "tangent_variance": ratios.tangent.variance(),
        "sine": ratios.sine.meta,
        "tangent": ratios.tangent.meta,
    }
    return make_report("iq", cfg.echo(), tables, summary, cfg.seed)


def cmd_two_tone(cfg: ExperimentConfig) -> Report:
    signal = TwoToneSignal(cfg.a, cfg.f, cfg.theta0)
    window = (cfg.t_start, cfg.t_end)
    stats = negative_excursion_stats(signal, window, cfg.step)
    t = np.linspace(cfg.t_start, cfg.t_end, cfg.points)
    columns: dict[str, Any] = {
        "t [1/f1]": t,
        "x [1]": signal.x(t),
        "psi [1]": signal.psi(t),
        "second_tone_cos [1]": np.cos(2.0 * np.pi * cfg.f * t + cfg.theta0),
    }
    columns["M1 [1/f1]"], columns["M2 [1/f1]"] = derivative_components(signal, t)
    if cfg.a > 0:
        y_r, y_g = negativity_bounds(signal, t)
        columns["y_R [1]"] = y_r
        columns["y_G [1]"] = y_g
    extrema = find_extrema(signal, window)
    tables = [
        Table.from_columns("signal", columns),
        Table.from_columns(
            "extrema",
            {
                "t [1/f1]": [e.t for e in extrema],
                "kind": [e.kind for e in extrema],
                "x [1]": [e.x for e in extrema],
                "negative": [is_negative_at_extremum(signal, e.t) for e in extrema],
            },
        ),
        Table.from_columns(
            "negative_intervals",
            {
                "start [1/f1]": [a for a, _ in stats.intervals],
                "end [1/f1]": [b for _, b in stats.intervals],
                "duration [1/f1]": stats.durations,
            },
        ),
    ]
    summary = {
        "zero_crossing_rate": stats.zero_crossing_rate,
        "negative_excursions": stats.count,
        "mean_negative_duration": stats.mean_negative_duration,
    }
    return make_report("two-tone", cfg.echo(), tables, summary)


def read_signal_file(path: Path, fs: float) -> SampledSignal:
    """Single-column CSV of samples; a non-numeric first row is taken as a header."""
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as f:
        for i, row in enumerate(csv.reader(f)):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError as e:
                if i == 0:
                    continue
                raise ValidationError(f"{path}: row {i + 1} is not a number: {row[0]!r}") from e
    return SampledSignal(np.asarray(values), fs)


def _esa_input(cfg: ExperimentConfig) -> SampledSignal:
    if cfg.input is not None:
        return read_signal_file(cfg.input, cfg.fs)
    t = np.arange(cfg.length) / cfg.fs
    clean = cfg.tone()(t)
    if np.isinf(cfg.snr_db):
        return SampledSignal(clean, cfg.fs)
    noise = sample_noise_path(cfg.covariance(), cfg.length / cfg.fs, cfg.fs, cfg.mc())
    return SampledSignal(clean + noise.samples, cfg.fs)


def _pad(values: FloatArray, length: int) -> FloatArray:
    """Centre a shorter (edge-trimmed) sequence in a NaN array of the given length."""
    out = np.full(length, np.nan)
    start = (length - values.size) // 2
    out[start:start + values.size] = values
    return out


def _esa_thresholds(
    cfg: ExperimentConfig, signal: SampledSignal, kernel: OperatorKernel
) -> tuple[float, float]:
    """Gates for Psi[x] and Psi[xdot], each scaled to its own operand.

    Psi[xdot] is about omega^2 times Psi[x], so a missing gate is taken as 0.1 of
    that operand's median output, and a lone --threshold is carried over to
    Psi[xdot] by the ratio of the medians.
    """
    if cfg.threshold is not None and cfg.threshold_dx is not None:
        return cfg.threshold, cfg.threshold_dx
    ungated = esa_demodulate(signal, kernel, 0.0, cfg.refine)
    median_x = max(float(np.median(ungated.psi_x)), 0.0)
    median_dx = max(float(np.median(ungated.psi_dx)), 0.0)
    threshold = 0.1 * median_x if cfg.threshold is None else cfg.threshold
    if cfg.threshold_dx is not None:
        return threshold, cfg.threshold_dx
    if cfg.threshold is None:
        return threshold, 0.1 * median_dx
    if median_x == 0.0:
        return threshold, threshold
    return threshold, threshold * median_dx / median_x


def cmd_esa(cfg: ExperimentConfig) -> Report:
    signal = _esa_input(cfg)
    kernel = cfg.kernel()
    threshold, threshold_dx = _esa_thresholds(cfg, signal, kernel)
    estimate = esa_demodulate(signal, kernel, threshold, cfg.refine, threshold_dx)
    columns: dict[str, Any] = {
        "t [s]": estimate.times,
        "omega_sq [rad^2/s^2]": estimate.omega_sq,
        "amp_sq [1]": estimate.amp_sq,
        "valid": estimate.valid_mask,
        "psi_x [1/s^2]": estimate.psi_x,
        "psi_dx [1/s^4]": estimate.psi_dx,
    }
    summary: dict[str, Any] = {
        "threshold": threshold,
        "threshold_dx": threshold_dx,
        "valid_fraction": estimate.valid_fraction,
        "median_omega_sq": float(np.nanmedian(estimate.omega_sq))
        if estimate.valid_mask.any() else None,
        "median_amp_sq": float(np.nanmedian(estimate.amp_sq))
        if estimate.valid_mask.any() else None,
    }
    if cfg.filter:
        filtered = binomial_filter(estimate.psi_dx)
        columns["psi_dx_filtered [1/s^4]"] = _pad(filtered, estimate.psi_dx.size)
        report = positivity_report(estimate.psi_dx, filtered)
        summary["frac_neg_before"] = report.frac_neg_before
        summary["frac_neg_after"] = report.frac_neg_after
    table = Table.from_columns("esa", columns)
    return make_report("esa", cfg.echo(), [table], summary, cfg.seed)


COMMANDS: dict[str, Callable[[ExperimentConfig], Report]] = {
    "freq-response": cmd_freq_response,
    "pdf": cmd_pdf,
    "cdf": cmd_cdf,
    "cumulants": cmd_cumulants,
    "ratio": cmd_ratio,
    "iq": cmd_iq,
    "two-tone": cmd_two_tone,
    "esa": cmd_esa,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["csv", "json"], default=get_output_format())
    p.add_argument("--output", type=Path, default=None, help="output file (stdout if omitted)")
    p.add_argument("--seed", type=int, default=get_default_seed())
    p.add_argument("--log-level", default=None)


def _add_kernel(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=int, default=0)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--T", type=float, default=1.0, help="sampling interval")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c", type=float, default=0.5, help="noise covariance decay exp(-c t^2)")
    p.add_argument("--snr-db", type=float, default=17.0)
    p.add_argument("--noise-only", action="store_true")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=0.3, help="tone frequency [rad/s]")
    p.add_argument("--center-time", type=float, default=0.0)


def _add_mc(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-samples", type=int, default=100_000)
    p.add_argument("--n-partitions", type=int, default=16)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tko-noise",
        description="Distributions of Teager-Kaiser operator outputs in Gaussian noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("freq-response", help="frequency response of Psi_p^q")
    _add_kernel(p)
    p.add_argument("--omega-min", type=float, default=0.0)
    p.add_argument("--omega-max", type=float, default=float(np.pi))
    p.add_argument("--points", type=int, default=512)
    _add_common(p)

    for name, help_text in (
        ("pdf", "density of the operator output"),
        ("cdf", "distribution function of the operator output"),
        ("cumulants", "cumulants, eigenvalues and output SNR"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_kernel(p)
        _add_model(p)
        p.add_argument("--points", type=int, default=201)
        p.add_argument("--variant", choices=["real", "narrowband"], default="real")
        p.add_argument("--cycle-points", type=int, default=1,
                       help="average over this many center times spanning one tone period")
        if name == "pdf":
            p.add_argument("--validate", dest="validate_mc", action="store_true")
            _add_mc(p)
        _add_common(p)

    p = sub.add_parser("ratio", help="IF-squared or envelope-squared ratio density")
    _add_kernel(p)
    _add_model(p)
    p.add_argument("--kind", choices=["if", "envelope"], default="if")
    p.add_argument("--method", choices=["auto", "geary", "conditioned"], default="auto")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--threshold-fraction", type=float, default=None,
                   help="threshold as a fraction of the denominator mean")
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--spread", type=float, default=4.0)
    _add_mc(p)
    _add_common(p)

    p = sub.add_parser("iq", help="I/Q sine and tangent correlator ratios")
    p.add_argument("--snr-db", type=float, default=9.04)
    p.add_argument("--phase-difference", type=float, default=0.3)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--points", type=int, default=201)
    _add_mc(p)
    _add_common(p)

    p = sub.add_parser("two-tone", help="two-sinusoid negativity analysis")
    p.add_argument("--a", type=float, default=0.6)
    p.add_argument("--f", type=float, default=2.3)
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--t-start", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=3.0)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--points", type=int, default=2001)
    _add_common(p)

    p = sub.add_parser("esa", help="energy separation demodulation with post-filtering")
    _add_kernel(p)
    _add_model(p)
    p.add_argument("--input", type=Path, default=None, help="single-column CSV of samples")
    p.add_argument("--fs", type=float, default=1.0)
    p.add_argument("--length", type=int, default=4096)
    p.add_argument("--refine", type=int, default=8)
    p.add_argument("--threshold", type=float, default=None, help="gate on Psi[x]")
    p.add_argument("--threshold-dx", type=float, default=None, help="gate on Psi[xdot]")
    p.add_argument("--no-filter", dest="filter", action="store_false")
    _add_mc(p)
    _add_common(p)

    p = sub.add_parser("schema", help="JSON schema of the report document")
    p.add_argument("--output", type=Path, default=None)
    p.add_argument("--log-level", default=None)
    return parser


def failed_abscissae(report: Report) -> list[float]:
    """Grid points where a tabulated density's quadrature did not converge."""
    failed: list[float] = []
    for value in report.summary.values():
        if isinstance(value, dict):
            failed.extend(v for v in value.get("failed_at", []) if v is not None)
    return sorted(failed)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the tko-noise command."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    if args.command == "schema":
        text = json.dumps(report_schema(), indent=2, sort_keys=True) + "\n"
        if args.output is None:
            sys.stdout.write(text)
        else:
            atomic_write(args.output, text)
        return EXIT_OK

    try:
        cfg = ExperimentConfig.model_validate(vars(args))
        logger.info("running %s", cfg.command)
        report = COMMANDS[cfg.command](cfg)
        write_report(report, cfg.format, cfg.output)
    except (ValidationError, pydantic.ValidationError) as e:
        print(f"[tko-noise] error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except PreconditionError as e:
        hint = " (try --threshold)" if args.command == "ratio" else ""
        print(f"[tko-noise] precondition failed: {e}{hint}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConvergenceError as e:
        print(f"[tko-noise] numerical failure: {e}", file=sys.stderr)
        if e.error_estimate is not None:
            print(f"[tko-noise] error estimate: {e.error_estimate:.3e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TkoError as e:
        print(f"[tko-noise] error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    failed = failed_abscissae(report)
    if failed:
        shown = ", ".join(f"{v:g}" for v in failed[:10])
        more = f" and {len(failed) - 10} more" if len(failed) > 10 else ""
        print(
            f"[tko-noise] numerical failure: quadrature did not converge at "
            f"{len(failed)} grid point(s): {shown}{more}",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    logger.info("finished %s", cfg.command)
    return EXIT_OK
