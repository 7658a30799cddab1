"""Tests for the two-sinusoid analysis: extrema, negativity and excursions."""

import numpy as np
import pytest

from tko_noise.errors import ValidationError
from tko_noise.kernels import SampledSignal
from tko_noise.montecarlo import McConfig
from tko_noise.two_tone import (
    TwoToneSignal,
    derivative_components,
    evaluate,
    extremum_quadratic,
    find_extrema,
    is_negative_at_extremum,
    negative_excursion_stats,
    negativity_bounds,
    negativity_check,
    rayleigh_two_tone_paths,
    vulnerable_extrema,
)

# x = cos(2 pi t) - 0.5 cos(6 pi t): positive minimum at t = 0, negative maximum at t = 1/2
DIPPING = TwoToneSignal(a=0.5, f=3.0, theta0=np.pi)


def boundary_signal(t0=0.1, f=2.0):
    """Signal with an extremum at t0 where x(t0) = 0, so the output is exactly 0 there."""
    c, s = np.cos(2 * np.pi * t0), np.sin(2 * np.pi * t0)
    a = np.sqrt(c**2 + s**2 / f**2)
    theta0 = np.arctan2(-s / (a * f), -c / a) - 2 * np.pi * f * t0
    return TwoToneSignal(a, f, theta0)


class TestTwoToneSignal:
    def test_rejects_bad_parameters(self):
        """Test negative amplitude ratio and nonpositive frequency ratio are rejected."""
        with pytest.raises(ValidationError):
            TwoToneSignal(-0.1, 2.0)
        with pytest.raises(ValidationError):
            TwoToneSignal(0.5, 0.0)

    def test_single_tone_output_is_constant(self):
        """Test a = 0 gives xdot^2 - x xddot = 4 pi^2."""
        t = np.linspace(0, 1, 17)
        assert np.allclose(TwoToneSignal(0.0, 2.0).psi(t), 4 * np.pi**2)

    def test_derivatives(self):
        """Test evaluate against finite differences."""
        signal = TwoToneSignal(0.7, 2.5, 0.3)
        t = np.linspace(0, 2, 9)
        h = 1e-6
        x, xd, xdd = evaluate(signal, t)
        assert np.allclose(xd, (signal.x(t + h) - signal.x(t - h)) / (2 * h), atol=1e-6)
        xd_plus = evaluate(signal, t + h)[1]
        xd_minus = evaluate(signal, t - h)[1]
        assert np.allclose(xdd, (xd_plus - xd_minus) / (2 * h), atol=1e-5)


class TestExtrema:
    def test_single_tone_extrema(self):
        """Test cos(2 pi t) has a minimum at 1/2 and a maximum at 1."""
        extrema = find_extrema(TwoToneSignal(0.0, 2.0), (0.1, 1.1))
        assert [e.kind for e in extrema] == ["min", "max"]
        assert extrema[0].t == pytest.approx(0.5, abs=1e-10)
        assert extrema[1].x == pytest.approx(1.0)

    def test_extrema_are_roots_of_derivative(self):
        """Test every reported extremum has xdot = 0."""
        for e in find_extrema(DIPPING, (0.0, 3.0)):
            assert abs(float(evaluate(DIPPING, e.t)[1])) < 1e-8

    def test_rejects_bad_window(self):
        """Test an empty window or too coarse a grid is rejected."""
        with pytest.raises(ValidationError):
            find_extrema(DIPPING, (1.0, 1.0))
        with pytest.raises(ValidationError):
            find_extrema(DIPPING, (0.0, 1.0), points_per_period=8)


class TestNegativity:
    def test_quadratic_matches_output(self):
        """Test the output at an extremum equals 4 pi^2 times the quadratic."""
        signal = TwoToneSignal(0.8, 1.7, 0.4)
        for e in find_extrema(signal, (0.0, 4.0)):
            expected = 4 * np.pi**2 * extremum_quadratic(signal, e.t)
            assert float(signal.psi(e.t)) == pytest.approx(expected, rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize(
        "signal",
        [DIPPING, TwoToneSignal(0.8, 1.7, 0.4), TwoToneSignal(0.3, 4.0, 1.0)],
    )
    def test_routes_agree_with_output_sign(self, signal):
        """Test both negativity routes agree with the sign of the output."""
        for e in find_extrema(signal, (0.0, 4.0)):
            check = negativity_check(signal, e.t)
            negative = bool(signal.psi(e.t) <= 0)
            assert check.by_quadratic == negative
            assert check.by_bounds == negative
            assert is_negative_at_extremum(signal, e.t) == negative

    def test_routes_agree_over_random_phases(self, rng):
        """Test both routes match the output sign for a = 0.6, f = 2.3 over 1000 phases."""
        negatives = 0
        for theta0 in rng.uniform(0.0, 2 * np.pi, 1000):
            signal = TwoToneSignal(0.6, 2.3, float(theta0))
            for e in find_extrema(signal, (0.0, 2.0)):
                check = negativity_check(signal, e.t)
                negative = bool(signal.psi(e.t) <= 0)
                assert check == (negative, negative)
                negatives += negative
        assert negatives > 0

    def test_derivative_components_cross_at_extrema(self):
        """Test M1 - M2 is xdot, so the two curves meet at every extremum."""
        signal = TwoToneSignal(0.6, 2.3, 0.9)
        t = np.linspace(0.0, 2.0, 401)
        m1, m2 = derivative_components(signal, t)
        assert np.allclose(m1 - m2, evaluate(signal, t)[1])
        extrema = np.array([e.t for e in find_extrema(signal, (0.0, 2.0))])
        m1, m2 = derivative_components(signal, extrema)
        assert np.allclose(m1, m2, atol=1e-9)

    def test_vulnerable_extrema_are_the_negative_ones(self):
        """Test positive minima and negative maxima are exactly where the output dips."""
        vulnerable = {round(e.t, 9) for e in vulnerable_extrema(DIPPING, (-0.1, 2.9))}
        negative = {
            round(e.t, 9)
            for e in find_extrema(DIPPING, (-0.1, 2.9))
            if is_negative_at_extremum(DIPPING, e.t)
        }
        assert vulnerable
        assert vulnerable == negative

    def test_weak_second_tone_is_safe(self):
        """Test a small a f^2 leaves no vulnerable extremum."""
        assert vulnerable_extrema(TwoToneSignal(0.05, 2.0), (0.0, 5.0)) == []

    def test_boundary_counts_as_negative(self):
        """Test an extremum with output exactly 0 is reported as negative."""
        signal = boundary_signal()
        assert float(evaluate(signal, 0.1)[1]) == pytest.approx(0.0, abs=1e-9)
        assert extremum_quadratic(signal, 0.1) == pytest.approx(0.0, abs=1e-12)
        assert is_negative_at_extremum(signal, 0.1)

    def test_rejects_non_extremum(self):
        """Test a t0 with nonzero derivative is rejected."""
        with pytest.raises(ValidationError):
            negativity_check(TwoToneSignal(0.0, 2.0), 0.1)

    def test_bounds_need_second_tone(self):
        """Test the bounds are undefined for a = 0."""
        with pytest.raises(ValidationError):
            negativity_bounds(TwoToneSignal(0.0, 2.0), 0.3)


class TestExcursions:
    def test_no_excursions_for_weak_tone(self):
        """Test a weak second tone never drives the output negative."""
        stats = negative_excursion_stats(TwoToneSignal(0.05, 2.0), (0.0, 5.0))
        assert stats.count == 0
        assert stats.mean_negative_duration == 0.0

    def test_excursions_converge_with_grid(self):
        """Test durations agree between a grid and its half-step refinement."""
        coarse = negative_excursion_stats(DIPPING, (0.25, 10.25))
        fine = negative_excursion_stats(DIPPING, (0.25, 10.25), step=1.0 / (2 * 64 * 3.0))
        assert coarse.count == fine.count
        assert coarse.count >= 20
        assert coarse.count % 10 == 0
        assert coarse.mean_negative_duration == pytest.approx(
            fine.mean_negative_duration, rel=1e-2
        )
        assert coarse.zero_crossing_rate == pytest.approx(2 * coarse.count / 10.0, rel=0.01)
        counts, edges = coarse.histogram(bins=5)
        assert counts.sum() == coarse.count
        assert edges.size == 6

    def test_sampled_route_matches_analytic(self):
        """Test interpolated derivatives of a sampled two-tone signal give the same excursions."""
        fs = 200.0
        t = np.arange(int(11 * fs)) / fs
        sampled = SampledSignal(DIPPING.x(t), fs)
        analytic = negative_excursion_stats(DIPPING, (0.25, 10.25))
        numeric = negative_excursion_stats(sampled, (0.25, 10.25))
        assert numeric.count == analytic.count
        assert numeric.mean_negative_duration == pytest.approx(
            analytic.mean_negative_duration, rel=0.02
        )

    def test_rejects_bad_step(self):
        """Test a step above 1/(64 f_fast) is rejected."""
        with pytest.raises(ValidationError):
            negative_excursion_stats(DIPPING, (0.0, 1.0), step=0.01)
        with pytest.raises(ValidationError):
            negative_excursion_stats(DIPPING)


class TestRayleighPaths:
    def test_paths_are_seeded(self):
        """Test the random two-tone population is reproducible."""
        cfg = McConfig(seed=3)
        first = rayleigh_two_tone_paths(2.0, 5, cfg=cfg)
        second = rayleigh_two_tone_paths(2.0, 5, cfg=cfg)
        assert first == second
        assert all(p.f == 2.0 and p.a >= 0 for p in first)
        assert all(0 <= p.theta0 < 2 * np.pi for p in first)

    def test_rejects_bad_arguments(self):
        """Test n_paths and sigma are validated."""
        with pytest.raises(ValidationError):
            rayleigh_two_tone_paths(2.0, 0)
        with pytest.raises(ValidationError):
            rayleigh_two_tone_paths(2.0, 3, sigma=0.0)
