"""Tests for synthetic scenario generation."""

import math
from datetime import datetime, timedelta

import numpy as np
import pytest

from timescales import (
    Harmonic,
    SynthScenario,
    gen_harmonic_series,
    gen_poisson_counts,
    weekday_vector,
)
from timescales.synth import DEFAULT_START


class TestScenarioValidation:
    def test_period_below_two_rejected(self):
        with pytest.raises(ValueError, match=">= 2"):
            Harmonic(amplitude=1.0, period=1.5)

    def test_n_below_two_rejected(self):
        with pytest.raises(ValueError, match="n must be >= 2"):
            SynthScenario(n=1)

    def test_series_must_cover_two_cycles(self):
        # n = 23 < 2 * 12, one sample short of two full cycles.
        with pytest.raises(ValueError, match="two cycles"):
            SynthScenario(n=23, harmonics=(Harmonic(1.0, 12.0),))
        SynthScenario(n=24, harmonics=(Harmonic(1.0, 12.0),))

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError, match="noise_sd"):
            SynthScenario(n=10, noise_sd=-0.1)

    def test_dow_effects_need_six_values(self):
        with pytest.raises(ValueError, match="6 values"):
            SynthScenario(n=10, dow_effects=(0.1, 0.2))

    def test_beta_count_must_match_signal_components(self):
        with pytest.raises(ValueError, match="planted betas"):
            SynthScenario(
                n=30,
                harmonics=(Harmonic(1.0, 12.0),),
                trend_coeffs=(0.0, 1.0),
                planted_betas=(0.1,),
            )
        sc = SynthScenario(
            n=30,
            harmonics=(Harmonic(1.0, 12.0),),
            trend_coeffs=(0.0, 1.0),
            planted_betas=(0.1, 0.2),
        )
        assert sc.signal_names() == ("trend", "harmonic_1")

    def test_signal_names_without_trend(self):
        sc = SynthScenario(
            n=30, harmonics=(Harmonic(1.0, 12.0), Harmonic(2.0, 6.0))
        )
        assert sc.signal_names() == ("harmonic_1", "harmonic_2")


class TestGenHarmonicSeries:
    def test_components_sum_to_series_exactly(self):
        sc = SynthScenario(
            n=200,
            harmonics=(Harmonic(4.0, 12.0, 0.3), Harmonic(1.5, 6.0)),
            trend_coeffs=(1.0, 0.01, -1e-5),
            noise_sd=0.5,
            seed=11,
        )
        ts, components = gen_harmonic_series(sc)
        assert list(components) == ["trend", "harmonic_1", "harmonic_2", "noise"]
        total = np.zeros(sc.n)
        for values in components.values():
            total = total + values
        assert np.array_equal(ts.values, total)

    def test_component_values_match_direct_formulas(self):
        sc = SynthScenario(
            n=60,
            harmonics=(Harmonic(4.0, 12.0, 0.3),),
            trend_coeffs=(2.0, 0.05),
        )
        ts, components = gen_harmonic_series(sc)
        t = np.arange(60, dtype=float)
        assert np.allclose(components["trend"], 2.0 + 0.05 * t, rtol=1e-15)
        expected = 4.0 * np.sin(2.0 * math.pi * t / 12.0 + 0.3)
        assert np.allclose(components["harmonic_1"], expected, rtol=1e-15)
        assert "noise" not in components
        assert ts.n == 60
        assert ts.start == DEFAULT_START

    def test_noise_is_seeded_and_reproducible(self):
        sc = SynthScenario(n=100, noise_sd=1.5, seed=42)
        _, first = gen_harmonic_series(sc)
        _, second = gen_harmonic_series(sc)
        assert np.array_equal(first["noise"], second["noise"])
        expected = np.random.default_rng(42).normal(0.0, 1.5, size=100)
        assert np.array_equal(first["noise"], expected)
        other = SynthScenario(n=100, noise_sd=1.5, seed=43)
        _, third = gen_harmonic_series(other)
        assert not np.array_equal(first["noise"], third["noise"])


class TestWeekdayVector:
    def test_default_start_is_monday(self):
        wd = weekday_vector(DEFAULT_START, 14)
        assert wd[0] == 0
        assert np.array_equal(wd[:7], np.arange(7))
        assert np.array_equal(wd[:7], wd[7:14])

    def test_matches_datetime_weekday(self):
        start = datetime(2001, 5, 17)
        wd = weekday_vector(start, 30)
        for i in range(30):
            assert wd[i] == (start + timedelta(days=i)).weekday()


class TestGenPoissonCounts:
    def test_matches_direct_poisson_draw(self):
        n = 50
        t = np.arange(n, dtype=float)
        comp = np.sin(2.0 * math.pi * t / 7.3)
        dow = [-0.02, 0.01, 0.0, 0.03, 0.05, -0.04]
        counts = gen_poisson_counts(
            [comp], [0.3], dow, intercept=math.log(20.0), seed=7
        )
        eta = math.log(20.0) + 0.3 * comp
        lookup = np.array([0.0] + dow)
        eta = eta + lookup[weekday_vector(DEFAULT_START, n)]
        expected = np.random.default_rng(7).poisson(np.exp(eta)).astype(float)
        assert np.array_equal(counts.values, expected)
        again = gen_poisson_counts(
            [comp], [0.3], dow, intercept=math.log(20.0), seed=7
        )
        assert np.array_equal(counts.values, again.values)

    def test_dict_components_used_in_insertion_order(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=40)
        b = rng.normal(size=40)
        from_dict = gen_poisson_counts(
            {"a": a, "b": b}, [0.2, -0.1], [0.0] * 6, intercept=1.0, seed=5
        )
        from_list = gen_poisson_counts(
            [a, b], [0.2, -0.1], [0.0] * 6, intercept=1.0, seed=5
        )
        assert np.array_equal(from_dict.values, from_list.values)

    def test_dow_effect_shifts_rates(self):
        # A large Sunday contrast should show up in the Sunday means.
        n = 7 * 400
        zeros = np.zeros(n)
        counts = gen_poisson_counts(
            [zeros], [0.0], [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            intercept=math.log(10.0), seed=9,
        )
        wd = weekday_vector(DEFAULT_START, n)
        sunday_mean = counts.values[wd == 6].mean()
        monday_mean = counts.values[wd == 0].mean()
        assert abs(monday_mean - 10.0) < 0.5
        assert abs(sunday_mean - 10.0 * math.e) < 1.5

    def test_beta_count_mismatch_rejected(self):
        with pytest.raises(ValueError, match="1 components but 2 betas"):
            gen_poisson_counts(
                [np.zeros(10)], [0.1, 0.2], [0.0] * 6, intercept=1.0, seed=0
            )

    def test_dow_length_rejected(self):
        with pytest.raises(ValueError, match="6 values"):
            gen_poisson_counts(
                [np.zeros(10)], [0.1], [0.0] * 5, intercept=1.0, seed=0
            )

    def test_empty_components_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            gen_poisson_counts([], [], [0.0] * 6, intercept=1.0, seed=0)

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError, match="component 1 has shape"):
            gen_poisson_counts(
                [np.zeros(10), np.zeros(9)], [0.1, 0.2], [0.0] * 6,
                intercept=1.0, seed=0,
            )

    def test_rate_overflow_guard(self):
        big = np.full(10, 30.0)
        with pytest.raises(ValueError, match="rate overflow"):
            gen_poisson_counts([big], [1.0], [0.0] * 6, intercept=1.0, seed=0)
