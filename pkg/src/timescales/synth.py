"""Synthetic scenarios with known harmonic structure and planted effects.

A scenario plants a polynomial trend, a set of sinusoids, optional
Gaussian noise, and regression truth (intercept, per-component betas,
day-of-week effects).  The generated series feeds the decomposition
pipeline and the counts feed the regression, so recovery of the planted
structure is checkable end to end.  All randomness comes from numpy's
seeded PCG64 generator, so outputs are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .series import DAILY, TimeSeries

DEFAULT_START = datetime(2000, 1, 3)  # a Monday


@dataclass(frozen=True, eq=False)
class Harmonic:
    """amplitude * sin(2*pi*t / period + phase), period in days."""

    amplitude: float
    period: float
    phase: float = 0.0

    def __post_init__(self):
        if self.period < 2.0:
            raise ValueError(
                f"harmonic period must be >= 2 days, got {self.period}"
            )


@dataclass(frozen=True, eq=False)
class SynthScenario:
    """Ground truth for one synthetic run.

    planted_betas align with the signal components in generation order:
    trend first when trend_coeffs is nonempty, then the harmonics.  The
    six dow_effects are Tuesday..Sunday contrasts against Monday.
    """

    n: int
    harmonics: tuple[Harmonic, ...] = ()
    trend_coeffs: tuple[float, ...] = ()
    noise_sd: float = 0.0
    planted_betas: tuple[float, ...] = ()
    dow_effects: tuple[float, ...] = (0.0,) * 6
    intercept: float = math.log(20.0)
    seed: int = 0
    start: datetime = field(default=DEFAULT_START)

    def __post_init__(self):
        object.__setattr__(self, "harmonics", tuple(self.harmonics))
        object.__setattr__(
            self, "trend_coeffs", tuple(float(c) for c in self.trend_coeffs)
        )
        object.__setattr__(
            self, "planted_betas", tuple(float(b) for b in self.planted_betas)
        )
        object.__setattr__(
            self, "dow_effects", tuple(float(d) for d in self.dow_effects)
        )
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.harmonics:
            longest = max(h.period for h in self.harmonics)
            if self.n < 2 * longest:
                raise ValueError(
                    f"n = {self.n} covers less than two cycles of the "
                    f"longest period {longest}"
                )
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if len(self.dow_effects) != 6:
            raise ValueError(
                f"dow_effects needs 6 values (Tue..Sun), got {len(self.dow_effects)}"
            )
        n_signal = (1 if self.trend_coeffs else 0) + len(self.harmonics)
        if self.planted_betas and len(self.planted_betas) != n_signal:
            raise ValueError(
                f"{len(self.planted_betas)} planted betas for {n_signal} "
                "signal components (trend + harmonics)"
            )

    def signal_names(self) -> tuple[str, ...]:
        names = ["trend"] if self.trend_coeffs else []
        names.extend(f"harmonic_{i + 1}" for i in range(len(self.harmonics)))
        return tuple(names)


def gen_harmonic_series(sc: SynthScenario) -> tuple[TimeSeries, dict[str, np.ndarray]]:
    """The scenario's series and its true components, keyed by name.

    Component order: trend (if any), harmonics in declaration order, then
    noise (if noise_sd > 0).  The sum of the returned components is the
    returned series exactly.
    """
    t = np.arange(sc.n, dtype=float)
    components: dict[str, np.ndarray] = {}
    if sc.trend_coeffs:
        components["trend"] = np.polynomial.polynomial.polyval(
            t, list(sc.trend_coeffs)
        )
    for i, h in enumerate(sc.harmonics):
        components[f"harmonic_{i + 1}"] = h.amplitude * np.sin(
            2.0 * math.pi * t / h.period + h.phase
        )
    if sc.noise_sd > 0:
        rng = np.random.default_rng(sc.seed)
        components["noise"] = rng.normal(0.0, sc.noise_sd, size=sc.n)
    total = np.zeros(sc.n)
    for values in components.values():
        total = total + values
    ts = TimeSeries(start=sc.start, step=DAILY, values=total, name="x")
    return ts, components


def weekday_vector(start: datetime, n: int) -> np.ndarray:
    """Weekday per day, 0 = Monday .. 6 = Sunday."""
    return (start.weekday() + np.arange(n)) % 7


def gen_poisson_counts(
    components,
    betas,
    dow_effects,
    intercept: float,
    seed: int,
    start: datetime = DEFAULT_START,
    name: str = "y",
) -> TimeSeries:
    """Poisson counts with rate exp(intercept + sum beta*component + dow).

    ``components`` is a sequence of aligned arrays (or a name->array
    mapping, used in insertion order); ``betas`` aligns with it;
    ``dow_effects`` are the six Tuesday..Sunday contrasts.
    """
    if isinstance(components, dict):
        components = list(components.values())
    arrays = [np.asarray(c, dtype=float) for c in components]
    betas = [float(b) for b in betas]
    if len(arrays) != len(betas):
        raise ValueError(f"{len(arrays)} components but {len(betas)} betas")
    dow_effects = [float(d) for d in dow_effects]
    if len(dow_effects) != 6:
        raise ValueError(f"dow_effects needs 6 values, got {len(dow_effects)}")
    if not arrays:
        raise ValueError("need at least one component")
    n = arrays[0].size
    for i, arr in enumerate(arrays):
        if arr.shape != (n,):
            raise ValueError(
                f"component {i} has shape {arr.shape}, expected ({n},)"
            )

    eta = np.full(n, float(intercept))
    for beta, arr in zip(betas, arrays):
        eta = eta + beta * arr
    wd = weekday_vector(start, n)
    dow_lookup = np.array([0.0] + dow_effects)
    eta = eta + dow_lookup[wd]
    if np.any(eta > 20.0):
        worst = float(eta.max())
        raise ValueError(
            f"linear predictor reaches {worst:.3g} > 20 (rate overflow); "
            "use smaller betas or amplitudes"
        )
    rng = np.random.default_rng(seed)
    counts = rng.poisson(np.exp(eta)).astype(float)
    return TimeSeries(start=start, step=DAILY, values=counts, name=name)
