"""FFT band decomposition: split a series by Fourier period bands.

Each DFT frequency index k = 1..floor(N/2) has period N/k days; a band
spec lists strictly increasing period breakpoints and band b collects the
frequencies with period in (breaks[b], breaks[b+1]].  Masked inverse
transforms give one real series per band; the masks tile the spectrum, so
the bands sum to the original series exactly.  The zero frequency (the
series mean) travels with the longest-period band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import ExposureSet, TimeSeries


@dataclass(frozen=True, eq=False)
class BandSpec:
    """Strictly increasing period breakpoints in days; band b spans
    periods in (breaks[b], breaks[b+1]]."""

    breaks: tuple[float, ...]

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breaks)
        object.__setattr__(self, "breaks", breaks)
        if len(breaks) < 2:
            raise ValueError("need at least two breakpoints for one band")
        if breaks[0] < 1.0:
            raise ValueError(f"first breakpoint must be >= 1 day, got {breaks[0]}")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise ValueError(f"breakpoints must be strictly increasing: {breaks}")

    @property
    def band_count(self) -> int:
        return len(self.breaks) - 1


def band_decompose(ts: TimeSeries, spec: BandSpec) -> ExposureSet:
    """Split ``ts`` into one series per period band.

    Output rows are ordered shortest-period band first (the order of the
    breakpoints); metadata records each band's period interval, frequency
    count, and whether it carries the mean or the Nyquist term.
    """
    if not ts.is_complete():
        raise ValueError(
            f"series has {ts.n_missing} missing values; impute before decomposing"
        )
    n = ts.n
    if n < 2:
        raise ValueError("band decomposition needs at least 2 samples")
    breaks = spec.breaks
    if breaks[-1] > n:
        raise ValueError(
            f"last breakpoint {breaks[-1]} exceeds series length {n}"
        )
    n_bands = spec.band_count

    # Frequency index -> band assignment via half-open period intervals.
    half = n // 2
    k = np.arange(1, half + 1)
    periods = n / k
    band_of_k = np.searchsorted(breaks, periods, side="left") - 1
    out_of_range = (band_of_k < 0) | (band_of_k >= n_bands)
    if np.any(out_of_range):
        bad = k[out_of_range]
        raise ValueError(
            f"frequency indices {bad.tolist()} have periods outside every "
            f"band; periods covered are ({breaks[0]}, {breaks[-1]}]"
        )

    assign = np.empty(n, dtype=int)
    assign[0] = n_bands - 1  # mean rides with the longest-period band
    assign[k] = band_of_k
    assign[n - k] = band_of_k  # conjugate mirror (Nyquist maps onto itself)

    counts = np.bincount(band_of_k, minlength=n_bands)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        b = int(empty[0])
        raise ValueError(
            f"band {b + 1} (periods ({breaks[b]}, {breaks[b + 1]}]) receives "
            "no frequency index; widen the band or drop the breakpoint"
        )

    spectrum = np.fft.fft(ts.values)
    values = np.empty((n_bands, n))
    max_imag = np.empty(n_bands)
    for b in range(n_bands):
        masked = np.where(assign == b, spectrum, 0.0)
        band = np.fft.ifft(masked)
        max_imag[b] = float(np.max(np.abs(band.imag)))
        values[b] = band.real

    meta = tuple(
        {
            "period_low": breaks[b],
            "period_high": breaks[b + 1],
            "n_frequencies": int(counts[b]),
            "includes_mean": b == n_bands - 1,
            "includes_nyquist": bool(n % 2 == 0 and band_of_k[-1] == b),
            "max_imag_residue": max_imag[b],
        }
        for b in range(n_bands)
    )
    return ExposureSet(
        names=tuple(f"band_{b + 1}" for b in range(n_bands)),
        values=values,
        meta=meta,
        source="fft",
    )
