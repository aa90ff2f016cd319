"""Singular spectrum analysis: embedding, SVD, and diagonal averaging.

A series of length N is embedded into an L x K Hankel trajectory matrix
(K = N - L + 1) whose columns are lagged windows.  The thin SVD splits the
matrix into rank-one terms sigma_i u_i v_i^T; Hankelizing each term by
anti-diagonal averaging gives the elementary series whose groups form the
additive components of the original series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import TimeSeries


@dataclass(frozen=True, eq=False)
class TrajectoryMatrix:
    """L x K Hankel matrix of lagged windows of a length-N series."""

    entries: np.ndarray
    window: int
    source_length: int

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", entries)
        L, K = entries.shape
        if L != self.window or K != self.source_length - self.window + 1:
            raise ValueError(
                f"entries shape {entries.shape} inconsistent with window "
                f"{self.window} and source length {self.source_length}"
            )

    @property
    def L(self) -> int:
        return int(self.entries.shape[0])

    @property
    def K(self) -> int:
        return int(self.entries.shape[1])


@dataclass(frozen=True, eq=False)
class Eigentriple:
    """One SVD term: singular value, left/right singular vectors, and the
    Hankelized (anti-diagonal averaged) series of sigma * u v^T."""

    index: int
    sigma: float
    u: np.ndarray
    v: np.ndarray
    series: np.ndarray

    @property
    def eigenvalue(self) -> float:
        return self.sigma * self.sigma


@dataclass(frozen=True, eq=False)
class Decomposition:
    trajectory: TrajectoryMatrix
    triples: tuple[Eigentriple, ...]
    total_energy: float

    @property
    def d(self) -> int:
        return len(self.triples)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([t.eigenvalue for t in self.triples])

    @property
    def shares(self) -> np.ndarray:
        lam = self.eigenvalues
        return lam / lam.sum()

    def elementary_matrix(self) -> np.ndarray:
        """Stack of elementary series, shape (d, N)."""
        return np.vstack([t.series for t in self.triples])


def embed(ts: TimeSeries, window: int) -> TrajectoryMatrix:
    """Build the trajectory matrix with window length ``window`` (rows are
    lags, columns are successive windows)."""
    if not ts.is_complete():
        raise ValueError(
            f"series has {ts.n_missing} missing values; impute before embedding"
        )
    n = ts.n
    if not 2 <= window <= (n + 1) // 2:
        raise ValueError(
            f"window must satisfy 2 <= window <= ceil(n / 2) = {(n + 1) // 2} "
            f"(no longer than the column count), got {window}"
        )
    entries = np.lib.stride_tricks.sliding_window_view(ts.values, window).T.copy()
    return TrajectoryMatrix(entries=entries, window=window, source_length=n)


def diagonal_counts(L: int, K: int) -> np.ndarray:
    """Number of (i, j) cells on each anti-diagonal i + j = t of an L x K
    matrix: min(t + 1, L, K, N - t) for t = 0..N-1, N = L + K - 1."""
    n = L + K - 1
    t = np.arange(n)
    return np.minimum.reduce([t + 1, np.full(n, L), np.full(n, K), n - t])


def hankelize(matrix: np.ndarray) -> np.ndarray:
    """Average each anti-diagonal of a matrix into one series value."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or min(matrix.shape) < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {matrix.shape}")
    L, K = matrix.shape
    i = np.repeat(np.arange(L), K)
    j = np.tile(np.arange(K), L)
    sums = np.bincount(i + j, weights=matrix.ravel(), minlength=L + K - 1)
    return sums / diagonal_counts(L, K)


def _hankelize_rank_one(sigma: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # Anti-diagonal sums of u v^T are exactly the full convolution of u and v.
    return sigma * np.convolve(u, v, mode="full") / diagonal_counts(u.size, v.size)


def decompose(traj: TrajectoryMatrix, rank_tol: float = 1e-12) -> Decomposition:
    """Thin SVD of the trajectory matrix with a fixed sign and order
    convention, dropping terms with eigenvalue below rank_tol * largest.

    Signs: each u_i has a positive first nonzero entry (v_i flipped to
    match).  Order: descending sigma; exact ties break on the position of
    the largest |u| entry.
    """
    entries = traj.entries
    if not np.any(entries):
        raise ValueError("trajectory matrix is identically zero")
    if rank_tol < 0:
        raise ValueError(f"rank_tol must be >= 0, got {rank_tol}")
    u_mat, sigmas, vt_mat = np.linalg.svd(entries, full_matrices=False)

    for i in range(sigmas.size):
        col = u_mat[:, i]
        nonzero = np.flatnonzero(col)
        if nonzero.size and col[nonzero[0]] < 0:
            u_mat[:, i] = -col
            vt_mat[i, :] = -vt_mat[i, :]

    tie_key = np.argmax(np.abs(u_mat), axis=0)
    order = np.lexsort((tie_key, -sigmas))
    u_mat = u_mat[:, order]
    sigmas = sigmas[order]
    vt_mat = vt_mat[order, :]

    total_energy = float(np.sum(sigmas**2))
    keep = sigmas**2 >= rank_tol * sigmas[0] ** 2
    triples = tuple(
        Eigentriple(
            index=i + 1,
            sigma=float(sigmas[i]),
            u=u_mat[:, i].copy(),
            v=vt_mat[i, :].copy(),
            series=_hankelize_rank_one(float(sigmas[i]), u_mat[:, i], vt_mat[i, :]),
        )
        for i in np.flatnonzero(keep)
    )
    return Decomposition(trajectory=traj, triples=triples, total_energy=total_energy)


def _check_group(dec: Decomposition, group) -> list[int]:
    idx = sorted({int(g) for g in group})
    if not idx:
        raise ValueError("group must contain at least one eigentriple index")
    bad = [g for g in idx if not 1 <= g <= dec.d]
    if bad:
        raise ValueError(
            f"eigentriple indices out of range 1..{dec.d}: {bad}"
        )
    return idx


def reconstruct(dec: Decomposition, group) -> np.ndarray:
    """Sum the elementary series of the 1-based eigentriple indices in
    ``group``."""
    idx = _check_group(dec, group)
    out = np.zeros(dec.trajectory.source_length)
    for g in idx:
        out += dec.triples[g - 1].series
    return out


def eigenvalue_share(dec: Decomposition, group) -> float:
    """Fraction of total retained eigenvalue mass captured by ``group``."""
    idx = _check_group(dec, group)
    lam = dec.eigenvalues
    return float(lam[[g - 1 for g in idx]].sum() / lam.sum())
