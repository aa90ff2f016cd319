"""Eigentriple grouping: w-correlations, clustering, periods, regrouping.

The w-correlation between two elementary series is their weighted inner
product (weight at position t = the anti-diagonal count of the trajectory
matrix) normalized by the weighted norms.  1 - |w| is a dissimilarity;
complete-linkage agglomeration cut at p groups gives the automatic
partition.  Each group's component gets a period estimate by peak
counting; groups whose periods share an integer part are candidates for a
non-identifiability merge; explicit split/merge edits support manual
regrouping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .series import ExposureSet
from .ssa import Decomposition, diagonal_counts, eigenvalue_share, reconstruct


@dataclass(frozen=True, eq=False)
class WMatrix:
    """Symmetric d x d matrix of w-correlations, unit diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"w-matrix must be square, got shape {entries.shape}")
        object.__setattr__(self, "entries", entries)

    @property
    def d(self) -> int:
        return int(self.entries.shape[0])


@dataclass(frozen=True, eq=False)
class PeriodEstimate:
    """Estimated period in days: series length / interior peak count.

    A component with no interior peak gets period = length and is_trend
    set, so downstream floor-rule comparisons never divide by zero.
    """

    period: float
    peak_count: int
    is_trend: bool


@dataclass(frozen=True, eq=False)
class Grouping:
    """An ordered partition of eigentriple ranks 1..d with reconstructed
    components and period estimates per group."""

    groups: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...]
    components: tuple[np.ndarray, ...]
    periods: tuple[PeriodEstimate, ...]

    def __post_init__(self):
        if not (
            len(self.groups)
            == len(self.labels)
            == len(self.components)
            == len(self.periods)
        ):
            raise ValueError("groups, labels, components, periods must align")

    @property
    def p(self) -> int:
        return len(self.groups)

    @property
    def period_values(self) -> tuple[float, ...]:
        return tuple(pe.period for pe in self.periods)

    def with_labels(self, labels) -> "Grouping":
        labels = tuple(str(x) for x in labels)
        if len(labels) != self.p:
            raise ValueError(f"need {self.p} labels, got {len(labels)}")
        return Grouping(
            groups=self.groups,
            labels=labels,
            components=self.components,
            periods=self.periods,
        )


def wcorr_matrix(dec: Decomposition) -> WMatrix:
    """Pairwise w-correlations of the decomposition's elementary series."""
    traj = dec.trajectory
    weights = diagonal_counts(traj.L, traj.K).astype(float)
    elem = dec.elementary_matrix()
    weighted = elem * weights
    gram = weighted @ elem.T
    norms = np.sqrt(np.diag(gram))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(
            f"elementary series {[int(z) + 1 for z in zero]} have zero "
            "weighted norm; cannot normalize w-correlations"
        )
    w = gram / np.outer(norms, norms)
    w = (w + w.T) / 2.0
    np.fill_diagonal(w, 1.0)
    return WMatrix(entries=w)


def _agglomerate(dissim: np.ndarray) -> list[tuple[float, list[tuple[int, ...]]]]:
    """Complete-linkage merge history.

    Returns one entry per merge: (height, clusters after the merge) with
    clusters as sorted member tuples ordered by smallest member.  Ties
    break to the lexicographically smallest cluster pair.
    """
    d = dissim.shape[0]
    clusters: list[tuple[int, ...]] = [(i,) for i in range(d)]
    cur = dissim.astype(float).copy()
    history: list[tuple[float, list[tuple[int, ...]]]] = []
    while len(clusters) > 1:
        m = len(clusters)
        tri = cur.copy()
        tri[np.tril_indices(m)] = np.inf
        flat = int(np.argmin(tri))
        a, b = divmod(flat, m)
        height = float(cur[a, b])
        merged_row = np.maximum(cur[a], cur[b])
        cur[a, :] = merged_row
        cur[:, a] = merged_row
        cur[a, a] = 0.0
        keep = [i for i in range(m) if i != b]
        cur = cur[np.ix_(keep, keep)]
        clusters[a] = tuple(sorted(clusters[a] + clusters[b]))
        del clusters[b]
        history.append((height, [c for c in clusters]))
    return history


def cluster_groups(w: WMatrix, p: int) -> tuple[tuple[int, ...], ...]:
    """Cut complete-linkage clustering of 1 - |w| at p groups.

    Returns 1-based eigentriple ranks, groups ordered by smallest member.
    """
    d = w.d
    if not 1 <= p <= d:
        raise ValueError(f"group count must satisfy 1 <= p <= {d}, got {p}")
    if p == d:
        return tuple((i,) for i in range(1, d + 1))
    dissim = 1.0 - np.abs(w.entries)
    history = _agglomerate(dissim)
    _, clusters = history[d - p - 1]
    return tuple(tuple(i + 1 for i in c) for c in clusters)


def linkage_heights(w: WMatrix) -> tuple[float, ...]:
    """The d-1 complete-linkage merge heights in merge order, so a user
    can judge where to cut (reported alongside grouping artifacts)."""
    if w.d == 1:
        return ()
    dissim = 1.0 - np.abs(w.entries)
    return tuple(h for h, _ in _agglomerate(dissim))


def estimate_period(component: np.ndarray) -> PeriodEstimate:
    """Period = length / number of interior local maxima.

    A maximum is a first-difference sign change from + to -; runs of equal
    values collapse so a plateau counts once.  No maxima at all means the
    component is trend-like: period = length, is_trend = True.
    """
    x = np.asarray(component, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise ValueError(f"component must be 1-D with length >= 3, got shape {x.shape}")
    signs = np.sign(np.diff(x))
    signs = signs[signs != 0]
    peaks = int(np.sum((signs[:-1] > 0) & (signs[1:] < 0))) if signs.size > 1 else 0
    if peaks == 0:
        return PeriodEstimate(period=float(x.size), peak_count=0, is_trend=True)
    return PeriodEstimate(period=x.size / peaks, peak_count=peaks, is_trend=False)


def _check_partition(groups, d: int) -> tuple[tuple[int, ...], ...]:
    """Validate a 1-based partition of 1..d and normalize ordering."""
    seen: dict[int, int] = {}
    cleaned: list[tuple[int, ...]] = []
    for gi, group in enumerate(groups):
        members = sorted(int(i) for i in group)
        if not members:
            raise ValueError(f"group {gi + 1} is empty")
        for i in members:
            if not 1 <= i <= d:
                raise ValueError(f"eigentriple index {i} out of range 1..{d}")
            if i in seen:
                raise ValueError(
                    f"eigentriple index {i} appears in groups {seen[i] + 1} "
                    f"and {gi + 1}; groups must be disjoint"
                )
            seen[i] = gi
        cleaned.append(tuple(members))
    missing = sorted(set(range(1, d + 1)) - set(seen))
    if missing:
        raise ValueError(f"partition omits eigentriple indices {missing}")
    cleaned.sort(key=lambda g: g[0])
    return tuple(cleaned)


def build_grouping(dec: Decomposition, groups, labels=None) -> Grouping:
    """Assemble a Grouping from a partition: reconstruct each group's
    component by diagonal averaging and estimate its period."""
    partition = _check_partition(groups, dec.d)
    components = tuple(reconstruct(dec, g) for g in partition)
    periods = tuple(estimate_period(c) for c in components)
    if labels is None:
        labels = tuple(f"G{i + 1}" for i in range(len(partition)))
    else:
        labels = tuple(str(x) for x in labels)
        if len(labels) != len(partition):
            raise ValueError(f"need {len(partition)} labels, got {len(labels)}")
    return Grouping(
        groups=partition, labels=labels, components=components, periods=periods
    )


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    am = a - a.mean()
    bm = b - b.mean()
    denom = math.sqrt(float(am @ am) * float(bm @ bm))
    if denom == 0.0:
        return 0.0
    return float(am @ bm) / denom


def merge_nonidentifiable(
    g: Grouping, dec: Decomposition, mode: str = "floor", epsilon: float = 0.25
) -> Grouping:
    """Merge groups whose period estimates share an integer part.

    floor mode merges on floor(period) equality alone; pearson mode
    additionally requires the absolute Pearson correlation of the two
    components to stay below ``epsilon`` (weakly correlated components
    that the period estimator cannot tell apart).  The lowest-index
    eligible pair merges first; components and periods are rebuilt after
    every merge and scanning repeats until no pair qualifies.
    """
    if mode not in ("floor", "pearson"):
        raise ValueError(f"mode must be 'floor' or 'pearson', got {mode!r}")
    if mode == "pearson" and not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    current = g
    while True:
        floors = [math.floor(pe.period) for pe in current.periods]
        pair = None
        for a in range(current.p):
            for b in range(a + 1, current.p):
                if floors[a] != floors[b]:
                    continue
                if mode == "pearson":
                    r = _pearson(current.components[a], current.components[b])
                    if abs(r) >= epsilon:
                        continue
                pair = (a, b)
                break
            if pair:
                break
        if pair is None:
            return current
        a, b = pair
        merged = [list(grp) for grp in current.groups]
        merged[a] = sorted(merged[a] + merged[b])
        del merged[b]
        current = build_grouping(dec, merged)


@dataclass(frozen=True, eq=False)
class SplitEdit:
    """Split one group (1-based position) into explicit eigentriple-index
    parts; the parts must tile the group exactly."""

    group: int
    into: tuple[tuple[int, ...], ...]


@dataclass(frozen=True, eq=False)
class MergeEdit:
    """Merge the groups at the given 1-based positions into one."""

    groups: tuple[int, ...]


def edit_from_dict(spec: dict) -> SplitEdit | MergeEdit:
    """Parse a config-file directive: {"op": "split", "group": i,
    "into": [[...], ...]} or {"op": "merge", "groups": [...]}."""
    op = spec.get("op")
    if op == "split":
        return SplitEdit(
            group=int(spec["group"]),
            into=tuple(tuple(int(i) for i in part) for part in spec["into"]),
        )
    if op == "merge":
        return MergeEdit(groups=tuple(int(i) for i in spec["groups"]))
    raise ValueError(f"unknown regroup op {op!r}; expected 'split' or 'merge'")


def regroup(g: Grouping, dec: Decomposition, edits) -> Grouping:
    """Apply split/merge edits in order, rebuilding components and periods.

    Positions refer to the grouping state after the previous edit, with
    groups always ordered by smallest member.  An empty edit list returns
    the input grouping unchanged.
    """
    edits = list(edits)
    if not edits:
        return g
    current = g
    for edit in edits:
        partition = [list(grp) for grp in current.groups]
        if isinstance(edit, SplitEdit):
            pos = edit.group - 1
            if not 0 <= pos < len(partition):
                raise ValueError(
                    f"split references group {edit.group}, but there are "
                    f"{len(partition)} groups"
                )
            target = set(partition[pos])
            parts = [sorted(int(i) for i in part) for part in edit.into]
            flat: list[int] = [i for part in parts for i in part]
            if len(set(flat)) != len(flat):
                dupes = sorted({i for i in flat if flat.count(i) > 1})
                raise ValueError(f"split parts overlap on indices {dupes}")
            if set(flat) != target:
                extra = sorted(set(flat) - target)
                missing = sorted(target - set(flat))
                problem = []
                if extra:
                    problem.append(f"indices {extra} are not in the group")
                if missing:
                    problem.append(f"indices {missing} are left unassigned")
                raise ValueError(f"invalid split of group {edit.group}: "
                                 + "; ".join(problem))
            if any(not part for part in parts):
                raise ValueError("split parts must be nonempty")
            partition[pos : pos + 1] = parts
        elif isinstance(edit, MergeEdit):
            positions = sorted({int(i) for i in edit.groups})
            if len(positions) < 2:
                raise ValueError("merge needs at least two distinct groups")
            bad = [i for i in positions if not 1 <= i <= len(partition)]
            if bad:
                raise ValueError(
                    f"merge references groups {bad}, but there are "
                    f"{len(partition)} groups"
                )
            union: list[int] = []
            for i in positions:
                union.extend(partition[i - 1])
            for i in reversed(positions[1:]):
                del partition[i - 1]
            partition[positions[0] - 1] = sorted(union)
        else:
            raise TypeError(f"unsupported edit type {type(edit).__name__}")
        current = build_grouping(dec, partition)
    return current


def to_exposures(g: Grouping, dec: Decomposition, source: str = "ssa") -> ExposureSet:
    """Package the grouping's components as named exposure variables for
    the regression stage, with period/share provenance in metadata."""
    meta = tuple(
        {
            "indices": list(grp),
            "period": pe.period,
            "peak_count": pe.peak_count,
            "is_trend": pe.is_trend,
            "share": eigenvalue_share(dec, grp),
        }
        for grp, pe in zip(g.groups, g.periods)
    )
    return ExposureSet(
        names=g.labels,
        values=np.vstack(g.components),
        meta=meta,
        source=source,
    )


def grouping_summary(g: Grouping, dec: Decomposition) -> dict:
    """JSON-ready summary: groups, labels, periods, shares, trend flags."""
    return {
        "groups": [list(grp) for grp in g.groups],
        "labels": list(g.labels),
        "periods": [pe.period for pe in g.periods],
        "peak_counts": [pe.peak_count for pe in g.periods],
        "trend_flags": [pe.is_trend for pe in g.periods],
        "shares": [eigenvalue_share(dec, grp) for grp in g.groups],
    }
