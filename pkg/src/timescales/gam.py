"""Poisson log-link additive model with penalized spline smooths.

The linear predictor is intercept + exposure terms + six day-of-week
dummies (Monday is the reference level) + one centered cubic regression
spline per smooth covariate.  Fitting is penalized iteratively reweighted
least squares; each smooth j carries a curvature penalty delta_j * S_j.
Model selection minimizes the UBRE score deviance/n + 2*tr(R)/n - 1 over a
log-spaced delta grid by coordinate descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve
from scipy.special import erfc
from scipy.stats import chi2

from .series import ExposureSet
from .splines import CenteredSplineBasis, build_centered_basis

DOW_NAMES = ("dow_tue", "dow_wed", "dow_thu", "dow_fri", "dow_sat", "dow_sun")
DEFAULT_LOG10_GRID = tuple(np.arange(-3.0, 6.0 + 1e-9, 0.5))


@dataclass(frozen=True, eq=False)
class SmoothSpec:
    """One spline-smoothed covariate and its basis dimension."""

    name: str
    values: np.ndarray
    basis_dim: int = 10

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.basis_dim < 3:
            raise ValueError(
                f"smooth {self.name!r}: basis_dim must be >= 3, got {self.basis_dim}"
            )


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Exposure terms, optional day-of-week factor, and smooth terms."""

    exposures: ExposureSet | None = None
    weekdays: np.ndarray | None = None
    smooths: tuple[SmoothSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "smooths", tuple(self.smooths))
        if self.weekdays is not None:
            wd = np.asarray(self.weekdays)
            if wd.ndim != 1:
                raise ValueError("weekdays must be a 1-D integer vector")
            if not np.all((wd >= 0) & (wd <= 6)):
                raise ValueError("weekdays must take values 0 (Monday) .. 6 (Sunday)")
            object.__setattr__(self, "weekdays", wd.astype(int))

    @classmethod
    def from_arrays(cls, exposures: dict, weekdays=None, smooths=()) -> "ModelSpec":
        if exposures:
            names = tuple(exposures)
            values = np.vstack(
                [np.asarray(exposures[k], dtype=float) for k in names]
            )
            exposure_set = ExposureSet(names=names, values=values)
        else:
            exposure_set = None
        return cls(
            exposures=exposure_set,
            weekdays=weekdays,
            smooths=tuple(smooths),
        )


@dataclass(frozen=True, eq=False)
class DesignBundle:
    """Assembled model matrix with per-smooth penalty blocks."""

    matrix: np.ndarray
    column_names: tuple[str, ...]
    n_parametric: int
    smooth_names: tuple[str, ...]
    smooth_slices: tuple[slice, ...]
    penalties: tuple[np.ndarray, ...]
    bases: tuple[CenteredSplineBasis, ...]

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def q(self) -> int:
        return int(self.matrix.shape[1])

    def penalty_total(self, deltas) -> np.ndarray:
        total = np.zeros((self.q, self.q))
        for delta, sl, pen in zip(deltas, self.smooth_slices, self.penalties):
            total[sl, sl] += delta * pen
        return total


def _check_counts(counts, n: int | None = None) -> np.ndarray:
    y = np.asarray(counts, dtype=float)
    if y.ndim != 1:
        raise ValueError("counts must be a 1-D vector")
    if n is not None and y.size != n:
        raise ValueError(f"counts length {y.size} does not match design rows {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("counts contain missing or non-finite values")
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise ValueError("counts must be nonnegative integers")
    return y


def build_design(spec: ModelSpec, counts) -> DesignBundle:
    """Model matrix: intercept, exposures, day-of-week dummies, centered
    spline blocks; penalties are zero except on the spline blocks."""
    y = _check_counts(counts)
    n = y.size
    columns = [np.ones(n)]
    names: list[str] = ["intercept"]
    if spec.exposures is not None:
        if spec.exposures.n != n:
            raise ValueError(
                f"exposure length {spec.exposures.n} does not match counts "
                f"length {n}"
            )
        for i, name in enumerate(spec.exposures.names):
            row = spec.exposures.values[i]
            if not np.all(np.isfinite(row)):
                raise ValueError(f"exposure {name!r} contains non-finite values")
            columns.append(row)
            names.append(name)
    if spec.weekdays is not None:
        wd = spec.weekdays
        if wd.size != n:
            raise ValueError(f"weekday length {wd.size} does not match counts {n}")
        for level, dow_name in enumerate(DOW_NAMES, start=1):
            columns.append((wd == level).astype(float))
            names.append(dow_name)
    n_parametric = len(columns)

    parametric = np.column_stack(columns)
    rank = np.linalg.matrix_rank(parametric)
    if rank < n_parametric:
        _, _, piv = _pivoted_qr(parametric)
        bad = sorted(names[int(piv[i])] for i in range(rank, n_parametric))
        raise ValueError(
            f"parametric block is rank-deficient; collinear columns: {bad}"
        )

    bases: list[CenteredSplineBasis] = []
    slices: list[slice] = []
    penalties: list[np.ndarray] = []
    offset = n_parametric
    for sm in spec.smooths:
        if sm.name in {b.name for b in bases}:
            raise ValueError(f"duplicate smooth name {sm.name!r}")
        if sm.values.size != n:
            raise ValueError(
                f"smooth {sm.name!r} length {sm.values.size} does not match "
                f"counts length {n}"
            )
        if np.unique(sm.values).size == 1:
            raise ValueError(
                f"smooth covariate {sm.name!r} is constant; a spline needs spread"
            )
        basis = build_centered_basis(sm.name, sm.values, sm.basis_dim)
        columns.append(basis.design)
        names.extend(f"s({sm.name}).{i + 1}" for i in range(basis.dim))
        slices.append(slice(offset, offset + basis.dim))
        penalties.append(basis.penalty)
        bases.append(basis)
        offset += basis.dim

    matrix = np.column_stack(columns)
    return DesignBundle(
        matrix=matrix,
        column_names=tuple(names),
        n_parametric=n_parametric,
        smooth_names=tuple(b.name for b in bases),
        smooth_slices=tuple(slices),
        penalties=tuple(penalties),
        bases=tuple(bases),
    )


def _pivoted_qr(a: np.ndarray):
    from scipy.linalg import qr

    q_mat, r_mat, piv = qr(a, mode="economic", pivoting=True)
    return q_mat, r_mat, piv


def poisson_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    """2 * sum[y log(y/mu) - (y - mu)], with the y = 0 limit 2*mu."""
    term = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0) / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


class PirlsError(RuntimeError):
    """Raised when penalized IRLS fails; carries the deviance trace."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


class ParamStat(NamedTuple):
    name: str
    estimate: float
    se: float
    z: float
    p: float


class SmoothStat(NamedTuple):
    name: str
    edf: float
    chisq: float
    p: float


@dataclass(frozen=True, eq=False)
class GamFit:
    """A converged penalized Poisson fit with inference summaries."""

    coefficients: np.ndarray
    covariance: np.ndarray
    column_names: tuple[str, ...]
    parametric: tuple[ParamStat, ...]
    smooths: tuple[SmoothStat, ...]
    deltas: tuple[float, ...]
    deviance: float
    null_deviance: float
    ubre: float
    adj_r2: float
    dev_explained: float
    tr_r: float
    n: int
    converged: bool
    iterations: int
    fitted: np.ndarray = field(repr=False)
    design: DesignBundle = field(repr=False)

    @property
    def smooth_edf(self) -> tuple[float, ...]:
        return tuple(s.edf for s in self.smooths)

    def coefficient(self, name: str) -> ParamStat:
        for stat in self.parametric:
            if stat.name == name:
                return stat
        known = [s.name for s in self.parametric]
        raise ValueError(f"unknown parametric term {name!r}; model has {known}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "converged": self.converged,
            "iterations": self.iterations,
            "deltas": list(self.deltas),
            "deviance": self.deviance,
            "null_deviance": self.null_deviance,
            "deviance_explained": self.dev_explained,
            "ubre": self.ubre,
            "adj_r2": self.adj_r2,
            "tr_r": self.tr_r,
            "parametric": [
                {"name": s.name, "estimate": s.estimate, "se": s.se,
                 "z": s.z, "p": s.p}
                for s in self.parametric
            ],
            "smooths": [
                {"name": s.name, "edf": s.edf, "chisq": s.chisq, "p": s.p}
                for s in self.smooths
            ],
        }


def fit_pirls(design: DesignBundle, counts, deltas=()) -> GamFit:
    """Penalized IRLS for the Poisson log-link model.

    Iterates working-response weighted least squares until the deviance
    change is below 1e-8 relative, then assembles effective degrees of
    freedom, the penalized covariance (scale fixed at 1), Wald z/p values
    for parametric terms, and approximate chi-square tests per smooth.
    """
    deltas = tuple(float(d) for d in deltas)
    if len(deltas) != len(design.smooth_slices):
        raise ValueError(
            f"need {len(design.smooth_slices)} smoothing parameters, "
            f"got {len(deltas)}"
        )
    if any(d < 0 for d in deltas):
        raise ValueError(f"smoothing parameters must be >= 0, got {deltas}")
    y = _check_counts(counts, design.n)
    b_mat = design.matrix
    pen = design.penalty_total(deltas)

    mu = y + 0.5
    eta = np.log(mu)
    dev = poisson_deviance(y, mu)
    trace: list[float] = [dev]
    converged = False
    iterations = 0
    for iterations in range(1, 101):
        w = mu
        wb = b_mat * w[:, None]
        normal = b_mat.T @ wb
        z = eta + (y - mu) / mu
        rhs = b_mat.T @ (w * z)
        try:
            beta = solve(normal + pen, rhs, assume_a="pos")
        except np.linalg.LinAlgError as exc:
            raise PirlsError(
                f"penalized normal equations are singular at deltas {deltas}",
                trace,
            ) from exc
        eta = np.clip(b_mat @ beta, -30.0, 30.0)
        mu = np.exp(eta)
        new_dev = poisson_deviance(y, mu)
        trace.append(new_dev)
        if abs(new_dev - dev) < 1e-8 * (abs(new_dev) + 0.1):
            dev = new_dev
            converged = True
            break
        dev = new_dev
    if not converged:
        raise PirlsError(
            f"PIRLS did not converge in 100 iterations at deltas {deltas}; "
            f"deviance trace tail {trace[-5:]}",
            trace,
        )

    w = mu
    normal = b_mat.T @ (b_mat * w[:, None])
    try:
        factor = cho_factor(normal + pen)
    except np.linalg.LinAlgError as exc:
        raise PirlsError(
            f"penalized information matrix is singular at deltas {deltas}",
            trace,
        ) from exc
    cov = cho_solve(factor, np.eye(design.q))
    edf_per_coef = np.einsum("ij,ji->i", cov, normal)
    tr_r = float(edf_per_coef.sum())

    se = np.sqrt(np.diag(cov))
    parametric = []
    for i in range(design.n_parametric):
        est = float(beta[i])
        s = float(se[i])
        zval = est / s if s > 0 else math.inf
        pval = float(erfc(abs(zval) / math.sqrt(2.0)))
        parametric.append(
            ParamStat(design.column_names[i], est, s, zval, pval)
        )

    smooth_stats = []
    for name, sl in zip(design.smooth_names, design.smooth_slices):
        theta = beta[sl]
        v_block = cov[sl, sl]
        chisq = float(theta @ np.linalg.pinv(v_block) @ theta)
        edf = float(edf_per_coef[sl].sum())
        df_test = max(1, math.ceil(edf))
        pval = float(chi2.sf(chisq, df_test))
        smooth_stats.append(SmoothStat(name, edf, chisq, pval))

    ybar = y.mean()
    null_dev = poisson_deviance(y, np.full(y.size, ybar))
    n = y.size
    ubre = dev / n + 2.0 * tr_r / n - 1.0
    dev_explained = 1.0 - dev / null_dev if null_dev > 0 else 1.0
    rss = float(np.sum((y - mu) ** 2))
    tss = float(np.sum((y - ybar) ** 2))
    if tss > 0 and n > tr_r:
        adj_r2 = 1.0 - (n - 1.0) / (n - tr_r) * rss / tss
    else:
        adj_r2 = math.nan

    return GamFit(
        coefficients=beta,
        covariance=cov,
        column_names=design.column_names,
        parametric=tuple(parametric),
        smooths=tuple(smooth_stats),
        deltas=deltas,
        deviance=dev,
        null_deviance=null_dev,
        ubre=ubre,
        adj_r2=adj_r2,
        dev_explained=dev_explained,
        tr_r=tr_r,
        n=n,
        converged=True,
        iterations=iterations,
        fitted=mu,
        design=design,
    )


def ubre_score(fit: GamFit) -> float:
    """(deviance + 2 * tr(R)) / n - 1 with the Poisson scale fixed at 1."""
    if not fit.converged:
        raise ValueError("UBRE is only defined for a converged fit")
    return fit.deviance / fit.n + 2.0 * fit.tr_r / fit.n - 1.0


class SelectionError(RuntimeError):
    """A grid fit failed during smoothing-parameter selection."""


def select_smoothing(design: DesignBundle, counts, grid=None) -> GamFit:
    """Coordinate descent over a log-spaced smoothing-parameter grid.

    For each smooth in turn the grid value minimizing UBRE is kept (ties
    go to the smaller delta); cycles repeat until a full pass changes
    nothing.  Fits are cached by delta vector, so two identical runs
    return identical results.
    """
    m = len(design.smooth_slices)
    if grid is None:
        grid = tuple(10.0**g for g in DEFAULT_LOG10_GRID)
    else:
        grid = tuple(sorted(float(g) for g in grid))
        if not grid or any(g < 0 for g in grid):
            raise ValueError("grid must be a nonempty set of deltas >= 0")
    if m == 0:
        return fit_pirls(design, counts, ())

    cache: dict[tuple[float, ...], GamFit] = {}

    def fit_at(deltas: tuple[float, ...]) -> GamFit:
        if deltas not in cache:
            try:
                cache[deltas] = fit_pirls(design, counts, deltas)
            except PirlsError as exc:
                raise SelectionError(
                    f"fit failed during selection at deltas {deltas}: {exc}"
                ) from exc
        return cache[deltas]

    start = 1.0 if 1.0 in grid else grid[len(grid) // 2]
    current = [start] * m
    for _ in range(100):
        changed = False
        for j in range(m):
            best_key = None
            best_delta = None
            for g in grid:
                cand = tuple(current[:j] + [g] + current[j + 1 :])
                fit = fit_at(cand)
                key = (fit.ubre, g)
                if best_key is None or key < best_key:
                    best_key = key
                    best_delta = g
            if best_delta != current[j]:
                current[j] = best_delta
                changed = True
        if not changed:
            break
    return fit_at(tuple(current))


class RelativeRisk(NamedTuple):
    rr: float
    lower: float
    upper: float


def relative_risk(fit: GamFit, exposure: str, increment: float) -> RelativeRisk:
    """exp(increment * beta) with a +-2 standard error interval."""
    stat = fit.coefficient(exposure)
    rr = math.exp(increment * stat.estimate)
    lower = math.exp(increment * (stat.estimate - 2.0 * stat.se))
    upper = math.exp(increment * (stat.estimate + 2.0 * stat.se))
    if lower > upper:
        lower, upper = upper, lower
    return RelativeRisk(rr=rr, lower=lower, upper=upper)


class ModelComparison(NamedTuple):
    deviance_diff: float
    df_diff: float
    p: float


def compare_models(fit_a: GamFit, fit_b: GamFit, tol: float = 1e-8) -> ModelComparison:
    """Approximate chi-square comparison of two fits on the same data.

    fit_b must spend more effective degrees of freedom; the deviance drop
    is referred to a chi-square with the (fractional) edf difference.
    Identical fits compare as p = 1.
    """
    ddf = fit_b.tr_r - fit_a.tr_r
    ddev = fit_a.deviance - fit_b.deviance
    if ddf < -tol:
        raise ValueError(
            f"fit_b has fewer effective degrees of freedom (df diff {ddf:.3g}); "
            "swap the arguments"
        )
    if ddf <= tol:
        if abs(ddev) <= tol * (1.0 + abs(fit_a.deviance)):
            return ModelComparison(deviance_diff=ddev, df_diff=ddf, p=1.0)
        raise ValueError(
            f"fits have equal effective degrees of freedom (df diff {ddf:.3g}) "
            f"but different deviance ({ddev:.6g}); not a nested comparison"
        )
    p = float(chi2.sf(ddev, ddf)) if ddev > 0 else 1.0
    return ModelComparison(deviance_diff=ddev, df_diff=ddf, p=p)


def _fmt_p(p: float) -> str:
    if p < 2e-16:
        return "<2e-16"
    return f"{p:.6g}"


def format_fit_table(fit: GamFit) -> str:
    """Plain-text report: parametric block, smooth block, global scores."""
    lines = ["Parametric coefficients:"]
    name_w = max(len(s.name) for s in fit.parametric)
    header = (
        f"{'':{name_w}}  {'Estimate':>12}  {'Std. Error':>12}  "
        f"{'z value':>8}  {'Pr(>|z|)':>9}"
    )
    lines.append(header)
    for s in fit.parametric:
        lines.append(
            f"{s.name:{name_w}}  {s.estimate:>12.7f}  {s.se:>12.7f}  "
            f"{s.z:>8.3f}  {_fmt_p(s.p):>9}"
        )
    if fit.smooths:
        lines.append("")
        lines.append("Approximate significance of smooth terms:")
        sm_w = max(len(f"s({s.name})") for s in fit.smooths)
        lines.append(
            f"{'':{sm_w}}  {'edf':>7}  {'Chi.sq':>10}  {'p-value':>9}  {'delta':>10}"
        )
        for s, delta in zip(fit.smooths, fit.deltas):
            lines.append(
                f"{f's({s.name})':{sm_w}}  {s.edf:>7.3f}  {s.chisq:>10.3f}  "
                f"{_fmt_p(s.p):>9}  {delta:>10.4g}"
            )
    lines.append("")
    lines.append(
        f"R-sq.(adj) = {fit.adj_r2:.3f} (approximate)   "
        f"Deviance explained = {100.0 * fit.dev_explained:.1f}%"
    )
    lines.append(
        f"UBRE score = {fit.ubre:.5f}   Scale est. = 1   n = {fit.n}"
    )
    return "\n".join(lines) + "\n"
