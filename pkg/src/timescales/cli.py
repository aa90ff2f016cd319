"""Pipeline command line: preprocess, ssa, fft, fit, compare, simulate.

All subcommands read a JSON config (``--config``) and write artifacts into
an output directory (``--out`` or config ``out_dir``).  Every run writes a
``manifest.json`` with the package version and a hash of the effective
config, and re-running with identical config and inputs produces
byte-identical artifacts.  Failures print a machine-readable JSON error
record to stderr and exit nonzero (2 for config problems, 1 otherwise).

Config layout (sections are per subcommand; unknown keys are ignored)::

    {
      "seed": 0,
      "out_dir": "out",
      "preprocess": {
        "inputs": {"pm10": "pm10_raw.csv"},
        "availability_threshold": 0.75,
        "imputation_window_days": 15,
        "outlier_remove_count": 5
      },
      "ssa": {
        "input": "pm10_daily.csv",
        "window_length": 60, "groups": 5, "rank_tol": 1e-12,
        "merge_mode": "floor", "epsilon": 0.25,
        "regroup": [{"op": "split", "group": 1, "into": [[1], [2, 3]]},
                    {"op": "merge", "groups": [1, 2]}]
      },
      "fft": {"input": "pm10_daily.csv", "breaks": [1, 19, 41, 83, 165, 579]},
      "fit": {
        "counts": "deaths.csv",
        "exposures": ["out/components/G1.csv", "out/components/G2.csv"],
        "use_dow": true,
        "smooths": [{"name": "time", "source": "index", "basis_dim": 10}],
        "grid_log10": {"start": -3.0, "stop": 6.0, "step": 0.5}
      },
      "compare": {"fits": ["a/fit.json", "b/fit.json"], "labels": ["A", "B"]},
      "simulate": {
        "scenario": {"n": 503, "harmonics": [[20.0, 12.0, 0.0], [10.0, 6.0, 0.0]],
                     "trend": [], "noise_sd": 0.0,
                     "planted_betas": [0.001, 0.004],
                     "dow_effects": [-0.02, 0.01, 0.0, 0.03, 0.05, -0.04],
                     "intercept": 2.9957322735539909},
        "window_length": 84, "groups": 2, "merge_mode": "floor",
        "epsilon": 0.25, "rank_tol": 1e-12, "recovery_tol": 1e-6,
        "use_dow": true
      }
    }

The simulate seed is the top-level ``seed``; no other entropy exists.
Set the TIMESCALES_LOG environment variable (debug/info/warning) for
progress logging on stderr.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path
from types import SimpleNamespace

import click
import numpy as np

from . import __version__
from .fftband import BandSpec, band_decompose
from .gam import (
    ModelSpec,
    SmoothSpec,
    build_design,
    compare_models,
    format_fit_table,
    select_smoothing,
)
from .grouping import (
    build_grouping,
    cluster_groups,
    edit_from_dict,
    grouping_summary,
    linkage_heights,
    merge_nonidentifiable,
    regroup,
    to_exposures,
    wcorr_matrix,
)
from .io import (
    jsonable_floats,
    read_json,
    read_panel_csv,
    read_series_csv,
    write_json,
    write_panel_csv,
    write_series_csv,
)
from .series import (
    DAILY,
    StationPanel,
    TimeSeries,
    aggregate_daily,
    impute_causal_ma_details,
    screen_outliers,
    spatial_average,
)
from .ssa import decompose, embed
from .synth import (
    Harmonic,
    SynthScenario,
    gen_harmonic_series,
    gen_poisson_counts,
    weekday_vector,
)

log = logging.getLogger("timescales")

DEFAULT_SIMULATE = {
    "scenario": {
        "n": 503,
        "harmonics": [[20.0, 12.0, 0.0], [10.0, 6.0, 0.0]],
        "trend": [],
        "noise_sd": 0.0,
        "planted_betas": [0.001, 0.004],
        "dow_effects": [-0.02, 0.01, 0.0, 0.03, 0.05, -0.04],
        "intercept": math.log(20.0),
    },
    "window_length": 84,
    "groups": 2,
    "merge_mode": "floor",
    "epsilon": 0.25,
    "rank_tol": 1e-12,
    "recovery_tol": 1e-6,
    "use_dow": True,
}


class ConfigError(Exception):
    """Every violated config constraint, collected in one pass."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


def _setup_logging() -> None:
    level_name = os.environ.get("TIMESCALES_LOG", "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(kind: str, payload: dict, code: int):
    record = {"error": kind}
    record.update(payload)
    click.echo(json.dumps(record, sort_keys=True), err=True)
    sys.exit(code)


def _load_config(path: str) -> dict:
    problems = []
    p = Path(path)
    if not p.is_file():
        _fail("config", {"problems": [f"config file not found: {path}"]}, 2)
    try:
        with open(p, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        _fail("config", {"problems": [f"config is not valid JSON: {exc}"]}, 2)
    if not isinstance(data, dict):
        problems.append("config root must be a JSON object")
        _fail("config", {"problems": problems}, 2)
    return data


def _effective(config: dict, section: str, overrides: dict) -> dict:
    """Section dict with non-None CLI overrides applied on top."""
    sec = dict(config.get(section, {}))
    for key, value in overrides.items():
        if value is not None:
            sec[key] = value
    return sec


def _config_hash(effective: dict) -> str:
    canonical = json.dumps(jsonable_floats(effective), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_manifest(out: Path, subcommand: str, effective: dict) -> None:
    write_json(out / "manifest.json", {
        "subcommand": subcommand,
        "package_version": __version__,
        "config_sha256": _config_hash(effective),
        "seed": effective.get("seed"),
    })


def _out_dir(config: dict, out_override: str | None) -> Path:
    out = Path(out_override) if out_override else Path(config.get("out_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need_file(problems: list[str], label: str, value) -> Path | None:
    if not isinstance(value, str) or not value:
        problems.append(f"{label} must be a file path, got {value!r}")
        return None
    p = Path(value)
    if not p.is_file():
        problems.append(f"{label} file not found: {value}")
        return None
    return p


def _need_number(problems, label, value, lo=None, hi=None, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if ok and integer and int(value) != value:
        ok = False
    if ok and lo is not None and value < lo:
        ok = False
    if ok and hi is not None and value > hi:
        ok = False
    if not ok:
        bounds = []
        if integer:
            bounds.append("integer")
        if lo is not None:
            bounds.append(f">= {lo}")
        if hi is not None:
            bounds.append(f"<= {hi}")
        problems.append(f"{label} must be a number ({', '.join(bounds)}), "
                        f"got {value!r}")
        return None
    return int(value) if integer else float(value)


def _run(subcommand: str, body) -> None:
    """Shared error envelope: config errors exit 2, run errors exit 1."""
    _setup_logging()
    try:
        body()
    except ConfigError as exc:
        _fail("config", {"problems": exc.problems}, 2)
    except (ValueError, RuntimeError, OSError) as exc:
        _fail(type(exc).__name__, {"message": str(exc),
                                   "subcommand": subcommand}, 1)


@click.group()
@click.option("--config", "config_path", required=True,
              type=click.Path(), help="JSON config file.")
@click.option("--out", "out_override", default=None,
              type=click.Path(), help="Output directory (overrides config).")
@click.pass_context
def main(ctx, config_path, out_override):
    """Timescale decomposition and regression pipeline."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["out_override"] = out_override


@main.command()
@click.pass_context
def preprocess(ctx):
    """Aggregate, screen, spatially average, and impute raw inputs."""
    def body():
        config = _load_config(ctx.obj["config_path"])
        sec = _effective(config, "preprocess", {})
        problems: list[str] = []
        inputs = sec.get("inputs")
        if not isinstance(inputs, dict) or not inputs:
            problems.append("preprocess.inputs must map variable names to CSV paths")
            inputs = {}
        paths = {}
        for name, value in inputs.items():
            p = _need_file(problems, f"preprocess.inputs[{name!r}]", value)
            if p is not None:
                paths[name] = p
        threshold = _need_number(problems, "preprocess.availability_threshold",
                                 sec.get("availability_threshold", 0.75),
                                 lo=0.0, hi=1.0)
        if threshold == 0.0:
            problems.append("preprocess.availability_threshold must be > 0")
        window = _need_number(problems, "preprocess.imputation_window_days",
                              sec.get("imputation_window_days", 15),
                              lo=1, integer=True)
        remove = _need_number(problems, "preprocess.outlier_remove_count",
                              sec.get("outlier_remove_count", 5),
                              lo=0, integer=True)
        if problems:
            raise ConfigError(problems)

        out = _out_dir(config, ctx.obj["out_override"])
        effective = {"seed": config.get("seed", 0), "preprocess": sec}
        report = {}
        for name, path in sorted(paths.items()):
            log.info("preprocessing %s from %s", name, path)
            entry = {"source": str(path)}
            panel = None
            try:
                panel = read_panel_csv(path)
                if panel.n_stations == 1:
                    single = panel.series[0]
                    panel = None
            except ValueError:
                single = read_series_csv(path)
            if panel is not None:
                if panel.step != DAILY:
                    daily = tuple(aggregate_daily(s, threshold) for s in panel.series)
                    panel = StationPanel(series=daily, station_ids=panel.station_ids)
                entry["n_stations"] = panel.n_stations
                if remove > 0:
                    panel, screen_report = screen_outliers(panel, remove)
                    entry["outliers"] = screen_report.to_dict()
                write_panel_csv(out / f"{name}_stations.csv", panel)
                series = spatial_average(panel, name=name)
            else:
                if single.step != DAILY:
                    single = aggregate_daily(single, threshold)
                series = single.with_values(single.values, name=name)
            entry["n_days"] = series.n
            entry["n_missing_before_imputation"] = series.n_missing
            filled, imp_report = impute_causal_ma_details(series, window)
            entry["imputation"] = imp_report
            write_series_csv(out / f"{name}_daily.csv", filled)
            report[name] = entry
        write_json(out / "preprocess_report.json", jsonable_floats(report))
        _write_manifest(out, "preprocess", effective)
        click.echo(f"preprocessed {len(report)} variable(s) into {out}")
    _run("preprocess", body)


def _ssa_artifacts(out: Path, series: TimeSeries, window: int, groups: int,
                   rank_tol: float, merge_mode: str, epsilon: float,
                   edits: list) -> tuple:
    """Shared by the ssa and simulate subcommands; returns (dec, final)."""
    traj = embed(series, window)
    dec = decompose(traj, rank_tol=rank_tol)
    log.info("decomposed: d=%d retained eigentriples", dec.d)

    with open(out / "singular_values.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("rank,sigma,lambda,share\n")
        shares = dec.shares
        for i, triple in enumerate(dec.triples):
            fh.write(f"{triple.index},{triple.sigma!r},"
                     f"{triple.eigenvalue!r},{shares[i]!r}\n")

    write_json(out / "decomposition.json", jsonable_floats({
        "L": traj.L,
        "K": traj.K,
        "N": traj.source_length,
        "lambda": list(dec.eigenvalues),
        "shares": list(dec.shares),
        "elementary": [t.series for t in dec.triples],
    }))

    w = wcorr_matrix(dec)
    with open(out / "wmatrix.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(f"triple_{i + 1}" for i in range(w.d)) + "\n")
        for row in w.entries:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")

    if groups > dec.d:
        raise ValueError(
            f"requested {groups} groups but only {dec.d} eigentriples retained"
        )
    partition = cluster_groups(w, groups)
    initial = build_grouping(dec, partition)
    merged = None
    final = initial
    if merge_mode != "none":
        merged = merge_nonidentifiable(initial, dec, merge_mode, epsilon)
        final = merged
    if edits:
        final = regroup(final, dec, [edit_from_dict(e) for e in edits])

    components_dir = out / "components"
    components_dir.mkdir(exist_ok=True)
    for label, component in zip(final.labels, final.components):
        write_series_csv(
            components_dir / f"{label}.csv",
            TimeSeries(start=series.start, step=series.step,
                       values=component, name=label),
        )
    write_json(out / "grouping.json", jsonable_floats({
        "window_length": window,
        "merge_mode": merge_mode,
        "epsilon": epsilon if merge_mode == "pearson" else None,
        "linkage_heights": list(linkage_heights(w)),
        "initial": grouping_summary(initial, dec),
        "after_merge": grouping_summary(merged, dec) if merged is not None else None,
        "final": grouping_summary(final, dec),
    }))
    return dec, final


@main.command()
@click.option("--window-length", type=int, default=None,
              help="Override ssa.window_length.")
@click.option("--groups", type=int, default=None, help="Override ssa.groups.")
@click.option("--epsilon", type=float, default=None, help="Override ssa.epsilon.")
@click.pass_context
def ssa(ctx, window_length, groups, epsilon):
    """Decompose a daily series and write grouping artifacts."""
    def body():
        config = _load_config(ctx.obj["config_path"])
        sec = _effective(config, "ssa", {
            "window_length": window_length,
            "groups": groups,
            "epsilon": epsilon,
        })
        problems: list[str] = []
        path = _need_file(problems, "ssa.input", sec.get("input"))
        window = _need_number(problems, "ssa.window_length",
                              sec.get("window_length", 60), lo=2, integer=True)
        n_groups = _need_number(problems, "ssa.groups",
                                sec.get("groups", 5), lo=1, integer=True)
        rank_tol = _need_number(problems, "ssa.rank_tol",
                                sec.get("rank_tol", 1e-12), lo=0.0)
        merge_mode = sec.get("merge_mode", "floor")
        if merge_mode not in ("floor", "pearson", "none"):
            problems.append(
                f"ssa.merge_mode must be floor|pearson|none, got {merge_mode!r}"
            )
        eps = _need_number(problems, "ssa.epsilon", sec.get("epsilon", 0.25),
                           lo=0.0, hi=1.0)
        edits = sec.get("regroup", [])
        if not isinstance(edits, list):
            problems.append("ssa.regroup must be a list of edit objects")
            edits = []
        series = None
        if path is not None:
            series = read_series_csv(path)
            if not series.is_complete():
                problems.append(
                    f"ssa.input series has {series.n_missing} missing values; "
                    "run preprocess first"
                )
            elif window is not None and window > (series.n + 1) // 2:
                problems.append(
                    f"ssa.window_length {window} exceeds ceil(n/2) = "
                    f"{(series.n + 1) // 2} for n = {series.n}"
                )
        if problems:
            raise ConfigError(problems)

        out = _out_dir(config, ctx.obj["out_override"])
        _ssa_artifacts(out, series, window, n_groups, rank_tol,
                       merge_mode, eps, edits)
        _write_manifest(out, "ssa", {"seed": config.get("seed", 0), "ssa": sec})
        click.echo(f"ssa artifacts written to {out}")
    _run("ssa", body)


@main.command()
@click.option("--breaks", default=None,
              help="Override fft.breaks (comma-separated days).")
@click.pass_context
def fft(ctx, breaks):
    """Decompose a daily series into Fourier period bands."""
    def body():
        config = _load_config(ctx.obj["config_path"])
        override = None
        problems: list[str] = []
        if breaks is not None:
            try:
                override = [float(tok) for tok in breaks.split(",") if tok.strip()]
            except ValueError:
                problems.append(f"--breaks must be comma-separated numbers, "
                                f"got {breaks!r}")
        sec = _effective(config, "fft", {"breaks": override})
        path = _need_file(problems, "fft.input", sec.get("input"))
        raw_breaks = sec.get("breaks")
        spec = None
        if not isinstance(raw_breaks, list) or len(raw_breaks) < 2:
            problems.append("fft.breaks must be a list of at least two numbers")
        else:
            try:
                spec = BandSpec(breaks=tuple(float(b) for b in raw_breaks))
            except (TypeError, ValueError) as exc:
                problems.append(f"fft.breaks invalid: {exc}")
        series = None
        if path is not None:
            series = read_series_csv(path)
            if not series.is_complete():
                problems.append(
                    f"fft.input series has {series.n_missing} missing values; "
                    "run preprocess first"
                )
            elif spec is not None and spec.breaks[-1] > series.n:
                problems.append(
                    f"fft.breaks last value {spec.breaks[-1]} exceeds series "
                    f"length {series.n}"
                )
        if problems:
            raise ConfigError(problems)

        out = _out_dir(config, ctx.obj["out_override"])
        bands = band_decompose(series, spec)
        bands_dir = out / "bands"
        bands_dir.mkdir(exist_ok=True)
        for i, name in enumerate(bands.names):
            write_series_csv(
                bands_dir / f"{name}.csv",
                TimeSeries(start=series.start, step=series.step,
                           values=bands.values[i], name=name),
            )
        write_json(out / "bands.json", jsonable_floats({
            "breaks": list(spec.breaks),
            "n": series.n,
            "bands": [
                {"name": name, **meta}
                for name, meta in zip(bands.names, bands.meta)
            ],
        }))
        _write_manifest(out, "fft", {"seed": config.get("seed", 0), "fft": sec})
        click.echo(f"fft band artifacts written to {out}")
    _run("fft", body)


def _read_aligned_series(problems, label, path, counts):
    series = read_series_csv(path)
    if series.n != counts.n or series.start != counts.start:
        problems.append(
            f"{label} ({path}) is not aligned with the counts series "
            f"(start {series.start} vs {counts.start}, n {series.n} vs {counts.n})"
        )
    if not series.is_complete():
        problems.append(f"{label} ({path}) has missing values")
    return series


def _grid_from_config(problems, sec):
    grid_cfg = sec.get("grid_log10")
    if grid_cfg is None:
        return None
    start = _need_number(problems, "fit.grid_log10.start", grid_cfg.get("start"))
    stop = _need_number(problems, "fit.grid_log10.stop", grid_cfg.get("stop"))
    step = _need_number(problems, "fit.grid_log10.step", grid_cfg.get("step"))
    if None in (start, stop, step) or step <= 0 or stop < start:
        problems.append("fit.grid_log10 must define start <= stop and step > 0")
        return None
    exponents = np.arange(start, stop + step / 2, step)
    return tuple(10.0**e for e in exponents)


def _build_fit(problems, sec, counts):
    exposures_cfg = sec.get("exposures", [])
    paths: list[Path] = []
    if isinstance(exposures_cfg, str):
        folder = Path(exposures_cfg)
        if folder.is_dir():
            paths = sorted(folder.glob("*.csv"))
            if not paths:
                problems.append(f"fit.exposures directory {folder} has no CSV files")
        else:
            problems.append(f"fit.exposures directory not found: {exposures_cfg}")
    elif isinstance(exposures_cfg, list):
        for item in exposures_cfg:
            p = _need_file(problems, "fit.exposures entry", item)
            if p is not None:
                paths.append(p)
    else:
        problems.append("fit.exposures must be a directory or a list of CSV paths")

    exposure_arrays = {}
    for p in paths:
        s = _read_aligned_series(problems, "fit exposure", p, counts)
        if s.name in exposure_arrays:
            problems.append(f"duplicate exposure name {s.name!r} from {p}")
        exposure_arrays[s.name] = s.values

    smooths = []
    smooth_cfg = sec.get("smooths", [])
    if not isinstance(smooth_cfg, list):
        problems.append("fit.smooths must be a list")
        smooth_cfg = []
    for item in smooth_cfg:
        if not isinstance(item, dict) or "name" not in item or "source" not in item:
            problems.append(f"fit.smooths entries need name and source, got {item!r}")
            continue
        basis_dim = _need_number(problems, f"fit.smooths[{item['name']}].basis_dim",
                                 item.get("basis_dim", 10), lo=3, integer=True)
        if item["source"] == "index":
            values = np.arange(counts.n, dtype=float)
        else:
            p = _need_file(problems, f"fit.smooths[{item['name']}].source",
                           item["source"])
            if p is None:
                continue
            values = _read_aligned_series(problems, "fit smooth covariate",
                                          p, counts).values
        if basis_dim is not None:
            smooths.append(SmoothSpec(str(item["name"]), values, basis_dim))

    weekdays = None
    if sec.get("use_dow", True):
        weekdays = weekday_vector(counts.start, counts.n)
    return ModelSpec.from_arrays(exposure_arrays, weekdays=weekdays,
                                 smooths=smooths)


@main.command()
@click.pass_context
def fit(ctx):
    """Regress daily counts on exposure series with optional smooths."""
    def body():
        config = _load_config(ctx.obj["config_path"])
        sec = _effective(config, "fit", {})
        problems: list[str] = []
        counts_path = _need_file(problems, "fit.counts", sec.get("counts"))
        counts = None
        spec = None
        grid = None
        if counts_path is not None:
            counts = read_series_csv(counts_path)
            if not counts.is_complete():
                problems.append(f"fit.counts has {counts.n_missing} missing values")
            spec = _build_fit(problems, sec, counts)
            grid = _grid_from_config(problems, sec)
        if problems:
            raise ConfigError(problems)

        out = _out_dir(config, ctx.obj["out_override"])
        design = build_design(spec, counts.values)
        log.info("design: %d rows, %d columns, %d smooths",
                 design.n, design.q, len(design.smooth_slices))
        result = select_smoothing(design, counts.values, grid=grid)
        payload = result.to_dict()
        payload["counts_file"] = str(counts_path)
        payload["exposure_names"] = [
            s.name for s in result.parametric[1:]
            if not s.name.startswith("dow_")
        ]
        write_json(out / "fit.json", jsonable_floats(payload))
        with open(out / "fit.txt", "w", encoding="utf-8", newline="") as fh:
            fh.write(format_fit_table(result))
        _write_manifest(out, "fit", {"seed": config.get("seed", 0), "fit": sec})
        click.echo(f"fit artifacts written to {out}")
    _run("fit", body)


@main.command()
@click.pass_context
def compare(ctx):
    """Rank fitted models by UBRE and run chi-square comparisons."""
    def body():
        config = _load_config(ctx.obj["config_path"])
        sec = _effective(config, "compare", {})
        problems: list[str] = []
        fits_cfg = sec.get("fits")
        if not isinstance(fits_cfg, list) or len(fits_cfg) < 2:
            problems.append("compare.fits must list at least two fit.json paths")
            fits_cfg = []
        labels = sec.get("labels")
        if labels is not None and (
            not isinstance(labels, list) or len(labels) != len(fits_cfg)
        ):
            problems.append("compare.labels must match compare.fits in length")
            labels = None
        models = []
        for i, item in enumerate(fits_cfg):
            p = _need_file(problems, f"compare.fits[{i}]", item)
            if p is None:
                continue
            data = read_json(p)
            for key in ("ubre", "deviance", "tr_r", "n"):
                if key not in data:
                    problems.append(f"{p} lacks field {key!r}; not a fit artifact")
            label = labels[i] if labels else Path(item).parent.name or f"model_{i+1}"
            models.append(SimpleNamespace(label=label, path=str(p), **{
                k: data.get(k) for k in ("ubre", "deviance", "tr_r", "n")
            }))
        sizes = {m.n for m in models if m.n is not None}
        if len(sizes) > 1:
            problems.append(f"fits disagree on n: {sorted(sizes)}; "
                            "comparisons need a common data set")
        if problems:
            raise ConfigError(problems)

        out = _out_dir(config, ctx.obj["out_override"])
        ranked = sorted(models, key=lambda m: (m.ubre, m.label))
        tests = []
        for a in range(len(ranked)):
            for b in range(a + 1, len(ranked)):
                lo, hi = ranked[a], ranked[b]
                if hi.tr_r < lo.tr_r:
                    lo, hi = hi, lo
                try:
                    cmp_result = compare_models(lo, hi)
                    tests.append({
                        "simpler": lo.label, "richer": hi.label,
                        "deviance_diff": cmp_result.deviance_diff,
                        "df_diff": cmp_result.df_diff,
                        "p": cmp_result.p,
                    })
                except ValueError as exc:
                    tests.append({
                        "simpler": lo.label, "richer": hi.label,
                        "skipped": str(exc),
                    })
        write_json(out / "comparison.json", jsonable_floats({
            "ranked": [
                {"label": m.label, "path": m.path, "ubre": m.ubre,
                 "deviance": m.deviance, "tr_r": m.tr_r, "n": m.n}
                for m in ranked
            ],
            "tests": tests,
        }))
        lines = ["Models by UBRE (ascending):"]
        for m in ranked:
            lines.append(f"  {m.label}: UBRE = {m.ubre:.5f}, "
                         f"deviance = {m.deviance:.4f}, edf = {m.tr_r:.3f}")
        with open(out / "comparison.txt", "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
        _write_manifest(out, "compare",
                        {"seed": config.get("seed", 0), "compare": sec})
        click.echo(f"comparison artifacts written to {out}")
    _run("compare", body)


def _scenario_from_config(problems, sim_sec, seed: int) -> SynthScenario | None:
    sc_cfg = dict(DEFAULT_SIMULATE["scenario"])
    sc_cfg.update(sim_sec.get("scenario", {}))
    n = _need_number(problems, "simulate.scenario.n", sc_cfg.get("n"),
                     lo=2, integer=True)
    harmonics = []
    raw_harmonics = sc_cfg.get("harmonics", [])
    if not isinstance(raw_harmonics, list):
        problems.append("simulate.scenario.harmonics must be a list")
        raw_harmonics = []
    for i, item in enumerate(raw_harmonics):
        if not isinstance(item, list) or len(item) not in (2, 3):
            problems.append(
                f"simulate.scenario.harmonics[{i}] must be "
                f"[amplitude, period] or [amplitude, period, phase]"
            )
            continue
        try:
            harmonics.append(Harmonic(*[float(v) for v in item]))
        except (TypeError, ValueError) as exc:
            problems.append(f"simulate.scenario.harmonics[{i}]: {exc}")
    noise_sd = _need_number(problems, "simulate.scenario.noise_sd",
                            sc_cfg.get("noise_sd", 0.0), lo=0.0)
    intercept = _need_number(problems, "simulate.scenario.intercept",
                             sc_cfg.get("intercept", math.log(20.0)))
    if problems or n is None:
        return None
    try:
        return SynthScenario(
            n=n,
            harmonics=tuple(harmonics),
            trend_coeffs=tuple(sc_cfg.get("trend", [])),
            noise_sd=noise_sd,
            planted_betas=tuple(sc_cfg.get("planted_betas", [])),
            dow_effects=tuple(sc_cfg.get("dow_effects", [0.0] * 6)),
            intercept=intercept,
            seed=seed,
        )
    except (TypeError, ValueError) as exc:
        problems.append(f"simulate.scenario invalid: {exc}")
        return None


@main.command()
@click.option("--window-length", type=int, default=None,
              help="Override simulate.window_length.")
@click.option("--groups", type=int, default=None,
              help="Override simulate.groups.")
@click.option("--epsilon", type=float, default=None,
              help="Override simulate.epsilon.")
@click.option("--seed", type=int, default=None, help="Override config seed.")
@click.pass_context
def simulate(ctx, window_length, groups, epsilon, seed):
    """Run a synthetic scenario end to end and score recovery."""
    def body():
        config = _load_config(ctx.obj["config_path"])
        effective_seed = seed if seed is not None else config.get("seed", 0)
        if not isinstance(effective_seed, int) or isinstance(effective_seed, bool):
            raise ConfigError([f"seed must be an integer, got {effective_seed!r}"])
        merged = dict(DEFAULT_SIMULATE)
        merged.update(config.get("simulate", {}))
        sec = _effective({"simulate": merged}, "simulate", {
            "window_length": window_length,
            "groups": groups,
            "epsilon": epsilon,
        })
        problems: list[str] = []
        scenario = _scenario_from_config(problems, sec, effective_seed)
        window = _need_number(problems, "simulate.window_length",
                              sec.get("window_length"), lo=2, integer=True)
        n_groups = _need_number(problems, "simulate.groups",
                                sec.get("groups"), lo=1, integer=True)
        rank_tol = _need_number(problems, "simulate.rank_tol",
                                sec.get("rank_tol", 1e-12), lo=0.0)
        recovery_tol = _need_number(problems, "simulate.recovery_tol",
                                    sec.get("recovery_tol", 1e-6), lo=0.0)
        merge_mode = sec.get("merge_mode", "floor")
        if merge_mode not in ("floor", "pearson", "none"):
            problems.append(
                f"simulate.merge_mode must be floor|pearson|none, "
                f"got {merge_mode!r}"
            )
        eps = _need_number(problems, "simulate.epsilon",
                           sec.get("epsilon", 0.25), lo=0.0, hi=1.0)
        if scenario is not None and window is not None:
            if window > (scenario.n + 1) // 2:
                problems.append(
                    f"simulate.window_length {window} exceeds ceil(n/2) = "
                    f"{(scenario.n + 1) // 2}"
                )
        if scenario is not None and not scenario.planted_betas:
            problems.append("simulate.scenario.planted_betas must be nonempty")
        if problems:
            raise ConfigError(problems)

        out = _out_dir(config, ctx.obj["out_override"])
        series, components = gen_harmonic_series(scenario)
        write_series_csv(out / "series.csv", series)
        true_dir = out / "true_components"
        true_dir.mkdir(exist_ok=True)
        for name, values in components.items():
            write_series_csv(true_dir / f"{name}.csv",
                             TimeSeries(start=scenario.start, step=DAILY,
                                        values=values, name=name))
        signal_names = scenario.signal_names()
        signal = [components[name] for name in signal_names]
        counts = gen_poisson_counts(signal, scenario.planted_betas,
                                    scenario.dow_effects, scenario.intercept,
                                    scenario.seed, start=scenario.start)
        write_series_csv(out / "counts.csv", counts)

        dec, final = _ssa_artifacts(out, series, window, n_groups, rank_tol,
                                    merge_mode, eps, sec.get("regroup", []))

        sum_error = float(np.max(np.abs(
            np.sum(final.components, axis=0) - series.values
        )))
        component_rows = []
        matched: dict[str, int] = {}
        for name in signal_names:
            true = components[name]
            corrs = [abs(_safe_corr(true, c)) for c in final.components]
            best = int(np.argmax(corrs))
            matched[name] = best
            err = float(np.max(np.abs(final.components[best] - true)))
            row = {
                "true_component": name,
                "matched_group": final.labels[best],
                "abs_correlation": corrs[best],
                "max_abs_error": err,
            }
            if scenario.noise_sd == 0:
                row["pass"] = err <= recovery_tol
            else:
                row["pass"] = None
            component_rows.append(row)

        expo = to_exposures(final, dec)
        weekdays = weekday_vector(scenario.start, scenario.n)
        use_dow = bool(sec.get("use_dow", True))
        design = build_design(
            ModelSpec(exposures=expo, weekdays=weekdays if use_dow else None),
            counts.values,
        )
        result = select_smoothing(design, counts.values)
        write_json(out / "fit.json", jsonable_floats(result.to_dict()))
        with open(out / "fit.txt", "w", encoding="utf-8", newline="") as fh:
            fh.write(format_fit_table(result))

        beta_rows = []
        for name, beta_true in zip(signal_names, scenario.planted_betas):
            label = final.labels[matched[name]]
            stat = result.coefficient(label)
            covered = (
                stat.estimate - 2 * stat.se
                <= beta_true
                <= stat.estimate + 2 * stat.se
            )
            beta_rows.append({
                "true_component": name,
                "matched_group": label,
                "true_beta": beta_true,
                "estimate": stat.estimate,
                "se": stat.se,
                "covered": covered,
            })

        component_pass = all(r["pass"] is not False for r in component_rows)
        beta_pass = all(r["covered"] for r in beta_rows)
        overall = bool(component_pass and beta_pass
                       and sum_error <= 1e-8 * (1 + float(np.max(np.abs(series.values)))))
        write_json(out / "recovery_report.json", jsonable_floats({
            "seed": effective_seed,
            "scenario_n": scenario.n,
            "noise_sd": scenario.noise_sd,
            "recovery_tol": recovery_tol,
            "component_sum_max_error": sum_error,
            "components": component_rows,
            "betas": beta_rows,
            "overall_pass": overall,
        }))
        _write_manifest(out, "simulate",
                        {"seed": effective_seed, "simulate": sec})
        if not overall:
            raise RuntimeError(
                f"recovery failed; see {out / 'recovery_report.json'}"
            )
        click.echo(f"simulate artifacts written to {out} (recovery pass)")
    _run("simulate", body)


def _safe_corr(a: np.ndarray, b: np.ndarray) -> float:
    am = a - a.mean()
    bm = b - b.mean()
    denom = math.sqrt(float(am @ am) * float(bm @ bm))
    if denom == 0.0:
        return 0.0
    return float(am @ bm) / denom


if __name__ == "__main__":
    main()
