"""Timescale decomposition of daily series with Poisson regression.

The pipeline: preprocess raw station records to a complete daily series,
decompose it into timescale components (singular spectrum analysis with
w-correlation grouping, or FFT period bands), then regress daily event
counts on the components with spline-smoothed confounders, selecting
smoothing parameters by UBRE.
"""

from .fftband import BandSpec, band_decompose
from .gam import (
    DesignBundle,
    GamFit,
    ModelComparison,
    ModelSpec,
    RelativeRisk,
    SmoothSpec,
    build_design,
    compare_models,
    fit_pirls,
    format_fit_table,
    relative_risk,
    select_smoothing,
    ubre_score,
)
from .grouping import (
    Grouping,
    MergeEdit,
    PeriodEstimate,
    SplitEdit,
    WMatrix,
    build_grouping,
    cluster_groups,
    edit_from_dict,
    estimate_period,
    grouping_summary,
    linkage_heights,
    merge_nonidentifiable,
    regroup,
    to_exposures,
    wcorr_matrix,
)
from .io import (
    read_json,
    read_panel_csv,
    read_series_csv,
    write_json,
    write_panel_csv,
    write_series_csv,
)
from .series import (
    BI_HOURLY,
    DAILY,
    HOURLY,
    ExposureSet,
    OutlierReport,
    StationPanel,
    TimeSeries,
    aggregate_daily,
    impute_causal_ma,
    impute_causal_ma_details,
    screen_outliers,
    spatial_average,
)
from .ssa import (
    Decomposition,
    Eigentriple,
    TrajectoryMatrix,
    decompose,
    diagonal_counts,
    eigenvalue_share,
    embed,
    hankelize,
    reconstruct,
)
from .synth import (
    Harmonic,
    SynthScenario,
    gen_harmonic_series,
    gen_poisson_counts,
    weekday_vector,
)

__version__ = "0.1.0"

__all__ = [
    "BI_HOURLY",
    "BandSpec",
    "DAILY",
    "Decomposition",
    "DesignBundle",
    "Eigentriple",
    "ExposureSet",
    "GamFit",
    "Grouping",
    "HOURLY",
    "Harmonic",
    "MergeEdit",
    "ModelComparison",
    "ModelSpec",
    "OutlierReport",
    "PeriodEstimate",
    "RelativeRisk",
    "SmoothSpec",
    "SplitEdit",
    "StationPanel",
    "SynthScenario",
    "TimeSeries",
    "TrajectoryMatrix",
    "WMatrix",
    "aggregate_daily",
    "band_decompose",
    "build_design",
    "build_grouping",
    "cluster_groups",
    "compare_models",
    "decompose",
    "diagonal_counts",
    "edit_from_dict",
    "eigenvalue_share",
    "embed",
    "estimate_period",
    "fit_pirls",
    "format_fit_table",
    "gen_harmonic_series",
    "gen_poisson_counts",
    "grouping_summary",
    "hankelize",
    "impute_causal_ma",
    "impute_causal_ma_details",
    "linkage_heights",
    "merge_nonidentifiable",
    "read_json",
    "read_panel_csv",
    "read_series_csv",
    "reconstruct",
    "regroup",
    "relative_risk",
    "screen_outliers",
    "select_smoothing",
    "spatial_average",
    "to_exposures",
    "ubre_score",
    "wcorr_matrix",
    "weekday_vector",
    "write_json",
    "write_panel_csv",
    "write_series_csv",
]
