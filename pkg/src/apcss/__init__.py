"""Aligned rank-based tests for interaction in balanced two-way layouts.

The package implements two aligned-and-ranked maximum-dispersion tests
(APCSSA with mean alignment, APCSSM with median alignment), Monte Carlo
null calibration with persistent calibration files, classical
competitors (ANOVA F, rank transform, aligned rank transform), and a
power-study simulator, all behind both a library API and an ``apcss``
command-line tool.
"""

from ._backend import available_backends, backend_name
from .calibration import (
    CalibrationChecksumError,
    CalibrationVersionError,
    NullCalibration,
    calibrate_null,
    critical_value,
    load_calibration,
    p_value,
    save_calibration,
    shipped_calibration_path,
)
from .competitors import (
    FTestResult,
    anova_f_interaction,
    art_test,
    f_critical,
    f_upper_tail,
    rt_test,
)
from .crossed import (
    APCOrientation,
    APCResult,
    apc_scaled_max,
    apcss,
    crossed_comparison_brute,
    crossed_comparison_fast,
    dispersion_pair_batch,
)
from .errors import (
    CalibrationMismatchError,
    CalibrationMissingError,
    CorruptCalibrationError,
    UnsupportedDesignError,
)
from .model import (
    AlignmentMethod,
    Axis,
    DataTable,
    LayoutDims,
    RankTable,
    align,
    midranks,
    rank_within,
    read_data_csv,
)
from .simulate import (
    EffectSpec,
    ErrorDistribution,
    NoInteraction,
    PowerCurve,
    PowerPoint,
    PowerStudyConfig,
    ProductInteraction,
    SpecificInteraction,
    generate_dataset,
    interaction_matrix,
    load_power_config,
    run_power_study,
    sample_error,
    sample_errors,
    write_power_csv,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # model
    "AlignmentMethod",
    "Axis",
    "DataTable",
    "LayoutDims",
    "RankTable",
    "align",
    "midranks",
    "rank_within",
    "read_data_csv",
    # statistics
    "APCOrientation",
    "APCResult",
    "apc_scaled_max",
    "apcss",
    "crossed_comparison_brute",
    "crossed_comparison_fast",
    "dispersion_pair_batch",
    # competitors
    "FTestResult",
    "anova_f_interaction",
    "art_test",
    "f_critical",
    "f_upper_tail",
    "rt_test",
    # calibration
    "NullCalibration",
    "calibrate_null",
    "critical_value",
    "p_value",
    "save_calibration",
    "load_calibration",
    "shipped_calibration_path",
    # simulation
    "EffectSpec",
    "ErrorDistribution",
    "NoInteraction",
    "ProductInteraction",
    "SpecificInteraction",
    "PowerCurve",
    "PowerPoint",
    "PowerStudyConfig",
    "generate_dataset",
    "interaction_matrix",
    "load_power_config",
    "run_power_study",
    "sample_error",
    "sample_errors",
    "write_power_csv",
    # errors
    "CalibrationMismatchError",
    "CalibrationMissingError",
    "CorruptCalibrationError",
    "CalibrationChecksumError",
    "CalibrationVersionError",
    "UnsupportedDesignError",
    # backend
    "available_backends",
    "backend_name",
]
