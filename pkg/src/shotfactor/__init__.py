"""Spatial factorization of shot charts.

Per-player intensity surfaces are inferred with a log-Gaussian Cox model
and elliptical slice sampling, stacked and factorized into non-negative
bases, and topped with a hierarchical per-basis efficiency model.
"""

from .backend import BACKEND, HAS_NUMBA
from .court import (
    CountMatrix,
    CourtGrid,
    ShotEvent,
    build_count_matrix,
    read_count_csv,
    read_shot_csv,
    split_holdout,
    tile_index,
    tile_indices,
    write_count_csv,
    write_shot_csv,
)
from .efficiency import (
    AdjustedLoadings,
    EfficiencyConfig,
    EfficiencyFit,
    EfficiencyModel,
    adjust_weights,
    efficiency_surface,
    fit_efficiency,
    gibbs_beta_step,
    gibbs_sigma_update,
    predict_fg_pct,
    sample_shot_types,
    shot_type_posterior,
)
from .evaluate import (
    EvalConfig,
    EvalReport,
    basis_recovery_score,
    empirical_correlation,
    heldout_loglik,
    run_comparison,
)
from .gp import CovFactor, KernelHyper, build_cov_factor, sample_field, squared_exponential
from .lgcp import (
    IntensitySurface,
    LgcpConfig,
    ess_step,
    ess_update,
    fit_cohort,
    fit_lgcp,
    normalize_unit_volume,
    poisson_loglik,
    read_surface_csv,
    write_surface_csv,
)
from .nmf import (
    FactorModel,
    NmfConfig,
    PcaModel,
    fit_nmf,
    fit_pca,
    frobenius_loss,
    kl_loss,
    pca_reconstruct,
    reconstruct,
)
from .pipeline import PipelineConfig, load_config, run_pipeline
from .render import read_heatmap, render_heatmap
from .synth import (
    PlantedTruth,
    SynthConfig,
    generate_dataset,
    make_planted_bases,
    make_planted_truth,
    sample_outcomes,
    sample_player_shots,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HAS_NUMBA",
    "AdjustedLoadings",
    "CountMatrix",
    "CourtGrid",
    "CovFactor",
    "EfficiencyConfig",
    "EfficiencyFit",
    "EfficiencyModel",
    "EvalConfig",
    "EvalReport",
    "FactorModel",
    "IntensitySurface",
    "KernelHyper",
    "LgcpConfig",
    "NmfConfig",
    "PcaModel",
    "PipelineConfig",
    "PlantedTruth",
    "ShotEvent",
    "SynthConfig",
    "adjust_weights",
    "basis_recovery_score",
    "build_count_matrix",
    "build_cov_factor",
    "efficiency_surface",
    "empirical_correlation",
    "ess_step",
    "ess_update",
    "fit_cohort",
    "fit_efficiency",
    "fit_lgcp",
    "fit_nmf",
    "fit_pca",
    "frobenius_loss",
    "generate_dataset",
    "gibbs_beta_step",
    "gibbs_sigma_update",
    "heldout_loglik",
    "kl_loss",
    "load_config",
    "make_planted_bases",
    "make_planted_truth",
    "normalize_unit_volume",
    "pca_reconstruct",
    "poisson_loglik",
    "predict_fg_pct",
    "read_count_csv",
    "read_heatmap",
    "read_shot_csv",
    "read_surface_csv",
    "reconstruct",
    "render_heatmap",
    "run_comparison",
    "run_pipeline",
    "sample_field",
    "sample_outcomes",
    "sample_player_shots",
    "sample_shot_types",
    "shot_type_posterior",
    "split_holdout",
    "squared_exponential",
    "tile_index",
    "tile_indices",
    "write_count_csv",
    "write_shot_csv",
    "write_surface_csv",
]
