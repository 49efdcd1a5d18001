"""Memorisation profiles from checkpoint panels.

Estimates how much a single-pass training run memorises each macro-batch
at each checkpoint, using difference and difference-in-differences
contrasts against a held-out validation set, with simultaneous
multiplier-bootstrap confidence bands and a synthetic potential-outcomes
harness that checks the estimators' statistical guarantees by Monte
Carlo.
"""

from ._rng import RNG_NAME, WeightFamily, derive_seed
from .estimators import (EstimatorKind, MemorisationProfile, ProfileCell,
                         RunEnsemble, admissible_cells, architectural_estimate,
                         did_estimate, diff_estimate, estimate_profile,
                         extractable_estimate, read_profile_csv,
                         write_profile_csv)
from .inference import (ConfidenceBands, InfluenceMatrix, aggregate_bands,
                        apply_bands, influence_matrix, influence_values,
                        multiplier_bootstrap, read_bands_json, write_bands_json)
from .panel import (NEVER, GroupIndex, Panel, PanelError, baseline_checkpoint,
                    group_mean, load_panel, save_panel)
from .synth import (ConstantEffect, ConstantTrend, ExpDecayEffect, ExpDecayTrend,
                    LinearEffect, LinearTrend, MonteCarloReport, Regime,
                    RegimeExpectation, SynthConfig, SynthTruth, generate_panel,
                    monte_carlo, predicted_variance, regime_suite)
from .views import (Series, SeriesKind, SeriesPoint, instantaneous,
                    persistent_average, profile_correlation, read_series_csv,
                    residual, write_series_csv)

__version__ = "0.1.0"

__all__ = [
    "NEVER", "Panel", "PanelError", "GroupIndex", "load_panel", "save_panel",
    "group_mean", "baseline_checkpoint",
    "EstimatorKind", "ProfileCell", "MemorisationProfile", "RunEnsemble",
    "admissible_cells", "diff_estimate", "did_estimate", "estimate_profile",
    "extractable_estimate", "architectural_estimate",
    "read_profile_csv", "write_profile_csv",
    "ConfidenceBands", "InfluenceMatrix", "influence_values", "influence_matrix",
    "multiplier_bootstrap", "apply_bands", "aggregate_bands",
    "read_bands_json", "write_bands_json",
    "Series", "SeriesKind", "SeriesPoint", "instantaneous", "persistent_average",
    "residual", "profile_correlation", "read_series_csv", "write_series_csv",
    "SynthConfig", "SynthTruth", "MonteCarloReport", "Regime", "RegimeExpectation",
    "generate_panel", "monte_carlo", "predicted_variance", "regime_suite",
    "ConstantTrend", "LinearTrend", "ExpDecayTrend",
    "ConstantEffect", "LinearEffect", "ExpDecayEffect",
    "WeightFamily", "RNG_NAME", "derive_seed",
]
