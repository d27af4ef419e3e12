"""Level-set entropy of ensemble scalar fields under per-vertex distribution models."""

__version__ = "0.1.0"

from .ensemble import (EnsembleError, EnsembleField, GridDims, NoiseSpec, inject_noise,
                       load_ensemble, slice_z, subsample, synthetic_ensemble, write_ensemble)
from .entropy import (EntropyField, cell_case_distribution, cell_entropy, entropy_field,
                      entropy_field_sweep)
from .harness import (BinSweepResult, ComparisonReport, bin_sweep, compare_models,
                      emit_report, noise_experiment)
from .models import (FULL, GAUSSIAN, UNIFORM, ModelField, ModelKind, VertexModel, fit_model,
                     histogram, quantile, sign_prob_above, storage_cost)

__all__ = [
    "EnsembleError", "EnsembleField", "GridDims", "NoiseSpec", "inject_noise", "load_ensemble",
    "slice_z", "subsample", "synthetic_ensemble", "write_ensemble",
    "EntropyField", "cell_case_distribution", "cell_entropy", "entropy_field",
    "entropy_field_sweep",
    "BinSweepResult", "ComparisonReport", "bin_sweep", "compare_models", "emit_report",
    "noise_experiment",
    "FULL", "GAUSSIAN", "UNIFORM", "ModelField", "ModelKind", "VertexModel", "fit_model",
    "histogram", "quantile", "sign_prob_above", "storage_cost",
]
