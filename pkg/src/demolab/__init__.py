"""Numerical laboratory for democracy in compressive measurement.

A measurement matrix is *democratic* when every sufficiently large subset
of its rows still satisfies a restricted isometry property, so any few
measurements can be lost without hurting sparse recovery. The package
offers exhaustive desk-scale certificates (:mod:`demolab.riplab`),
Monte Carlo concentration checks (:mod:`demolab.concentration`),
basis-pursuit recovery (:mod:`demolab.recovery`) and the measurement
dropping experiments (:mod:`demolab.harness`).
"""

from .concentration import (
    ConcentrationConfig,
    TailReport,
    concentration_experiment,
    decomposition_identity,
    mgf_check,
    mgf_closed_form,
    tail_bounds,
)
from .errors import (
    ContractViolationError,
    DegenerateSelectionError,
    DemolabError,
    DimensionMismatchError,
    EmptySelectionError,
    EnumerationTooLargeError,
    IndexRangeError,
    InvalidDimensionError,
    NumericError,
    PreconditionError,
    SingularSelectionError,
)
from .harness import (
    PRESETS,
    CurvePoint,
    ExperimentConfig,
    ExperimentResult,
    LinearFit,
    TrialRecord,
    d_max_adversarial,
    d_max_democracy,
    d_max_single,
    fit_line,
    onset_scan,
    preset,
    run_experiment,
    stability_experiment,
)
from .matrices import (
    AugmentedMatrix,
    IndexSet,
    MeasurementMatrix,
    augment_identity,
    col_submatrix,
    complement_projector,
    diagonal_mask,
    generate,
    is_projector,
    load_matrix,
    masked_product,
    range_projector,
    row_submatrix,
)
from .recovery import (
    RecoveryResult,
    SolverOptions,
    SparseSignal,
    best_k_term,
    compressible_signal,
    exact_recovery,
    l1_recover,
    omp_recover,
    random_sparse_signal,
)
from .riplab import (
    DemocracyReport,
    RipReport,
    TheoremConstants,
    ViolationReport,
    democracy_certificate,
    exact_rip,
    inner_product_check,
    monte_carlo_rip,
    projected_rip_bounds,
    projected_rip_check,
    theorem1_constants,
)

__all__ = [
    "ConcentrationConfig",
    "TailReport",
    "concentration_experiment",
    "decomposition_identity",
    "mgf_check",
    "mgf_closed_form",
    "tail_bounds",
    "ContractViolationError",
    "DegenerateSelectionError",
    "DemolabError",
    "DimensionMismatchError",
    "EmptySelectionError",
    "EnumerationTooLargeError",
    "IndexRangeError",
    "InvalidDimensionError",
    "NumericError",
    "PreconditionError",
    "SingularSelectionError",
    "PRESETS",
    "CurvePoint",
    "ExperimentConfig",
    "ExperimentResult",
    "LinearFit",
    "TrialRecord",
    "d_max_adversarial",
    "d_max_democracy",
    "d_max_single",
    "fit_line",
    "onset_scan",
    "preset",
    "run_experiment",
    "stability_experiment",
    "AugmentedMatrix",
    "IndexSet",
    "MeasurementMatrix",
    "augment_identity",
    "col_submatrix",
    "complement_projector",
    "diagonal_mask",
    "generate",
    "is_projector",
    "load_matrix",
    "masked_product",
    "range_projector",
    "row_submatrix",
    "RecoveryResult",
    "SolverOptions",
    "SparseSignal",
    "best_k_term",
    "compressible_signal",
    "exact_recovery",
    "l1_recover",
    "omp_recover",
    "random_sparse_signal",
    "DemocracyReport",
    "RipReport",
    "TheoremConstants",
    "ViolationReport",
    "democracy_certificate",
    "exact_rip",
    "inner_product_check",
    "monte_carlo_rip",
    "projected_rip_bounds",
    "projected_rip_check",
    "theorem1_constants",
]

__version__ = "0.1.0"
