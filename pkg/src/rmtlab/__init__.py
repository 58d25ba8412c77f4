"""rmtlab: a numerical laboratory for deformed-GUE bulk eigenvalue statistics."""

from .ensemble import (
    AtomsLaw,
    EmpiricalMeasure,
    EnsembleSpec,
    Explicit,
    GaussianLaw,
    IID,
    SpectralSample,
    TwoPoint,
    UniformLaw,
    empirical_ncm,
    estimate_gap_probability,
    realize_h0,
    run_trials,
    sample_deformed,
    sample_gue,
)
from .stieltjes import (
    AtomicMeasure,
    BulkWindow,
    ContourTrace,
    DensityMeasure,
    SaddleSolution,
    contour_trace,
    density_mass,
    g0_eval,
    pastur_density,
    pastur_solve,
    s_action,
    solve_saddle,
    support_bands,
)

__version__ = "0.1.0"
