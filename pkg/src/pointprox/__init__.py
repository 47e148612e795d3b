"""Point-source localisation by non-negative measure-space optimisation.

Recovers sparse spike measures from blurred sensor-grid readings by
minimising data fit plus a total-variation (mass) penalty.  Proximal
solvers (forward-backward, its inertial variant, primal-dual splitting)
maintain exact sparsity via tolerance-controlled point insertion backed by
a branch-and-bound search; conditional-gradient baselines are included for
comparison.
"""
from .bisection import BisectionSearchError, KernelSum, SearchResult, maximise, minimise
from .geometry import Cube, DiscreteMeasure, Spike, merge_spikes, prune, radon_norm
from .kernels import (
    ConvolvedSensorKernel,
    CutGaussian1D,
    FastSpread1D,
    HatFunction,
    ProductKernel,
    TriangularGaussian1D,
    unit_mass_scale,
)
from .operators import (
    ParticleToWave,
    SensorGrid,
    SensorGridOperator,
    SmoothnessConstants,
    apply_forward,
    apply_preadjoint,
    d_inner,
    estimate_smoothness,
)
from .record import RunRecord, RunRow, is_sample_iteration, sample_iterations
from .solvers import (
    CertificationCheck,
    ConfigurationError,
    InsertionResult,
    Problem,
    SolverConfig,
    ToleranceSchedule,
    certify_insertion,
    evaluate_objective,
    insert_and_adjust,
    merge_with_data_guard,
    postprocess_weight_opt,
    run_fw,
    run_mu_fb,
    run_mu_fista,
    run_mu_pdps,
)
from .subsolvers import (
    InnerSolverConfig,
    L1DataTerm,
    SquaredL2DataTerm,
    WeightSolution,
    data_term_by_name,
    optimality_residual,
    solve_weights,
    solve_weights_full,
)
from .experiments import (
    ALGORITHMS,
    ExperimentResult,
    ExperimentSpec,
    GaussianNoise,
    SaltPepperNoise,
    build_operator,
    default_spec,
    generate_data,
    run_experiment,
    ssnr_db,
    write_outputs,
)

__version__ = "0.1.0"

__all__ = [
    "BisectionSearchError",
    "KernelSum",
    "SearchResult",
    "maximise",
    "minimise",
    "Cube",
    "DiscreteMeasure",
    "Spike",
    "merge_spikes",
    "prune",
    "radon_norm",
    "ConvolvedSensorKernel",
    "CutGaussian1D",
    "FastSpread1D",
    "HatFunction",
    "ProductKernel",
    "TriangularGaussian1D",
    "unit_mass_scale",
    "ParticleToWave",
    "SensorGrid",
    "SensorGridOperator",
    "SmoothnessConstants",
    "apply_forward",
    "apply_preadjoint",
    "d_inner",
    "estimate_smoothness",
    "RunRecord",
    "RunRow",
    "is_sample_iteration",
    "sample_iterations",
    "CertificationCheck",
    "ConfigurationError",
    "InsertionResult",
    "Problem",
    "SolverConfig",
    "ToleranceSchedule",
    "certify_insertion",
    "evaluate_objective",
    "insert_and_adjust",
    "merge_with_data_guard",
    "postprocess_weight_opt",
    "run_fw",
    "run_mu_fb",
    "run_mu_fista",
    "run_mu_pdps",
    "InnerSolverConfig",
    "L1DataTerm",
    "SquaredL2DataTerm",
    "WeightSolution",
    "data_term_by_name",
    "optimality_residual",
    "solve_weights",
    "solve_weights_full",
    "ALGORITHMS",
    "ExperimentResult",
    "ExperimentSpec",
    "GaussianNoise",
    "SaltPepperNoise",
    "build_operator",
    "default_spec",
    "generate_data",
    "run_experiment",
    "ssnr_db",
    "write_outputs",
]
