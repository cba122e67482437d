"""Maximum likelihood estimation in linear structural equation models on
mixed graphs, directed cycles allowed, by block-coordinate descent."""
from ._jit import backend
from .bcd import (
    BlockContext,
    BlockUpdateError,
    FitConfig,
    FitResult,
    FitStatus,
    block_context,
    block_update,
    check_A1,
    check_A2,
    fit,
    init_params,
    random_init,
)
from .determinant import DetCoeffs, det_coeffs, det_i_minus_b, det_via_cycles
from .graph import GraphError, MixedGraph, NodeClassification, load_graph, save_graph
from .inference import LrtResult, SubsampleResult, chi2_upper_tail, lrt, subsample_lrt
from .likelihood import (
    DataError,
    Dataset,
    Params,
    ParamsError,
    Score,
    implied_covariance,
    log_likelihood,
    saturated_loglik,
    score,
)
from .ratio import (
    ConstantValue,
    InfimumUnattained,
    NoMinimum,
    NonUnique,
    RatioProblem,
    Unique,
    UniqueAt,
    minimize_univariate_ratio,
    rational_solution,
    solve_ratio,
    solve_ratio_projected,
)
from .simulate import BenchRow, SimConfig, random_graph, random_params, run_benchmark, sample_data
from .wellposed import (
    FlowNetwork,
    WellPosedReport,
    brute_force_condition,
    build_flow_network,
    half_collider_condition,
    is_well_posed,
    max_flow,
)

__version__ = "0.1.0"
