"""Partition functions of binary planar models: BP plus matching-based loop corrections."""

from .bp import (
    BPConfig,
    BPNumericError,
    BPResult,
    SaturationError,
    SCHEDULES,
    dump_beliefs,
    mu_term,
    run_bp,
    run_bp_multistart,
)
from .bench import (
    ModelParams,
    error_metric,
    gen_grid,
    gen_spiderweb,
    grid_factor_graph,
    parse_config,
    rows_to_csv,
    run_experiment,
    solve_forney,
    spiderweb_factor_graph,
)
from .io import parse_model, read_model, write_factor_graph, write_forney, write_model
from .model import (
    Factor,
    FactorGraph,
    ForneyGraph,
    ModelError,
    canon_edge,
    exact_log_z,
    exact_log_z_factor,
    exact_z,
    exact_z_factor,
    factor_to_forney,
    reduce_degree,
    two_core,
)
from .pfaffian import (
    OrientationError,
    SkewMatrix,
    corrected_z,
    kasteleyn_matrix,
    pfaffian,
    tutte_matrix,
)
from .planar import (
    ExtendedGraph,
    NonPlanarError,
    OrientedPlanarGraph,
    PlanarEmbedding,
    biconnect,
    embed,
    face_parity_violations,
    fisher_extend,
    orient,
)
from .series import (
    LoopTerm,
    PfaffianSeriesResult,
    PfaffianTerm,
    enumerate_loops,
    format_term_log,
    loop_correction,
    pfaffian_series,
    term_ranking,
    triplet_nodes,
    z_empty,
)
from .slog import SignedLog

__version__ = "0.1.0"

__all__ = [
    "BPConfig",
    "BPNumericError",
    "BPResult",
    "ExtendedGraph",
    "Factor",
    "FactorGraph",
    "ForneyGraph",
    "LoopTerm",
    "ModelError",
    "ModelParams",
    "NonPlanarError",
    "OrientationError",
    "OrientedPlanarGraph",
    "PfaffianSeriesResult",
    "PfaffianTerm",
    "PlanarEmbedding",
    "SCHEDULES",
    "SaturationError",
    "SignedLog",
    "SkewMatrix",
    "biconnect",
    "canon_edge",
    "corrected_z",
    "dump_beliefs",
    "embed",
    "enumerate_loops",
    "error_metric",
    "exact_log_z",
    "exact_log_z_factor",
    "exact_z",
    "exact_z_factor",
    "face_parity_violations",
    "factor_to_forney",
    "fisher_extend",
    "format_term_log",
    "gen_grid",
    "gen_spiderweb",
    "grid_factor_graph",
    "kasteleyn_matrix",
    "loop_correction",
    "mu_term",
    "orient",
    "parse_config",
    "parse_model",
    "pfaffian",
    "pfaffian_series",
    "read_model",
    "reduce_degree",
    "rows_to_csv",
    "run_bp",
    "run_bp_multistart",
    "run_experiment",
    "solve_forney",
    "spiderweb_factor_graph",
    "term_ranking",
    "triplet_nodes",
    "two_core",
    "write_factor_graph",
    "write_forney",
    "write_model",
    "z_empty",
]
