"""Rank-k truncated SVD updating by Rayleigh-Ritz projection."""
from . import flops
from .baselines import Baseline, BaselineChoice, run_baseline, vecharynski_cols, vecharynski_rows, zha_simon_cols, zha_simon_rows
from .dense import FullSvd, QrFactors, jacobi_eigh, jacobi_svd, mgs_qr, normalize_signs
from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NoConvergence,
    NotConverged,
    NotPositiveDefinite,
    ParseError,
    RankDeficient,
    TruncatedResult,
    UnsupportedFormat,
)
from .harness import (
    Method,
    SequenceConfig,
    UpdateReport,
    complexity_report,
    evaluate,
    reference_svd,
    run_sequence,
    run_single_update,
)
from .krylov import (
    CgSettings,
    LinearOperator,
    XMode,
    build_x_lambda_r,
    deflated_block_cg,
    estimate_sigma1,
    gkl_bidiagonalize,
    lanczos_sym_topk,
)
from .problem import Direction, TruncatedSvd, UpdateProblem
from .sparse import SparseMatrix, csr_from_coo, matvec, read_matrix_market, rmatvec, split_cols, split_rows, write_matrix_market
from .update import (
    LanczosSettings,
    ProjectionBasis,
    build_z_basic,
    build_z_enhanced,
    compose_zha_operator,
    rr_svd,
    rr_svd_cols,
    rr_svd_rows,
)

__version__ = "0.1.0"
