"""Experiment driver: accuracy metrics, single-update and sequence protocols,
FLOP complexity tables, CSV/JSON emission."""
from dataclasses import asdict, dataclass, field, replace
import enum
import json
import math
import time
from typing import Optional
import warnings

import numpy as np

from . import flops
from .baselines import Baseline, BaselineChoice, run_baseline
from .dense import FullSvd, jacobi_svd
from .errors import DimensionMismatch
from .krylov import CgSettings, XMode, estimate_sigma1, gkl_bidiagonalize
from .problem import Direction, TruncatedSvd, UpdateProblem
from .sparse import SparseMatrix, ceil_half, matvec, split_cols, split_rows
from .update import LanczosSettings, build_z_basic, build_z_enhanced, rr_svd

__all__ = [
    "Method",
    "UpdateReport",
    "SequenceConfig",
    "reference_svd",
    "evaluate",
    "run_method",
    "run_single_update",
    "run_sequence",
    "complexity_report",
    "write_report_csv",
    "summary_dict",
    "write_summary_json",
]

ORACLE_LIMIT = 500


class Method(str, enum.Enum):
    RRSVD_BASIC = "rrsvd-a"
    RRSVD_ENHANCED = "rrsvd-b"
    ZHA_SIMON = "zha-simon"
    VECHARYNSKI_SV = "vecharynski"


@dataclass
class UpdateReport:
    sigma: np.ndarray
    rel_err: Optional[np.ndarray] = None
    residual: Optional[np.ndarray] = None
    flops: dict = field(default_factory=dict)
    lanczos_steps: int = 0
    wall_time: float = 0.0
    shape: tuple = (0, 0)
    nnz: int = 0
    update_size: int = 0

    @property
    def k(self):
        return self.sigma.size

    def max_rel_err(self):
        return float(np.max(self.rel_err)) if self.rel_err is not None and self.k else math.nan

    def max_residual(self):
        return float(np.max(self.residual)) if self.residual is not None and self.k else math.nan


@dataclass(frozen=True)
class SequenceConfig:
    phi: int = 1
    k: int = 10
    method: Method = Method.RRSVD_BASIC
    r: Optional[int] = None  # enhanced and SV variants; None means k
    lambda_factor: float = 1.01
    seed: int = 0
    reorthogonalize_v: Optional[bool] = None  # None: on only when phi > 1
    sketch_cols: Optional[int] = None  # None means 2r
    direction: Direction = Direction.ROWS
    x_mode: XMode = XMode.RANDOMIZED_SVD
    split_at: Optional[int] = None  # None means ceil(half)
    lanczos: LanczosSettings = LanczosSettings()
    cg: CgSettings = CgSettings()

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "x_mode", XMode(self.x_mode))
        if self.phi < 1:
            raise ValueError("phi must be at least 1")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not self.lambda_factor > 1:
            raise ValueError("lambda_factor must exceed 1")
        if self.r is not None and self.r < 1:
            raise ValueError("r must be positive")

    @property
    def reorthogonalize(self):
        return self.phi > 1 if self.reorthogonalize_v is None else self.reorthogonalize_v

    @property
    def rank_r(self):
        return self.k if self.r is None else self.r

    def echo(self):
        out = {
            "phi": self.phi,
            "k": self.k,
            "method": self.method.value,
            "r": self.rank_r,
            "lambda_factor": self.lambda_factor,
            "seed": self.seed,
            "reorthogonalize_v": self.reorthogonalize,
            "sketch_cols": self.sketch_cols if self.sketch_cols else 2 * self.rank_r,
            "direction": self.direction.value,
            "x_mode": self.x_mode.value,
            "split_at": self.split_at,
        }
        out["lanczos"] = asdict(self.lanczos)
        out["cg"] = asdict(self.cg)
        return out


# --------------------------------------------------------------- reference


def reference_svd(A, k, seed=0, tol=1e-12):
    """Leading ``k`` triplets of ``A`` as a :class:`FullSvd`.

    Jacobi oracle when both dimensions are at most 500; otherwise GKL with
    full reorthogonalization, growing the Krylov dimension until the top
    ``k`` Ritz values move by less than ``tol`` relative.
    """
    m, n = A.shape
    k = min(k, m, n)
    if max(m, n) <= ORACLE_LIMIT:
        dense = A.to_dense() if isinstance(A, SparseMatrix) else np.asarray(A)
        full = jacobi_svd(dense)
        return FullSvd(full.u[:, :k], full.s[:k], full.v[:, :k])
    cap = min(m, n)
    steps = min(cap, max(3 * k, k + 40))
    prev = None
    while True:
        u, s, v = gkl_bidiagonalize(A, steps, seed).singular_triplets(k)
        if s.size == k and prev is not None:
            if np.all(np.abs(s - prev) <= tol * s[0]):
                break
        if steps == cap or (s.size < k and prev is not None):
            break
        prev = s
        steps = min(cap, 2 * steps)
    return FullSvd(u, s, v)


# ----------------------------------------------------------------- metrics


def evaluate(result, A, reference=None, **extra):
    """Relative singular-value error against ``reference`` and scaled residuals.

    ``residual_i = ||A v_i - sigma_i u_i|| / sigma_i``. ``extra`` is copied
    into the report (flops, lanczos_steps, wall_time).
    """
    if result.shape != A.shape:
        raise DimensionMismatch(f"factors are {result.shape}, matrix is {A.shape}")
    sigma = result.s.copy()
    with flops.counting():
        av = matvec(A, result.v) if isinstance(A, SparseMatrix) else np.asarray(A) @ result.v
    with np.errstate(divide="ignore", invalid="ignore"):
        residual = np.linalg.norm(av - result.u * sigma, axis=0) / sigma
    rel_err = None
    if reference is not None:
        ref = np.asarray(reference.s if hasattr(reference, "s") else reference)
        if ref.size < sigma.size:
            raise DimensionMismatch(
                f"reference has {ref.size} values, need {sigma.size}"
            )
        ref = ref[: sigma.size]
        rel_err = np.abs(sigma - ref) / ref
    return UpdateReport(
        sigma,
        rel_err,
        residual,
        shape=tuple(A.shape),
        nnz=A.nnz if isinstance(A, SparseMatrix) else int(np.count_nonzero(A)),
        **extra,
    )


# ----------------------------------------------------------------- methods


def choose_lambda(problem, factor, seed=0):
    """``factor * sigma_1(A)^2`` with ``sigma_1`` estimated by 10 GKL steps.

    The estimate is never allowed below the known ``sigma_1(B)``, so the
    shifted system stays definite.
    """
    est = estimate_sigma1(problem, steps=min(10, *problem.shape), seed=seed)
    if problem.k:
        est = max(est, float(problem.base_svd.s[0]))
    return factor * est**2


def run_method(problem, cfg):
    """Apply the configured method to ``problem``.

    Returns ``(TruncatedSvd, lanczos_steps, FlopCounter)``.
    """
    k_out = min(cfg.k, *problem.shape)
    with flops.counting() as counter:
        steps = 0
        if cfg.method in (Method.RRSVD_BASIC, Method.RRSVD_ENHANCED):
            with flops.phase("build_z"):
                if cfg.method is Method.RRSVD_BASIC:
                    basis = build_z_basic(problem.base_svd, problem.s, problem.direction)
                else:
                    lam = choose_lambda(problem, cfg.lambda_factor, cfg.seed)
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        basis = build_z_enhanced(
                            problem, lam, cfg.rank_r, cfg.sketch_cols, cfg.x_mode, cfg.seed, cfg.cg
                        )
            k_out = min(k_out, basis.total_cols)
            svd, ritz = rr_svd(problem, basis, k_out, cfg.lanczos, cfg.reorthogonalize)
            steps = ritz.steps_used
        elif cfg.method is Method.ZHA_SIMON:
            svd = run_baseline(problem, BaselineChoice(Baseline.ZHA_SIMON))
        else:
            svd = run_baseline(
                problem, BaselineChoice(Baseline.VECHARYNSKI_SV, cfg.rank_r), cfg.seed
            )
        if svd.k > k_out:
            svd = TruncatedSvd(svd.u[:, :k_out], svd.s[:k_out], svd.v[:, :k_out])
    return svd, steps, counter


def _split(A, cfg):
    if cfg.direction is Direction.ROWS:
        at = ceil_half(A.nrows) if cfg.split_at is None else cfg.split_at
        return split_rows(A, at)
    at = ceil_half(A.ncols) if cfg.split_at is None else cfg.split_at
    return split_cols(A, at)


def _base_svd(B, k, seed):
    full = reference_svd(B, k, seed)
    return TruncatedSvd(full.u, full.s, full.v)


def _update_once(B, base_svd, E, A, cfg):
    problem = UpdateProblem(B, base_svd, E, cfg.direction)
    t0 = time.perf_counter()
    svd, steps, counter = run_method(problem, cfg)
    wall = time.perf_counter() - t0
    ref = reference_svd(A, svd.k, cfg.seed)
    report = evaluate(
        svd, A, ref, flops=counter.as_dict(), lanczos_steps=steps, wall_time=wall
    )
    report.update_size = problem.s
    return report, svd


def run_single_update(A, cfg):
    """Split ``A`` (rows at ``ceil(m/2)`` by default), update, and evaluate."""
    return run_sequence(A, replace(cfg, phi=1))[0]


def _batch_bounds(total, start, phi):
    t = (total - start) // phi
    if t < 1:
        raise ValueError(f"cannot split {total - start} new rows/columns into {phi} batches")
    edges = [start + j * t for j in range(phi)] + [total]
    return list(zip(edges[:-1], edges[1:]))


def run_sequence(A, cfg):
    """Add the second part of ``A`` in ``phi`` batches; one report per batch.

    Each batch has ``t = (size - split) // phi`` rows (columns); the final
    batch takes the remainder. The updated factors become the next base.
    """
    B, _ = _split(A, cfg)
    rows = cfg.direction is Direction.ROWS
    start = B.nrows if rows else B.ncols
    total = A.nrows if rows else A.ncols
    svd = _base_svd(B, cfg.k, cfg.seed)
    if svd.k < cfg.k:
        raise ValueError(f"k={cfg.k} exceeds min{B.shape}")
    scipy_a = A.to_scipy()
    reports = []
    for lo, hi in _batch_bounds(total, start, cfg.phi):
        if rows:
            E = SparseMatrix.from_scipy(scipy_a[lo:hi, :])
            cur = SparseMatrix.from_scipy(scipy_a[:hi, :])
        else:
            E = SparseMatrix.from_scipy(scipy_a[:, lo:hi])
            cur = SparseMatrix.from_scipy(scipy_a[:, :hi])
        report, svd = _update_once(B, svd, E, cur, cfg)
        reports.append(report)
        B = cur
    return reports


# -------------------------------------------------------------- complexity


def predicted_flops(method, m, n, s, k, nnz_a, nnz_e, r=None, delta=None):
    """Leading-order cost per phase with every Krylov dimension set to ``delta`` (default ``k``).

    ``m`` and ``n`` describe ``B``; ``nnz_a`` counts the updated matrix.
    """
    method = Method(method)
    r = k if r is None else r
    d = k if delta is None else delta
    other_rr = k * k * m + (nnz_a + n) * k
    if method is Method.RRSVD_BASIC:
        return {"build_z": 0, "build_w": 0,
                "projected_solve": (nnz_e + n * k) * d + (k + s) * d * d,
                "other": other_rr}
    if method is Method.RRSVD_ENHANCED:
        return {"build_z": nnz_a * d + m * d * d, "build_w": 0,
                "projected_solve": (nnz_e + (n + r) * k) * d + (k + r + s) * d * d,
                "other": other_rr}
    if method is Method.ZHA_SIMON:
        return {"build_z": 0, "build_w": n * s * s + n * s * k,
                "projected_solve": (k + s) ** 3,
                "other": k * k * (m + n) + n * s * k}
    return {"build_z": 0, "build_w": (nnz_e + n * k) * k + (n + s) * k * k,
            "projected_solve": (k + s) * (k + r) ** 2 + nnz_e * k + r * s,
            "other": k * k * (m + n) + n * r * k}


def krylov_solve_count(m, n, s, k, nnz_e, delta, r=0):
    """Step-3 count at measured ``delta``: ``4(n(k+r)+nnz(E))delta + 2(s+k+r)delta^2``."""
    return 4 * (n * (k + r) + nnz_e) * delta + 2 * (s + k + r) * delta * delta


@dataclass(frozen=True)
class ComplexityRow:
    phase: str
    measured: int
    predicted: float
    formula: str

    @property
    def ratio(self):
        if self.predicted == 0:
            return 0.0 if self.measured == 0 else math.inf
        return self.measured / self.predicted


_FORMULAS = {
    Method.RRSVD_BASIC: {"build_z": "0", "build_w": "0",
                         "projected_solve": "(nnz(E)+nk)k+(k+s)k^2",
                         "other": "k^2 m+(nnz(A)+n)k"},
    Method.RRSVD_ENHANCED: {"build_z": "nnz(A)k+mk^2", "build_w": "0",
                            "projected_solve": "(nnz(E)+(n+r)k)k+(k+r+s)k^2",
                            "other": "k^2 m+(nnz(A)+n)k"},
    Method.ZHA_SIMON: {"build_z": "0", "build_w": "ns^2+nsk", "projected_solve": "(k+s)^3",
                       "other": "k^2(m+n)+nsk"},
    Method.VECHARYNSKI_SV: {"build_z": "0", "build_w": "(nnz(E)+nk)k+(n+s)k^2",
                            "projected_solve": "(k+s)(k+r)^2+nnz(E)k+rs",
                            "other": "k^2(m+n)+nrk"},
}


def complexity_report(report, method, m, n, s, k, nnz_a, nnz_e, r=None):
    """Measured FLOPs per phase next to the leading-order predictions.

    ``recover_v`` counts toward ``other``. For the Rayleigh-Ritz methods a
    ``krylov_solve`` row compares the projected solve against the step count
    at the measured Lanczos dimension.
    """
    method = Method(method)
    measured = dict(report.flops)
    measured["other"] = measured.get("other", 0) + measured.pop("recover_v", 0)
    pred = predicted_flops(method, m, n, s, k, nnz_a, nnz_e, r)
    rows = [
        ComplexityRow(ph, int(measured.get(ph, 0)), float(pred[ph]), _FORMULAS[method][ph])
        for ph in ("build_z", "build_w", "projected_solve", "other")
    ]
    if method in (Method.RRSVD_BASIC, Method.RRSVD_ENHANCED) and report.lanczos_steps:
        rr = (k if r is None else r) if method is Method.RRSVD_ENHANCED else 0
        rows.append(ComplexityRow(
            "krylov_solve",
            int(measured.get("projected_solve", 0)),
            float(krylov_solve_count(m, n, s, k, nnz_e, report.lanczos_steps, rr)),
            "4(n(k+r)+nnz(E))d+2(s+k+r)d^2",
        ))
    return rows


# ------------------------------------------------------------------ output


def _fmt(x):
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_report_csv(report, path_or_file):
    """``i,sigma,rel_err,residual`` with ``i`` starting at 1; empty cells for absent metrics."""
    lines = ["i,sigma,rel_err,residual"]
    for i in range(report.k):
        rel = None if report.rel_err is None else report.rel_err[i]
        res = None if report.residual is None else report.residual[i]
        lines.append(f"{i + 1},{_fmt(report.sigma[i])},{_fmt(rel)},{_fmt(res)}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", newline="\n") as fh:
            fh.write(text)


def summary_dict(reports, cfg, extra=None):
    out = {
        "config": cfg.echo(),
        "updates": [
            {
                "shape": list(rep.shape),
                "nnz": rep.nnz,
                "update_size": rep.update_size,
                "flops": rep.flops,
                "delta": rep.lanczos_steps,
                "wall_time": rep.wall_time,
                "max_rel_err": rep.max_rel_err(),
                "max_residual": rep.max_residual(),
            }
            for rep in reports
        ],
    }
    if extra:
        out.update(extra)
    return out


def write_summary_json(summary, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, enum.Enum):
        return obj.value
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
