"""Command-line entry point: ``rrsvd {update,sequence,oracle,convert}``.

Exit status 0 on success, 1 for usage and I/O problems, 2 for numerical
failures. Diagnostics go to stderr; data goes to files or stdout.
"""
import argparse
import os
import sys

import numpy as np
import scipy.sparse as sp

from .errors import NoConvergence, NotConverged, NotPositiveDefinite, ParseError, UnsupportedFormat
from .harness import (
    Method,
    SequenceConfig,
    reference_svd,
    run_sequence,
    summary_dict,
    write_report_csv,
    write_summary_json,
)
from .krylov import XMode
from .sparse import SparseMatrix, read_matrix_market, write_matrix_market

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; 2 is reserved for numerical failure here
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_method_args(p):
    p.add_argument("matrix", help="Matrix Market file")
    p.add_argument("--k", type=_positive, required=True, help="rank of the truncated SVD")
    p.add_argument("--method", required=True, choices=[m.value for m in Method])
    p.add_argument("--r", type=_positive, default=None, help="rank of X (default: k)")
    p.add_argument("--lambda-factor", type=float, default=1.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-at", type=_positive, default=None,
                   help="rows (columns) in the base matrix; default ceil(half)")
    p.add_argument("--direction", choices=["rows", "cols"], default="rows")
    p.add_argument("--sketch-cols", type=_positive, default=None)
    p.add_argument("--x-mode", choices=[m.value for m in XMode], default="randomized")
    p.add_argument("--reorthogonalize", action=argparse.BooleanOptionalAction, default=None,
                   help="re-orthonormalize the factor recovered by a matrix product "
                        "(default: only between sequence batches)")


def build_parser():
    parser = _Parser(prog="rrsvd", description="Rank-k truncated SVD updating.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("update", help="one update: split, update, evaluate")
    _add_method_args(p)
    p.add_argument("--out", help="CSV report (default: stdout)")
    p.add_argument("--json", help="JSON summary")

    p = sub.add_parser("sequence", help="add the second part in PHI batches")
    _add_method_args(p)
    p.add_argument("--phi", type=_positive, required=True)
    p.add_argument("--out-dir", default=".", help="directory for batch_XX.csv files")
    p.add_argument("--json", help="JSON summary (default: OUT_DIR/summary.json)")

    p = sub.add_parser("oracle", help="reference singular values")
    p.add_argument("matrix")
    p.add_argument("--k", type=_positive, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV file (default: stdout)")

    p = sub.add_parser("convert", help="normalize a raw ratings/triplet file to Matrix Market")
    p.add_argument("raw")
    p.add_argument("--format", choices=["mtx"], default="mtx")
    p.add_argument("--out", help="output path (default: RAW with .mtx suffix)")
    return parser


def _config(args, phi=1):
    return SequenceConfig(
        phi=phi,
        k=args.k,
        method=args.method,
        r=args.r,
        lambda_factor=args.lambda_factor,
        seed=args.seed,
        reorthogonalize_v=args.reorthogonalize,
        sketch_cols=args.sketch_cols,
        direction=args.direction,
        x_mode=args.x_mode,
        split_at=args.split_at,
    )


def _load(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
    return read_matrix_market(path)


def _cmd_update(args):
    A = _load(args.matrix)
    cfg = _config(args)
    reports = run_sequence(A, cfg)
    if args.out:
        write_report_csv(reports[0], args.out)
    else:
        write_report_csv(reports[0], sys.stdout)
    if args.json:
        write_summary_json(summary_dict(reports, cfg, {"matrix": args.matrix}), args.json)
    rep = reports[0]
    print(f"max rel_err {rep.max_rel_err():.3e}  max residual {rep.max_residual():.3e}  "
          f"lanczos steps {rep.lanczos_steps}", file=sys.stderr)


def _cmd_sequence(args):
    A = _load(args.matrix)
    cfg = _config(args, phi=args.phi)
    reports = run_sequence(A, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    width = max(2, len(str(len(reports))))
    for j, rep in enumerate(reports, 1):
        write_report_csv(rep, os.path.join(args.out_dir, f"batch_{j:0{width}d}.csv"))
        print(f"update {j}: max rel_err {rep.max_rel_err():.3e}  "
              f"max residual {rep.max_residual():.3e}", file=sys.stderr)
    path = args.json or os.path.join(args.out_dir, "summary.json")
    write_summary_json(summary_dict(reports, cfg, {"matrix": args.matrix}), path)


def _cmd_oracle(args):
    A = _load(args.matrix)
    full = reference_svd(A, args.k, args.seed)
    lines = ["i,sigma"] + [f"{i + 1},{float(s)!r}" for i, s in enumerate(full.s)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def read_triplets(path):
    """Parse ``user::item::rating[::ts]`` or whitespace/comma separated triplets.

    Ids are remapped to 0..count-1 in order of first appearance when they are
    not already dense 1-based integers. Blank lines and ``#``/``%`` comments
    are skipped.
    """
    rows, cols, vals = [], [], []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text[0] in "#%":
                continue
            if "::" in text:
                parts = text.split("::")
            else:
                parts = text.replace(",", " ").split()
            if len(parts) < 3:
                raise ParseError("expected at least three fields", lineno=lineno, path=path)
            try:
                rows.append(parts[0])
                cols.append(parts[1])
                vals.append(float(parts[2]))
            except ValueError:
                raise ParseError(f"bad value {parts[2]!r}", lineno=lineno, path=path) from None
    return _index(rows), _index(cols), np.asarray(vals, dtype=np.float64)


def _index(ids):
    try:
        ints = np.asarray([int(x) for x in ids], dtype=np.int64)
    except ValueError:
        ints = None
    if ints is not None and (ints.size == 0 or ints.min() >= 1):
        return ints - 1, int(ints.max()) if ints.size else 0
    lookup = {}
    out = np.asarray([lookup.setdefault(x, len(lookup)) for x in ids], dtype=np.int64)
    return out, len(lookup)


def _cmd_convert(args):
    if not os.path.isfile(args.raw):
        raise FileNotFoundError(f"no such file: {args.raw}")
    (r, m), (c, n), v = read_triplets(args.raw)
    A = SparseMatrix.from_scipy(sp.coo_matrix((v, (r, c)), shape=(m, n)).tocsr())
    out = args.out or os.path.splitext(args.raw)[0] + ".mtx"
    write_matrix_market(A, out, comment=f"converted from {os.path.basename(args.raw)}")
    print(f"wrote {out}: {m} x {n}, nnz={A.nnz}", file=sys.stderr)


_COMMANDS = {
    "update": _cmd_update,
    "sequence": _cmd_sequence,
    "oracle": _cmd_oracle,
    "convert": _cmd_convert,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ParseError, UnsupportedFormat) as exc:
        print(f"rrsvd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotConverged, NoConvergence, NotPositiveDefinite, np.linalg.LinAlgError) as exc:
        print(f"rrsvd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"rrsvd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
