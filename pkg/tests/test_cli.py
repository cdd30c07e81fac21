import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from rrsvd.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, read_triplets
from rrsvd.sparse import SparseMatrix, read_matrix_market, write_matrix_market
from rrsvd.synthetic import random_sparse


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def tiny(tmp_path):
    # diag(3,2,1) padded with a zero row and column; the split leaves 3 and 2 in the base
    d = np.zeros((4, 4))
    d[0, 0], d[1, 1], d[2, 2] = 3.0, 2.0, 1.0
    path = tmp_path / "tiny.mtx"
    write_matrix_market(SparseMatrix.from_dense(d), path)
    return path


@pytest.fixture
def medium(tmp_path):
    path = tmp_path / "m.mtx"
    write_matrix_market(random_sparse(40, 25, 0.4, seed=1), path)
    return path


@pytest.mark.parametrize("method", ["rrsvd-a", "rrsvd-b", "zha-simon", "vecharynski"])
def test_update_tiny(tiny, tmp_path, method):
    out = tmp_path / "r.csv"
    assert main(["update", str(tiny), "--k", "2", "--method", method, "--out", str(out)]) == EXIT_OK
    rows = _rows(out)
    assert [float(r["sigma"]) for r in rows] == pytest.approx([3.0, 2.0], abs=1e-12)
    assert all(float(r["residual"]) < 1e-8 for r in rows)


def test_update_to_stdout(medium, capsys):
    assert main(["update", str(medium), "--k", "3", "--method", "rrsvd-a"]) == EXIT_OK
    out, err = capsys.readouterr()
    assert out.splitlines()[0] == "i,sigma,rel_err,residual" and len(out.splitlines()) == 4
    assert "max rel_err" in err


def test_update_json_defaults_r_to_k(medium, tmp_path):
    js = tmp_path / "s.json"
    code = main(["update", str(medium), "--k", "4", "--method", "rrsvd-b",
                 "--out", str(tmp_path / "r.csv"), "--json", str(js)])
    assert code == EXIT_OK
    data = json.loads(js.read_text())
    assert data["config"]["r"] == 4 and data["config"]["lambda_factor"] == 1.01
    assert data["updates"][0]["delta"] > 0


def test_update_is_deterministic(medium, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        p = tmp_path / name
        main(["update", str(medium), "--k", "4", "--method", "rrsvd-b", "--seed", "7",
              "--out", str(p)])
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_update_columns(medium, tmp_path):
    out = tmp_path / "c.csv"
    code = main(["update", str(medium), "--k", "3", "--method", "rrsvd-b",
                 "--direction", "cols", "--x-mode", "gkl", "--out", str(out)])
    assert code == EXIT_OK and len(_rows(out)) == 3


def test_missing_file_names_path(tmp_path, capsys):
    missing = tmp_path / "absent.mtx"
    assert main(["update", str(missing), "--k", "2", "--method", "rrsvd-a"]) == EXIT_USAGE
    assert str(missing) in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    [],
    ["update"],
    ["update", "x.mtx", "--method", "rrsvd-a"],
    ["update", "x.mtx", "--k", "0", "--method", "rrsvd-a"],
    ["update", "x.mtx", "--k", "2", "--method", "svd"],
    ["frobnicate"],
])
def test_bad_arguments_exit_one(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert capsys.readouterr().err


def test_parse_error_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n")
    assert main(["oracle", str(bad), "--k", "1"]) == EXIT_USAGE
    assert "bad.mtx" in capsys.readouterr().err


def test_k_too_large_exit_one(tiny):
    assert main(["update", str(tiny), "--k", "5", "--method", "rrsvd-a"]) == EXIT_USAGE


def test_numerical_failure_via_lanczos(medium, monkeypatch, capsys):
    from rrsvd import update
    from rrsvd.errors import NotConverged

    def boom(*a, **kw):
        raise NotConverged("forced", partial=None)

    monkeypatch.setattr(update, "lanczos_sym_topk", boom)
    assert main(["update", str(medium), "--k", "3", "--method", "rrsvd-a"]) == EXIT_NUMERIC
    assert "forced" in capsys.readouterr().err


def test_sequence_outputs(medium, tmp_path):
    out = tmp_path / "seq"
    code = main(["sequence", str(medium), "--k", "3", "--phi", "4", "--method", "rrsvd-b",
                 "--out-dir", str(out)])
    assert code == EXIT_OK
    files = sorted(p.name for p in out.iterdir())
    assert files == ["batch_01.csv", "batch_02.csv", "batch_03.csv", "batch_04.csv",
                     "summary.json"]
    data = json.loads((out / "summary.json").read_text())
    assert data["config"]["phi"] == 4 and data["config"]["reorthogonalize_v"] is True
    assert [u["update_size"] for u in data["updates"]] == [5, 5, 5, 5]


def test_oracle(medium, tmp_path):
    out = tmp_path / "ref.csv"
    assert main(["oracle", str(medium), "--k", "3", "--out", str(out)]) == EXIT_OK
    rows = _rows(out)
    ref = np.linalg.svd(read_matrix_market(medium).to_dense(), compute_uv=False)[:3]
    assert [float(r["sigma"]) for r in rows] == pytest.approx(ref, rel=1e-12)


def test_convert_ratings(tmp_path):
    raw = tmp_path / "ratings.dat"
    raw.write_text("1::10::5::978300760\n2::10::3::978302109\n1::20::4::978301968\n")
    assert main(["convert", str(raw)]) == EXIT_OK
    A = read_matrix_market(tmp_path / "ratings.mtx")
    assert A.shape == (2, 20) and A.nnz == 3
    assert A.to_dense()[0, 9] == 5.0 and A.to_dense()[0, 19] == 4.0


def test_convert_string_ids(tmp_path):
    raw = tmp_path / "t.txt"
    raw.write_text("# term doc weight\nalpha d1 1.5\nbeta d2 2\nalpha d2 0.5\n")
    out = tmp_path / "t_out.mtx"
    assert main(["convert", str(raw), "--out", str(out)]) == EXIT_OK
    assert np.array_equal(read_matrix_market(out).to_dense(), [[1.5, 0.5], [0.0, 2.0]])


def test_read_triplets_rejects_short_lines(tmp_path):
    raw = tmp_path / "bad.txt"
    raw.write_text("1 2\n")
    from rrsvd.errors import ParseError
    with pytest.raises(ParseError):
        read_triplets(raw)
    assert main(["convert", str(raw)]) == EXIT_USAGE


def test_console_entry_point(tiny):
    proc = subprocess.run(
        [sys.executable, "-m", "rrsvd.cli", "update", str(tiny), "--k", "2", "--method", "zha-simon"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1].startswith("1,3.0,")
