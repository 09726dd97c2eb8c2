import io
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caesar.he.matrix import EncryptedMatrix, encrypt_matrix
from caesar.ring import RingParams
from caesar.sparse import (
    DenseMatrix,
    OpCounter,
    ParseError,
    SparseError,
    SparseMatrix,
    accumulation_bits,
    csr_matmul_ring,
    parse_csv,
    parse_svmlight,
    spmm_encrypted,
    spmm_plain,
    vec_csr_ring,
    vec_spmm_encrypted,
    write_svmlight,
)

R = RingParams(64)


def _random_sparse(rng, rows, cols, density, lo=-50, hi=50):
    dense = rng.integers(lo, hi, (rows, cols)) * (rng.random((rows, cols)) < density)
    return dense, SparseMatrix.from_dense(dense, scale=0, ring=R)


def test_csr_structure():
    X = SparseMatrix.from_dense(np.array([[0, 1, 0, 0, 2]]))
    assert X.nnz == 2 and X.density == pytest.approx(0.4)
    assert X.indptr.tolist() == [0, 2] and X.indices.tolist() == [1, 4]
    with pytest.raises(SparseError):
        SparseMatrix(1, 2, [0, 1], [5], [1.0])
    with pytest.raises(SparseError):
        SparseMatrix(1, 3, [0, 2], [2, 1], [1.0, 1.0])


def test_encode_drops_zeros_and_trailing_rows():
    X = SparseMatrix.from_dense(np.array([[0.5, 0.0], [0.0, 0.0], [0.00001, 0.0], [0.0, 0.0]]))
    E = X.encode(4, R)
    # 0.00001 floors to 0 at c=4 and is dropped
    assert E.nnz == 1 and E.indptr.tolist() == [0, 1, 1, 1, 1]
    assert E.signed_data() == [5000]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 12), st.integers(1, 12), st.floats(0.0, 1.0))
def test_ring_products_match_dense(seed, rows, cols, density):
    rng = np.random.default_rng(seed)
    dense, X = _random_sparse(rng, rows, cols, density, -(2**40), 2**40)
    Y = R.random((cols, 3), random.Random(seed))
    expect = R.matmul(R.reduce(dense.astype(object)), Y)
    assert np.array_equal(csr_matmul_ring(X, Y, R), expect)
    e = R.random(rows, random.Random(seed + 1))
    assert np.array_equal(vec_csr_ring(e, X, R), R.matmul(e, R.reduce(dense.astype(object))))
    assert spmm_plain(X, DenseMatrix(Y)).values.shape == (rows, 3)


def test_spmm_encrypted_matches_plain(ou1024):
    kp = ou1024[0]
    rng = np.random.default_rng(4)
    dense, X = _random_sparse(rng, 6, 5, 0.3)
    dense[2] = 0
    X = SparseMatrix.from_dense(dense, scale=0, ring=R)
    Y = rng.integers(-100, 100, (5, 2))
    EY = encrypt_matrix(kp.pk, Y.tolist(), random.Random(1))
    counter = OpCounter()
    EZ = spmm_encrypted(X, EY, counter)
    assert EZ.decrypt(kp.sk, signed=True) == (dense @ Y).tolist()
    assert counter.op3 == X.nnz * 2
    assert counter.op2 == sum(max(0, k - 1) for k in X.row_nnz().tolist() if k) * 2
    assert counter.zero_seeds == int((X.row_nnz() == 0).sum()) * 2


def test_vec_spmm_encrypted_matches_plain(ou1024):
    kp = ou1024[0]
    rng = np.random.default_rng(5)
    dense, X = _random_sparse(rng, 7, 4, 0.4)
    e = rng.integers(-100, 100, 7)
    Ee = encrypt_matrix(kp.pk, [e.tolist()], random.Random(2))
    out = vec_spmm_encrypted(Ee, X)
    assert out.decrypt(kp.sk, signed=True) == [(e @ dense).tolist()]
    with pytest.raises(SparseError):
        vec_spmm_encrypted(EncryptedMatrix(1, 2, Ee.values[:2], kp.pk), X)


def test_empty_matrix_products(ou1024):
    kp = ou1024[0]
    X = SparseMatrix.from_dense(np.zeros((3, 2)), scale=0, ring=R)
    EY = encrypt_matrix(kp.pk, [[1], [2]], random.Random(0))
    assert spmm_encrypted(X, EY).decrypt(kp.sk) == [[0], [0], [0]]
    assert accumulation_bits(X) == 0


def test_accumulation_bits():
    X = SparseMatrix.from_dense(np.array([[1, 1, 1], [0, 1, 0]]))
    assert accumulation_bits(X, axis=1) == 2
    assert accumulation_bits(X, axis=0) == 2


def test_take_rows_cols():
    dense = np.arange(12).reshape(3, 4) % 3
    X = SparseMatrix.from_dense(dense)
    assert np.array_equal(X.take_rows([2, 0]).to_dense(), dense[[2, 0]])
    assert np.array_equal(X.take_cols(1, 3).to_dense(), dense[:, 1:3])


def test_svmlight_roundtrip():
    text = "1 1:0.5 3:-2\n0\n# comment\n1 2:1e-3\n"
    X, y = parse_svmlight(io.StringIO(text))
    assert X.shape == (3, 3) and y.tolist() == [1, 0, 1]
    buf = io.StringIO()
    write_svmlight(X, y, buf)
    X2, y2 = parse_svmlight(io.StringIO(buf.getvalue()), 3)
    assert X2 == X and y2.tolist() == y.tolist()


@pytest.mark.parametrize(
    "text,line",
    [("1 1:0.5\n1 0:1\n", 2), ("1 2:1 1:3\n", 1), ("x 1:1\n", 1), ("1 1:nan\n", 1), ("1 1=2\n", 1)],
)
def test_svmlight_errors_report_line(text, line):
    with pytest.raises(ParseError) as exc:
        parse_svmlight(io.StringIO(text))
    assert exc.value.line == line


def test_csv_parse():
    X, y = parse_csv(io.StringIO("label,a,b\n1,0,2\n0,1.5,0\n"))
    assert y.tolist() == [1, 0] and X.to_dense().tolist() == [[0, 2], [1.5, 0]]
    with pytest.raises(ParseError) as exc:
        parse_csv(io.StringIO("1,0\n1,2,3\n"))
    assert exc.value.line == 2
