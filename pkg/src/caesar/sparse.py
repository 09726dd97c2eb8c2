"""CSR matrices, ring products and plaintext-sparse x encrypted-dense products."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .he.matrix import EncryptedMatrix
from .ring import RingParams, encode_array


class SparseError(ValueError):
    pass


class ParseError(SparseError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class SparseMatrix:
    """Compressed sparse row matrix.

    ``data`` is either float64 (raw features) or ring elements, in which case
    ``scale`` and ``ring`` describe the fixed-point encoding.
    """

    def __init__(self, rows: int, cols: int, indptr, indices, data, scale: int | None = None, ring: RingParams | None = None):
        self.rows, self.cols = int(rows), int(cols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data) if ring is None else np.asarray(data, dtype=ring.dtype)
        self.scale = scale
        self.ring = ring
        self._signed = None
        self.validate()

    def validate(self) -> None:
        if self.indptr.shape != (self.rows + 1,):
            raise SparseError("row offsets must have rows + 1 entries")
        if self.indptr[0] != 0 or np.any(np.diff(self.indptr) < 0):
            raise SparseError("row offsets must start at 0 and be non-decreasing")
        nnz = int(self.indptr[-1])
        if self.indices.shape != (nnz,) or self.data.shape != (nnz,):
            raise SparseError("column index / value arrays must have nnz entries")
        if nnz and (self.indices.min() < 0 or self.indices.max() >= self.cols):
            raise SparseError("column index out of range")
        for i in range(self.rows):
            seg = self.indices[self.indptr[i] : self.indptr[i + 1]]
            if seg.size > 1 and np.any(np.diff(seg) <= 0):
                raise SparseError(f"column indices of row {i} are not strictly increasing")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    @property
    def density(self) -> float:
        size = self.rows * self.cols
        return self.nnz / size if size else 0.0

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.indptr)

    def row_of_entry(self) -> np.ndarray:
        return np.repeat(np.arange(self.rows), self.row_nnz())

    def signed_data(self) -> list[int]:
        """Entries as signed Python ints (ring matrices only)."""
        if self.ring is None:
            raise SparseError("signed_data needs a ring-encoded matrix")
        if self._signed is None:
            self._signed = self.ring.signed_ints(self.data)
        return self._signed

    def max_abs_bits(self) -> int:
        if self.nnz == 0:
            return 0
        if self.ring is None:
            return int(np.max(np.abs(self.data))).bit_length()
        return max(abs(v) for v in self.signed_data()).bit_length()

    @classmethod
    def from_dense(cls, dense, scale=None, ring=None) -> "SparseMatrix":
        dense = np.asarray(dense)
        if dense.ndim != 2:
            raise SparseError("from_dense needs a 2-D array")
        mask = dense != 0
        indptr = np.concatenate([[0], np.cumsum(mask.sum(axis=1))])
        rows_idx, cols_idx = np.nonzero(mask)
        return cls(dense.shape[0], dense.shape[1], indptr, cols_idx, dense[rows_idx, cols_idx], scale, ring)

    def to_dense(self) -> np.ndarray:
        dtype = self.ring.dtype if self.ring is not None else self.data.dtype
        out = np.zeros((self.rows, self.cols), dtype=dtype)
        out[self.row_of_entry(), self.indices] = self.data
        return out

    def encode(self, c: int, ring: RingParams = RingParams()) -> "SparseMatrix":
        """Fixed-point encode a float matrix; entries flooring to zero are dropped."""
        if self.ring is not None:
            raise SparseError("matrix is already ring-encoded")
        vals = encode_array(self.data, c, ring)
        keep = vals != 0
        counts = np.bincount(self.row_of_entry()[keep], minlength=self.rows)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return SparseMatrix(self.rows, self.cols, indptr, self.indices[keep], vals[keep], c, ring)

    def take_rows(self, idx) -> "SparseMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        starts, ends = self.indptr[idx], self.indptr[idx + 1]
        counts = ends - starts
        sel = np.concatenate([np.arange(s, e) for s, e in zip(starts, ends)]) if idx.size else np.zeros(0, np.int64)
        sel = sel.astype(np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return SparseMatrix(idx.size, self.cols, indptr, self.indices[sel], self.data[sel], self.scale, self.ring)

    def take_cols(self, lo: int, hi: int) -> "SparseMatrix":
        if not 0 <= lo <= hi <= self.cols:
            raise SparseError(f"column range [{lo}, {hi}) outside [0, {self.cols}]")
        keep = (self.indices >= lo) & (self.indices < hi)
        counts = np.bincount(self.row_of_entry()[keep], minlength=self.rows)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return SparseMatrix(self.rows, hi - lo, indptr, self.indices[keep] - lo, self.data[keep], self.scale, self.ring)

    def __eq__(self, other):
        return (
            isinstance(other, SparseMatrix)
            and self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self):
        return f"<SparseMatrix {self.rows}x{self.cols} nnz={self.nnz} scale={self.scale}>"


@dataclass
class DenseMatrix:
    values: np.ndarray
    scale: int = 0
    ring: RingParams = RingParams()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=self.ring.dtype)
        if self.values.ndim == 1:
            self.values = self.values.reshape(-1, 1)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


class OpCounter:
    """Thread-safe tally of homomorphic operations."""

    def __init__(self):
        self.op2 = 0
        self.op3 = 0
        self.zero_seeds = 0
        self._lock = threading.Lock()

    def add(self, op2=0, op3=0, zero_seeds=0):
        with self._lock:
            self.op2 += op2
            self.op3 += op3
            self.zero_seeds += zero_seeds

    def reset(self):
        with self._lock:
            self.op2 = self.op3 = self.zero_seeds = 0


GLOBAL_COUNTER = OpCounter()


# -- ring products ---------------------------------------------------------------


def csr_matmul_ring(X: SparseMatrix, Y: np.ndarray, ring: RingParams) -> np.ndarray:
    """``X @ Y mod 2^l`` for a ring CSR ``X`` and a ring array ``Y`` (k or k x m)."""
    Y = np.asarray(Y, dtype=ring.dtype)
    vec = Y.ndim == 1
    Y2 = Y.reshape(-1, 1) if vec else Y
    if X.cols != Y2.shape[0]:
        raise SparseError(f"dimension mismatch: {X.shape} @ {Y2.shape}")
    out = ring.zeros((X.rows, Y2.shape[1]))
    if X.nnz:
        prods = ring.wrap(X.data[:, None] * Y2[X.indices])
        rows = X.row_of_entry()
        np.add.at(out, rows, prods)
        out = ring.wrap(out)
    return out.ravel() if vec else out


def vec_csr_ring(e: np.ndarray, X: SparseMatrix, ring: RingParams) -> np.ndarray:
    """``e^T X mod 2^l`` for a ring vector ``e`` of length ``X.rows``."""
    e = np.asarray(e, dtype=ring.dtype).ravel()
    if e.shape[0] != X.rows:
        raise SparseError(f"dimension mismatch: 1x{e.shape[0]} @ {X.shape}")
    out = ring.zeros(X.cols)
    if X.nnz:
        prods = ring.wrap(e[X.row_of_entry()] * X.data)
        np.add.at(out, X.indices, prods)
        out = ring.wrap(out)
    return out


def spmm_plain(X: SparseMatrix, Y: DenseMatrix) -> DenseMatrix:
    if X.ring is None:
        raise SparseError("spmm_plain needs a ring-encoded sparse matrix")
    if X.cols != Y.rows:
        raise SparseError(f"dimension mismatch: {X.shape} @ {Y.values.shape}")
    return DenseMatrix(csr_matmul_ring(X, Y.values, Y.ring), (X.scale or 0) + Y.scale, Y.ring)


# -- encrypted products ----------------------------------------------------------


def spmm_encrypted(X: SparseMatrix, EY: EncryptedMatrix, counter: OpCounter | None = None) -> EncryptedMatrix:
    """``X @ [[Y]]`` using op3 on X's nonzeros and op2 to accumulate.

    Rows of X with no nonzeros get ``op3(0, EY[0, j])`` (a trivial encryption
    of zero) so the layer never needs the public key's encrypt.
    """
    if X.cols != EY.rows:
        raise SparseError(f"dimension mismatch: {X.shape} @ {EY.shape}")
    pk, m = EY.pk, EY.cols
    xs = X.signed_data()
    vals = EY.values
    out = []
    n_op2 = n_op3 = seeds = 0
    for i in range(X.rows):
        s, e = int(X.indptr[i]), int(X.indptr[i + 1])
        for j in range(m):
            if s == e:
                out.append(pk.raw_mul_plain(vals[j], 0) if vals else pk.zero_ciphertext())
                seeds += 1
                continue
            acc = pk.raw_mul_plain(vals[int(X.indices[s]) * m + j], xs[s])
            for t in range(s + 1, e):
                acc = pk.raw_add(acc, pk.raw_mul_plain(vals[int(X.indices[t]) * m + j], xs[t]))
            out.append(acc)
            n_op3 += e - s
            n_op2 += e - s - 1
    (counter or GLOBAL_COUNTER).add(op2=n_op2, op3=n_op3, zero_seeds=seeds)
    return EncryptedMatrix(X.rows, m, out, pk, (X.scale or 0) + EY.scale)


def vec_spmm_encrypted(e: EncryptedMatrix, X: SparseMatrix, counter: OpCounter | None = None) -> EncryptedMatrix:
    """``[[e]]^T X`` for a 1 x n (or n x 1) encrypted vector, accumulated per column."""
    if e.size != X.rows:
        raise SparseError(f"dimension mismatch: 1x{e.size} @ {X.shape}")
    pk = e.pk
    xs = X.signed_data()
    acc = [None] * X.cols
    n_op2 = n_op3 = 0
    for k in range(X.rows):
        ek = e.values[k]
        for t in range(int(X.indptr[k]), int(X.indptr[k + 1])):
            j = int(X.indices[t])
            term = pk.raw_mul_plain(ek, xs[t])
            n_op3 += 1
            if acc[j] is None:
                acc[j] = term
            else:
                acc[j] = pk.raw_add(acc[j], term)
                n_op2 += 1
    seeds = 0
    for j in range(X.cols):
        if acc[j] is None:
            acc[j] = pk.raw_mul_plain(e.values[0], 0) if e.values else pk.zero_ciphertext()
            seeds += 1
    (counter or GLOBAL_COUNTER).add(op2=n_op2, op3=n_op3, zero_seeds=seeds)
    return EncryptedMatrix(1, X.cols, acc, pk, (X.scale or 0) + e.scale)


def accumulation_bits(X: SparseMatrix, axis: int = 1) -> int:
    """log2 bound on the number of terms summed per output (row- or column-wise)."""
    if X.nnz == 0:
        return 0
    if axis == 1:
        longest = int(X.row_nnz().max())
    else:
        longest = int(np.bincount(X.indices, minlength=X.cols).max())
    return max(1, math.ceil(math.log2(longest + 1)))


# -- text formats ----------------------------------------------------------------


def _finite(v: float, line: int) -> float:
    if not math.isfinite(v):
        raise ParseError("NaN/Inf values are not allowed", line)
    return v


def parse_svmlight(lines, n_features: int | None = None) -> tuple[SparseMatrix, np.ndarray]:
    """``label idx:val ...`` with 1-based feature indices."""
    labels, indptr, indices, data = [], [0], [], []
    max_idx = 0
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        try:
            labels.append(_finite(float(parts[0]), lineno))
        except ValueError:
            raise ParseError(f"bad label {parts[0]!r}", lineno) from None
        prev = 0
        for tok in parts[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno)
            try:
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise ParseError(f"bad entry {tok!r}", lineno) from None
            _finite(val, lineno)
            if idx < 1:
                raise ParseError(f"feature index {idx} is not 1-based", lineno)
            if n_features is not None and idx > n_features:
                raise ParseError(f"feature index {idx} exceeds {n_features}", lineno)
            if idx <= prev:
                raise ParseError("feature indices must be strictly increasing", lineno)
            prev = idx
            max_idx = max(max_idx, idx)
            if val != 0.0:
                indices.append(idx - 1)
                data.append(val)
        indptr.append(len(indices))
    cols = n_features if n_features is not None else max_idx
    X = SparseMatrix(len(labels), cols, indptr, indices, np.asarray(data, dtype=np.float64))
    return X, np.asarray(labels, dtype=np.float64)


def parse_csv(lines, label_col: int = 0, header: bool | None = None) -> tuple[SparseMatrix, np.ndarray]:
    """Dense CSV with the label in ``label_col``; a non-numeric first row is a header."""
    rows, labels = [], []
    width = None
    for lineno, raw in enumerate(lines, 1):
        text = raw.strip()
        if not text:
            continue
        cells = [c.strip() for c in text.split(",")]
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            if lineno == 1 and header is not False:
                continue
            raise ParseError("non-numeric cell", lineno) from None
        for v in vals:
            _finite(v, lineno)
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise ParseError(f"expected {width} columns, got {len(vals)}", lineno)
        if not 0 <= label_col < len(vals):
            raise ParseError(f"label column {label_col} out of range", lineno)
        labels.append(vals.pop(label_col))
        rows.append(vals)
    dense = np.asarray(rows, dtype=np.float64).reshape(len(rows), (width - 1) if width else 0)
    return SparseMatrix.from_dense(dense), np.asarray(labels, dtype=np.float64)


def write_svmlight(X: SparseMatrix, y, fh) -> None:
    for i in range(X.rows):
        s, e = X.indptr[i], X.indptr[i + 1]
        feats = " ".join(f"{int(j) + 1}:{repr(float(v))}" for j, v in zip(X.indices[s:e], X.data[s:e]))
        lab = y[i] if y is not None else 0
        lab_s = str(int(lab)) if float(lab).is_integer() else repr(float(lab))
        fh.write(f"{lab_s} {feats}".rstrip() + "\n")
