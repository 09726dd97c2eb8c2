"""Dataset ingestion, vertical partitioning and a seeded synthetic generator.

Party-local files are svmlight.  Party B's file carries the labels; party
A's file has the same rows with the label field omitted, so A never holds
label data on disk.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .sparse import ParseError, SparseMatrix, parse_csv, parse_svmlight, write_svmlight


class SplitError(ValueError):
    pass


@dataclass
class DatasetMeta:
    n: int
    d_a: int
    d_b: int
    density: float
    label_holder: str = "B"

    @property
    def d(self) -> int:
        return self.d_a + self.d_b

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def density(values) -> float:
    """Fraction of non-zero entries."""
    a = np.asarray(values)
    return float(np.count_nonzero(a)) / a.size if a.size else 0.0


def parse_split(text: str, d: int | None = None) -> tuple[tuple[int, int], tuple[int, int]]:
    """``"0:15,15:40"`` -> column ranges for A and B (half-open, 0-based)."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise SplitError("split needs exactly two ranges, 'a_lo:a_hi,b_lo:b_hi'")
    ranges = []
    for p in parts:
        lo_s, sep, hi_s = p.partition(":")
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            raise SplitError(f"bad range {p!r}") from None
        if not sep or lo < 0 or hi < lo:
            raise SplitError(f"bad range {p!r}")
        if d is not None and hi > d:
            raise SplitError(f"range {p!r} exceeds the {d} available columns")
        ranges.append((lo, hi))
    (a0, a1), (b0, b1) = ranges
    if max(a0, b0) < min(a1, b1):
        raise SplitError(f"column ranges {parts[0]} and {parts[1]} overlap")
    return ranges[0], ranges[1]


def binary_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    vals = set(np.unique(y).tolist())
    if vals <= {0.0, 1.0}:
        return y.astype(np.int64)
    if vals <= {-1.0, 1.0}:
        return (y > 0).astype(np.int64)
    raise ParseError(f"labels must be 0/1 or -1/+1, found {sorted(vals)[:5]}")


def read_dataset(path, fmt: str = "svmlight", n_features: int | None = None, label_col: int = 0):
    with open(path) as fh:
        if fmt == "svmlight":
            X, y = parse_svmlight(fh, n_features)
        elif fmt == "csv":
            X, y = parse_csv(fh, label_col)
        else:
            raise ValueError(f"unknown format {fmt!r}")
    return X, binary_labels(y)


def split_columns(X: SparseMatrix, split) -> tuple[SparseMatrix, SparseMatrix]:
    (a0, a1), (b0, b1) = parse_split(split, X.cols) if isinstance(split, str) else split
    return X.take_cols(a0, a1), X.take_cols(b0, b1)


def write_features(X: SparseMatrix, fh) -> None:
    for i in range(X.rows):
        s, e = X.indptr[i], X.indptr[i + 1]
        fh.write(" ".join(f"{int(j) + 1}:{repr(float(v))}" for j, v in zip(X.indices[s:e], X.data[s:e])) + "\n")


def read_features(lines, n_features: int) -> SparseMatrix:
    # reuse the svmlight parser by supplying a dummy label
    return parse_svmlight(("0 " + ln if ln.strip() else "0\n" for ln in lines), n_features)[0]


def write_party_files(X_a: SparseMatrix, X_b: SparseMatrix, y, out_dir) -> DatasetMeta:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "party_a.svm", "w") as fh:
        write_features(X_a, fh)
    with open(out / "party_b.svm", "w") as fh:
        write_svmlight(X_b, y, fh)
    nnz = X_a.nnz + X_b.nnz
    meta = DatasetMeta(X_a.rows, X_a.cols, X_b.cols, nnz / max(1, X_a.rows * (X_a.cols + X_b.cols)))
    (out / "meta.json").write_text(meta.to_json() + "\n")
    return meta


def load_meta(data_dir) -> DatasetMeta:
    return DatasetMeta(**json.loads((Path(data_dir) / "meta.json").read_text()))


def load_party(data_dir, role: str):
    """Party-local view: ``(X, y)`` with ``y = None`` at A."""
    d = Path(data_dir)
    meta = load_meta(d)
    if role == "A":
        with open(d / "party_a.svm") as fh:
            return read_features(fh, meta.d_a), None
    with open(d / "party_b.svm") as fh:
        X, y = parse_svmlight(fh, meta.d_b)
    return X, binary_labels(y)


def ingest(path, fmt: str, split: str, out_dir, n_features: int | None = None, label_col: int = 0) -> DatasetMeta:
    X, y = read_dataset(path, fmt, n_features, label_col)
    X_a, X_b = split_columns(X, split)
    return write_party_files(X_a, X_b, y, out_dir)


def synthetic(n: int, d: int, dens: float = 0.1, seed: int = 0, digits: int = 4, noise: float = 0.0):
    """Sparse features with a planted linear separator.

    Non-zero values are standard normal, rounded to ``digits`` decimals so
    the data is exactly representable at that fixed-point scale.  Labels
    are ``1[X w* + noise > 0]``.
    """
    if not 0 < dens <= 1:
        raise ValueError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    mask = rng.random((n, d)) < dens
    vals = np.round(rng.standard_normal((n, d)), digits)
    dense = np.where(mask, vals, 0.0)
    w_true = rng.standard_normal(d)
    z = dense @ w_true + noise * rng.standard_normal(n)
    y = (z > 0).astype(np.int64)
    return SparseMatrix.from_dense(dense), y, w_true


def write_synthetic(path, n: int, d: int, dens: float = 0.1, seed: int = 0) -> None:
    X, y, _ = synthetic(n, d, dens, seed)
    with open(path, "w") as fh:
        write_svmlight(X, y, fh)


def train_test_split(n: int, test_frac: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng([seed, 7919]).permutation(n)
    k = int(round(n * test_frac))
    return np.sort(perm[k:]), np.sort(perm[:k])


def predict(X_a: SparseMatrix, X_b: SparseMatrix, w_a, w_b, approx=None) -> np.ndarray:
    """Scores for held-out rows; the exact sigmoid unless ``approx`` is given."""
    from .training.sigmoid import sigmoid

    z = X_a.to_dense() @ np.asarray(w_a) + X_b.to_dense() @ np.asarray(w_b)
    return np.clip(approx(z), 0.0, 1.0) if approx is not None else sigmoid(z)
