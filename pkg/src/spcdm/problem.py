"""Sparse problem storage with dual row/column layouts, plus loaders and generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ProblemData:
    """An m-by-n sparse matrix A and right-hand side b, stored twice.

    Column-compressed arrays drive coordinate updates (residual
    maintenance touches one column at a time); row-compressed arrays
    drive structural statistics such as row overlap counts.  Both
    layouts hold the same entries: finite, nonzero, no duplicates,
    indices ascending within each column / row.
    """

    m: int
    n: int
    col_ptr: np.ndarray
    col_rows: np.ndarray
    col_vals: np.ndarray
    row_ptr: np.ndarray
    row_cols: np.ndarray
    row_vals: np.ndarray
    b: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.col_vals.size)

    def col(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Row indices and values of column i (views, ascending rows)."""
        lo, hi = self.col_ptr[i], self.col_ptr[i + 1]
        return self.col_rows[lo:hi], self.col_vals[lo:hi]

    def row(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and values of row j (views, ascending columns)."""
        lo, hi = self.row_ptr[j], self.row_ptr[j + 1]
        return self.row_cols[lo:hi], self.row_vals[lo:hi]

    def col_nnz(self) -> np.ndarray:
        return np.diff(self.col_ptr)

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All stored entries as (rows, cols, vals) in row-major order."""
        rows = np.repeat(np.arange(self.m, dtype=np.int64), self.row_nnz())
        return rows, self.row_cols.copy(), self.row_vals.copy()

    def dense(self) -> np.ndarray:
        """Dense copy of A; small instances only."""
        a = np.zeros((self.m, self.n))
        rows, cols, vals = self.triplets()
        a[rows, cols] = vals
        return a

    @classmethod
    def from_coo(
        cls,
        m: int,
        n: int,
        rows: np.ndarray,
        cols: np.ndarray,
        vals: np.ndarray,
        b: np.ndarray,
    ) -> "ProblemData":
        """Build both layouts from triplets.

        Explicit zeros are dropped.  Non-finite values, out-of-range
        indices, duplicate (row, col) pairs and a bad-length b raise
        ValueError.
        """
        if m < 0 or n < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        b = np.asarray(b, dtype=np.float64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("triplet arrays must have equal length")
        if b.size != m:
            raise ValueError(f"b has length {b.size}, expected {m}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("matrix values must be finite")
        if not np.all(np.isfinite(b)):
            raise ValueError("b values must be finite")
        keep = vals != 0.0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        if rows.size:
            if rows.min() < 0 or rows.max() >= m:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= n:
                raise ValueError("column index out of range")

        # row-major order; duplicate (row, col) pairs are adjacent after sorting
        order = np.lexsort((cols, rows))
        r_sorted, c_sorted, v_sorted = rows[order], cols[order], vals[order]
        if r_sorted.size > 1:
            dup = (r_sorted[1:] == r_sorted[:-1]) & (c_sorted[1:] == c_sorted[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(
                    f"duplicate entry at row {r_sorted[k]}, column {c_sorted[k]}"
                )
        row_ptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(np.bincount(r_sorted, minlength=m), out=row_ptr[1:])

        order = np.lexsort((rows, cols))
        col_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(cols[order], minlength=n), out=col_ptr[1:])

        return cls(
            m=int(m),
            n=int(n),
            col_ptr=col_ptr,
            col_rows=rows[order],
            col_vals=vals[order],
            row_ptr=row_ptr,
            row_cols=c_sorted,
            row_vals=v_sorted,
            b=b.copy(),
        )

    def same_as(self, other: "ProblemData") -> bool:
        """Exact structural and numerical equality."""
        return (
            self.m == other.m
            and self.n == other.n
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.row_cols, other.row_cols)
            and np.array_equal(self.row_vals, other.row_vals)
            and np.array_equal(self.b, other.b)
        )


@dataclass(frozen=True)
class RowSparsityProfile:
    """Max row support size and the histogram of row support sizes.

    per_row_nnz[k] counts rows holding exactly k nonzeros.
    """

    omega: int
    per_row_nnz: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.per_row_nnz.sum())


def row_sparsity(pd: ProblemData) -> RowSparsityProfile:
    """Profile row supports; omega is the largest row nonzero count."""
    counts = pd.row_nnz()
    omega = int(counts.max()) if counts.size else 0
    hist = np.bincount(counts, minlength=omega + 1)
    return RowSparsityProfile(omega=omega, per_row_nnz=hist)


def load_svmlight(path, n_cols: int | None = None) -> ProblemData:
    """Read a sparse dataset in svmlight/libsvm text format.

    Each nonempty line is ``label idx:val idx:val ...`` with 1-based,
    strictly ascending feature indices.  Zero-valued entries are
    dropped after parsing (the index still counts toward the column
    count).  The column count is the largest index seen unless
    ``n_cols`` overrides it; the override must not undercut the data.

    Raises ValueError with the offending line number on malformed
    tokens or non-ascending indices, and on an empty dataset.
    """
    labels: list[float] = []
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
            except ValueError:
                raise ValueError(f"line {lineno}: bad label {parts[0]!r}") from None
            prev = 0
            for tok in parts[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ValueError(f"line {lineno}: bad token {tok!r}")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ValueError(f"line {lineno}: bad token {tok!r}") from None
                if idx < 1:
                    raise ValueError(f"line {lineno}: index {idx} must be >= 1")
                if idx <= prev:
                    raise ValueError(
                        f"line {lineno}: indices not strictly ascending at {tok!r}"
                    )
                if not np.isfinite(val):
                    raise ValueError(f"line {lineno}: non-finite value in {tok!r}")
                prev = idx
                max_idx = max(max_idx, idx)
                if val != 0.0:
                    rows.append(len(labels))
                    cols.append(idx - 1)
                    vals.append(val)
            labels.append(label)
    if not labels:
        raise ValueError(f"{path}: no rows")
    n = max_idx
    if n_cols is not None:
        if n_cols < max_idx:
            raise ValueError(f"n_cols={n_cols} smaller than max index {max_idx}")
        n = n_cols
    return ProblemData.from_coo(
        m=len(labels),
        n=n,
        rows=np.array(rows, dtype=np.int64),
        cols=np.array(cols, dtype=np.int64),
        vals=np.array(vals, dtype=np.float64),
        b=np.array(labels, dtype=np.float64),
    )


def save_svmlight(pd: ProblemData, path) -> None:
    """Write svmlight/libsvm text that load_svmlight reads back exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for j in range(pd.m):
            cols, vals = pd.row(j)
            toks = [f"{pd.b[j]:.17g}"]
            toks.extend(f"{c + 1}:{v:.17g}" for c, v in zip(cols, vals))
            fh.write(" ".join(toks) + "\n")


def synth_problem(m: int, n: int, omega_target: int, seed: int) -> ProblemData:
    """Random instance with exactly omega_target nonzeros per row.

    Column positions are drawn without replacement per row; values are
    uniform on [-1, -0.1] U [0.1, 1] so no entry sits near zero; b is
    a random sign vector.  Same seed, same instance.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 1 <= omega_target <= n:
        raise ValueError("omega_target must satisfy 1 <= omega_target <= n")
    rng = np.random.default_rng(seed)
    cols = np.concatenate(
        [np.sort(rng.choice(n, size=omega_target, replace=False)) for _ in range(m)]
    )
    rows = np.repeat(np.arange(m, dtype=np.int64), omega_target)
    nnz = m * omega_target
    vals = rng.uniform(0.1, 1.0, size=nnz) * rng.choice([-1.0, 1.0], size=nnz)
    b = rng.choice([-1.0, 1.0], size=m)
    return ProblemData.from_coo(m, n, rows, cols, vals, b)


def stack_linf(pd: ProblemData) -> ProblemData:
    """Stack [A; -A] with right-hand side (b; -b).

    Max-of-rows smoothing of the L-infinity residual norm operates on
    this doubled system; row supports (and hence omega) are unchanged.
    """
    rows, cols, vals = pd.triplets()
    return ProblemData.from_coo(
        m=2 * pd.m,
        n=pd.n,
        rows=np.concatenate([rows, rows + pd.m]),
        cols=np.concatenate([cols, cols]),
        vals=np.concatenate([vals, -vals]),
        b=np.concatenate([pd.b, -pd.b]),
    )
