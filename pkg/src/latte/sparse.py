"""Rectangular sparse matrices between two typed node sets.

A biadjacency matrix relates a source node type to a (generally different)
target node type, so it is non-square and carries no diagonal. Entries are
strictly positive link weights; an absent entry means "no link".
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError


class SparseBiadj:
    """Immutable CSR-backed biadjacency matrix with positive weights."""

    __slots__ = ("mat",)

    def __init__(self, mat: sp.spmatrix, shape: tuple[int, int] | None = None):
        m = sp.csr_matrix(mat, shape=shape, dtype=np.float64, copy=True)
        m.sum_duplicates()
        if m.nnz and m.data.min() < 0:
            raise ValidationError("negative edge weight")
        m.eliminate_zeros()
        m.sort_indices()
        self.mat = m

    @classmethod
    def from_edges(cls, rows, cols, weights, shape: tuple[int, int]) -> "SparseBiadj":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        if rows.size:
            if rows.min() < 0 or rows.max() >= shape[0]:
                raise ValidationError("row index out of range")
            if cols.min() < 0 or cols.max() >= shape[1]:
                raise ValidationError("col index out of range")
        coo = sp.coo_matrix((weights, (rows, cols)), shape=shape)
        return cls(coo)

    @property
    def n_rows(self) -> int:
        return self.mat.shape[0]

    @property
    def n_cols(self) -> int:
        return self.mat.shape[1]

    @property
    def nnz(self) -> int:
        return self.mat.nnz

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and weights of row i, in column order."""
        lo, hi = self.mat.indptr[i], self.mat.indptr[i + 1]
        return self.mat.indices[lo:hi], self.mat.data[lo:hi]

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rows, cols, weights) in row-major order."""
        coo = self.mat.tocoo()
        return coo.row, coo.col, coo.data

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.mat.sum(axis=1)).ravel()

    def col_sums(self) -> np.ndarray:
        return np.asarray(self.mat.sum(axis=0)).ravel()

    def row_degrees(self) -> np.ndarray:
        """Unweighted out-degree per row."""
        return np.diff(self.mat.indptr)

    def transpose(self) -> "SparseBiadj":
        return SparseBiadj(self.mat.T.tocsr())

    def to_dense(self) -> np.ndarray:
        return self.mat.toarray()

    def contains(self, rows, cols) -> np.ndarray:
        """Vectorized membership test for (row, col) pairs."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        out = np.zeros(rows.shape, dtype=bool)
        for idx, (i, j) in enumerate(zip(rows, cols)):
            lo, hi = self.mat.indptr[i], self.mat.indptr[i + 1]
            pos = np.searchsorted(self.mat.indices[lo:hi], j)
            out[idx] = pos < hi - lo and self.mat.indices[lo + pos] == j
        return out

    def equal(self, other: "SparseBiadj") -> bool:
        if self.mat.shape != other.mat.shape or self.mat.nnz != other.mat.nnz:
            return False
        return (
            np.array_equal(self.mat.indptr, other.mat.indptr)
            and np.array_equal(self.mat.indices, other.mat.indices)
            and np.array_equal(self.mat.data, other.mat.data)
        )

    def __repr__(self) -> str:
        return f"SparseBiadj({self.n_rows}x{self.n_cols}, nnz={self.nnz})"
