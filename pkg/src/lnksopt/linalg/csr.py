"""CSR helpers: invariant checks, fast repeated assembly, Matrix Market I/O."""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp

# scipy's CSR type carries every sparse block (R_u, R_x, Hessian blocks, stiffness)
SparseMatrixCsr = sp.csr_matrix


def validate_csr(A) -> None:
    """Raise ``ValueError`` if ``A`` violates the CSR invariants."""
    nrows, ncols = A.shape
    ptr, idx = A.indptr, A.indices
    if len(ptr) != nrows + 1 or ptr[0] != 0:
        raise ValueError("row_offsets must have length nrows+1 and start at 0")
    if np.any(np.diff(ptr) < 0):
        raise ValueError("row_offsets must be non-decreasing")
    if len(A.data) != ptr[-1] or len(idx) != ptr[-1]:
        raise ValueError("values/col_indices length must equal row_offsets[nrows]")
    if len(idx) and (idx.min() < 0 or idx.max() >= ncols):
        raise ValueError("column index out of range")
    for i in range(nrows):
        row = idx[ptr[i]:ptr[i + 1]]
        if np.any(np.diff(row) <= 0):
            raise ValueError(f"column indices not strictly increasing in row {i}")


class PatternAssembler:
    """Precomputed COO -> CSR scatter for a fixed sparsity pattern.

    Building the pattern once and scattering with ``bincount`` afterwards is
    far cheaper than re-running ``coo -> csr`` conversion at every assembly.
    """

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        self.shape = shape
        key = rows * shape[1] + cols
        uniq, self._slot = np.unique(key, return_inverse=True)
        r = uniq // shape[1]
        c = uniq % shape[1]
        self.nnz = len(uniq)
        self._indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.add.at(self._indptr, r + 1, 1)
        self._indptr = np.cumsum(self._indptr)
        self._indices = c.astype(np.int32)

    def assemble(self, values) -> sp.csr_matrix:
        data = np.bincount(self._slot, weights=np.asarray(values).ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self._indices.copy(), self._indptr.copy()), shape=self.shape)


def write_matrix_market(path, A) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))


def read_matrix_market(path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(path)))
