"""Fixed-pattern sparse assembly.

Element loops always scatter into the same (row, col) multiset, so the CSR
structure of every operator here is fixed per mesh.  This helper sorts the
scatter entries once and afterwards turns raw per-entry values into CSR data
with a single permutation + segmented reduction, avoiding the repeated
COO -> CSR conversions that would otherwise dominate assembly time.
"""

import numpy as np
import scipy.sparse as sp


class FixedPattern:
    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        order = np.lexsort((cols, rows))
        r_s = rows[order]
        c_s = cols[order]
        new = np.empty(len(order), dtype=bool)
        new[0] = True
        new[1:] = (r_s[1:] != r_s[:-1]) | (c_s[1:] != c_s[:-1])
        starts = np.flatnonzero(new)
        self._order = order
        self._starts = starts
        self._indices = c_s[starts].astype(np.int32)
        counts = np.bincount(r_s[starts], minlength=shape[0])
        self._indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int32)
        self._shape = shape

    @property
    def nnz(self):
        return len(self._indices)

    def data(self, vals):
        """Reduce raw scatter values (aligned with the constructor's rows/cols)
        into the CSR data vector."""
        return np.add.reduceat(vals[self._order], self._starts)

    def matrix(self, vals):
        return sp.csr_matrix(
            (self.data(vals), self._indices, self._indptr), shape=self._shape
        )

    def matrix_from_data(self, data):
        return sp.csr_matrix((data, self._indices, self._indptr), shape=self._shape)
