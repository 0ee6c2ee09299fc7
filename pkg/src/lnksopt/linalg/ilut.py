"""Threshold incomplete LU factorization (ILUT) with a per-row fill budget."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class IlutParams:
    fill_ratio: float = 2.0
    abs_threshold: float = 1e-4
    rel_threshold: float = 1.0
    drop_tolerance: float = 1e-10


@numba.njit(cache=True)
def _heap_push(heap, size, value):
    i = size
    heap[i] = value
    while i > 0:
        parent = (i - 1) // 2
        if heap[parent] <= heap[i]:
            break
        heap[parent], heap[i] = heap[i], heap[parent]
        i = parent
    return size + 1


@numba.njit(cache=True)
def _heap_pop(heap, size):
    top = heap[0]
    size -= 1
    heap[0] = heap[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        child = left
        if left + 1 < size and heap[left + 1] < heap[left]:
            child = left + 1
        if heap[i] <= heap[child]:
            break
        heap[i], heap[child] = heap[child], heap[i]
        i = child
    return top, size


@numba.njit(cache=True)
def _ilut_kernel(n, indptr, indices, data, fill_ratio, drop_tol, abs_thr, rel_thr):
    # per-row budgets from the source pattern
    lcap = np.zeros(n, dtype=np.int64)
    ucap = np.zeros(n, dtype=np.int64)
    for i in range(n):
        nl = 0
        nu = 0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j < i:
                nl += 1
            elif j > i:
                nu += 1
        lcap[i] = int(fill_ratio * nl)
        ucap[i] = int(fill_ratio * nu)
    l_ptr = np.zeros(n + 1, dtype=np.int64)
    u_ptr = np.zeros(n + 1, dtype=np.int64)
    l_idx = np.empty(lcap.sum(), dtype=np.int64)
    l_val = np.empty(lcap.sum(), dtype=np.float64)
    u_idx = np.empty(ucap.sum(), dtype=np.int64)
    u_val = np.empty(ucap.sum(), dtype=np.float64)
    diag = np.zeros(n, dtype=np.float64)

    w = np.zeros(n, dtype=np.float64)
    pos = -np.ones(n, dtype=np.int64)
    lower = np.empty(n, dtype=np.int64)
    upper = np.empty(n, dtype=np.int64)
    heap = np.empty(n, dtype=np.int64)
    n_perturbed = 0
    nl_tot = 0
    nu_tot = 0

    for i in range(n):
        nlow = 0
        nup = 0
        has_diag = False
        rnorm = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            rnorm += v * v
            w[j] = v
            if j < i:
                pos[j] = nlow
                lower[nlow] = j
                nlow += 1
            elif j > i:
                pos[j] = nup
                upper[nup] = j
                nup += 1
            else:
                has_diag = True
                pos[j] = 0
        if not has_diag:
            w[i] = 0.0
            pos[i] = 0
        rnorm = np.sqrt(rnorm)
        tol = drop_tol * rnorm

        # eliminate lower entries in increasing column order
        hsize = 0
        for q in range(nlow):
            hsize = _heap_push(heap, hsize, lower[q])
        while hsize > 0:
            k, hsize = _heap_pop(heap, hsize)
            mult = w[k] / diag[k]
            if abs(mult) <= tol:
                w[k] = 0.0
                continue
            w[k] = mult
            for p in range(u_ptr[k], u_ptr[k + 1]):
                j = u_idx[p]
                upd = mult * u_val[p]
                if pos[j] < 0:
                    # fill-in
                    w[j] = -upd
                    if j < i:
                        pos[j] = nlow
                        lower[nlow] = j
                        nlow += 1
                        hsize = _heap_push(heap, hsize, j)
                    elif j > i:
                        pos[j] = nup
                        upper[nup] = j
                        nup += 1
                    else:
                        pos[j] = 0
                else:
                    w[j] -= upd

        # L row: largest lcap[i] multipliers
        cnt = 0
        cand = np.empty(nlow, dtype=np.int64)
        for q in range(nlow):
            j = lower[q]
            if w[j] != 0.0 and abs(w[j]) > tol:
                cand[cnt] = j
                cnt += 1
        cand = cand[:cnt]
        if cnt > lcap[i]:
            mags = np.empty(cnt)
            for q in range(cnt):
                mags[q] = -abs(w[cand[q]])
            order = np.argsort(mags)
            cand = cand[order[: lcap[i]]]
        cand = np.sort(cand)
        for q in range(cand.shape[0]):
            l_idx[nl_tot] = cand[q]
            l_val[nl_tot] = w[cand[q]]
            nl_tot += 1
        l_ptr[i + 1] = nl_tot

        # U row: diagonal + largest ucap[i] off-diagonals
        cnt = 0
        cand = np.empty(nup, dtype=np.int64)
        for q in range(nup):
            j = upper[q]
            if abs(w[j]) > tol:
                cand[cnt] = j
                cnt += 1
        cand = cand[:cnt]
        if cnt > ucap[i]:
            mags = np.empty(cnt)
            for q in range(cnt):
                mags[q] = -abs(w[cand[q]])
            order = np.argsort(mags)
            cand = cand[order[: ucap[i]]]
        cand = np.sort(cand)
        for q in range(cand.shape[0]):
            u_idx[nu_tot] = cand[q]
            u_val[nu_tot] = w[cand[q]]
            nu_tot += 1
        u_ptr[i + 1] = nu_tot

        d = w[i]
        if abs(d) <= max(tol, 1e-300):
            sgn = 1.0 if d >= 0.0 else -1.0
            d = sgn * (abs_thr * max(rnorm, 1.0) + rel_thr * abs(d))
            n_perturbed += 1
        diag[i] = d

        # reset work arrays
        for q in range(nlow):
            j = lower[q]
            w[j] = 0.0
            pos[j] = -1
        for q in range(nup):
            j = upper[q]
            w[j] = 0.0
            pos[j] = -1
        w[i] = 0.0
        pos[i] = -1

    return (l_ptr, l_idx[:nl_tot].copy(), l_val[:nl_tot].copy(),
            u_ptr, u_idx[:nu_tot].copy(), u_val[:nu_tot].copy(), diag, n_perturbed)


@numba.njit(cache=True)
def _solve_lu(l_ptr, l_idx, l_val, u_ptr, u_idx, u_val, diag, b):
    n = b.shape[0]
    y = b.copy()
    for i in range(n):
        s = y[i]
        for p in range(l_ptr[i], l_ptr[i + 1]):
            s -= l_val[p] * y[l_idx[p]]
        y[i] = s
    for i in range(n - 1, -1, -1):
        s = y[i]
        for p in range(u_ptr[i], u_ptr[i + 1]):
            s -= u_val[p] * y[u_idx[p]]
        y[i] = s / diag[i]
    return y


@numba.njit(cache=True)
def _solve_lu_transpose(l_ptr, l_idx, l_val, u_ptr, u_idx, u_val, diag, b):
    # (LU)^T x = b  ->  U^T y = b, then L^T x = y
    n = b.shape[0]
    y = b.copy()
    for i in range(n):
        y[i] = y[i] / diag[i]
        yi = y[i]
        for p in range(u_ptr[i], u_ptr[i + 1]):
            y[u_idx[p]] -= u_val[p] * yi
    for i in range(n - 1, -1, -1):
        yi = y[i]
        for p in range(l_ptr[i], l_ptr[i + 1]):
            y[l_idx[p]] -= l_val[p] * yi
    return y


class IlutPreconditioner:
    """ILUT factors ``L U ~ A``; ``L`` has a unit diagonal that is not stored.

    Zero or negligible pivots are replaced by ``abs_threshold`` (scaled by the
    row norm) plus ``rel_threshold`` times the pivot magnitude, and counted in
    ``n_perturbed`` instead of failing.
    """

    def __init__(self, A, params: IlutParams = IlutParams()):
        A = sp.csr_matrix(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ValueError("ILUT needs a square matrix")
        A.sort_indices()
        self.params = params
        self.shape = A.shape
        self.source_nnz = A.nnz
        out = _ilut_kernel(
            A.shape[0], A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data,
            params.fill_ratio, params.drop_tolerance, params.abs_threshold, params.rel_threshold,
        )
        (self._l_ptr, self._l_idx, self._l_val,
         self._u_ptr, self._u_idx, self._u_val, self._diag, self.n_perturbed) = out

    @property
    def nnz(self) -> int:
        return len(self._l_val) + len(self._u_val) + len(self._diag)

    def solve(self, b):
        return _solve_lu(self._l_ptr, self._l_idx, self._l_val, self._u_ptr,
                         self._u_idx, self._u_val, self._diag, np.asarray(b, dtype=float))

    def solve_transpose(self, b):
        return _solve_lu_transpose(self._l_ptr, self._l_idx, self._l_val, self._u_ptr,
                                   self._u_idx, self._u_val, self._diag, np.asarray(b, dtype=float))

    __call__ = solve

    def factors(self):
        """Return ``(L, U)`` as CSR matrices (``L`` with its unit diagonal)."""
        n = self.shape[0]
        L = sp.csr_matrix((self._l_val, self._l_idx, self._l_ptr), shape=(n, n)) + sp.identity(n, format="csr")
        U = sp.csr_matrix((self._u_val, self._u_idx, self._u_ptr), shape=(n, n)) + sp.diags(self._diag, format="csr")
        return L.tocsr(), U.tocsr()


def ilut_factor(A, params: IlutParams = IlutParams()) -> IlutPreconditioner:
    return IlutPreconditioner(A, params)
