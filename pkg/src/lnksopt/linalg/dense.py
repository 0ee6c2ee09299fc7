"""Dense eigenvalue and solve helpers for small verification problems."""

import numpy as np


class EigenSolverError(RuntimeError):
    pass


def sort_spectrum(values):
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, values.real))
    return values[order]


def dense_eig(A, max_size=400):
    """Eigenvalues of a dense square matrix, sorted by (real, imag)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("dense_eig needs a square matrix")
    if A.shape[0] > max_size:
        raise ValueError(f"matrix of size {A.shape[0]} exceeds the dense limit {max_size}")
    try:
        values = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from None
    return sort_spectrum(values)


def match_spectra(a, b):
    """Largest distance between two eigenvalue multisets under optimal pairing."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("spectra differ in size")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max()) if len(a) else 0.0
