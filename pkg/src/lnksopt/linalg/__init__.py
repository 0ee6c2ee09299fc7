from .csr import PatternAssembler, SparseMatrixCsr, read_matrix_market, validate_csr, write_matrix_market
from .dense import EigenSolverError, dense_eig, match_spectra, sort_spectrum
from .ilut import IlutParams, IlutPreconditioner, ilut_factor
from .krylov import KrylovConfig, KrylovResult, fgmres

__all__ = [
    "EigenSolverError", "IlutParams", "IlutPreconditioner", "KrylovConfig", "KrylovResult",
    "PatternAssembler", "SparseMatrixCsr", "dense_eig", "fgmres", "ilut_factor", "match_spectra",
    "read_matrix_market", "sort_spectrum", "validate_csr", "write_matrix_market",
]
