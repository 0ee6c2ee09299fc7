import numpy as np
import pytest
import scipy.sparse as sp

from lnksopt.problem import BumpConfig, ShapeProblem


def random_sparse(n, density=0.1, seed=0, dominance=2.0):
    """Random nonsymmetric, diagonally dominant sparse matrix."""
    rng = np.random.default_rng(seed)
    A = sp.random(n, n, density=density, random_state=rng, format="csr")
    A = A - sp.diags(A.diagonal())
    rowsum = np.asarray(abs(A).sum(axis=1)).ravel()
    return (A + sp.diags(dominance * rowsum + 1.0)).tocsr()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run, even without ``-s``."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_problem():
    """Coarse bump problem (16 x 4 cells, p = 1, six design variables)."""
    return ShapeProblem(BumpConfig(nx=16, ny=4, n_design=6))


@pytest.fixture(scope="session")
def small_state(small_problem):
    prob = small_problem
    z = 1e-3 * np.random.default_rng(3).standard_normal(prob.n)
    x = prob.mesh(z)
    return z, x, prob.solve_flow(x)
