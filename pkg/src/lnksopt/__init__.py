"""Full-space LNKS and reduced-space shape optimization on a 2D DG Euler solver.

Main entry points:

- :class:`~lnksopt.problem.ShapeProblem`: bump geometry, flow model, FFD design and target
- :class:`~lnksopt.reduced.ReducedSpaceOptimizer`: reduced-space Newton-Krylov or BFGS
- :class:`~lnksopt.fullspace.FullSpaceOptimizer`: full-space Newton with P4/P2 preconditioners
- :mod:`~lnksopt.cost_model`: flop and work model with a per-run ledger
- :mod:`~lnksopt.cli`: the ``lnks-bench`` command
"""

__version__ = "0.1.0"
