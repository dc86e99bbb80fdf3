"""Scikit-learn style facade over the matrix-nearness solvers.

The constraint system is the estimator's configuration; symmetric target
matrices are the data. ``fit`` projects one matrix and stores the full
solver outcome, ``transform`` maps one or more matrices through the same
constrained projection.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .baselines import SOLVERS
from .engine import SolveOptions
from .model import make_custom_instance
from .validation import ensure_symmetric


class ConstrainedNearnessProjector(BaseEstimator, TransformerMixin):
    """Projects symmetric matrices onto an intersection of linear
    constraints with the psd and nonnegative cones.

    Parameters
    ----------
    equality_rows : sequence of symmetric matrices
        Coefficient matrices of the equality system.
    b : array-like
        Equality right-hand side, one entry per row.
    inequality_rows : sequence of symmetric matrices, optional
        Coefficient matrices of the inequality system.
    d : array-like, optional
        Inequality right-hand side.
    solver : str
        One of the registered solver names (default the accelerated
        two-block method).
    tol, max_iter, time_limit_s, prox_c, eps0, eps_power, check_every,
    seed, partition_q
        Passed through to the solver configuration.

    Attributes
    ----------
    X_ : ndarray
        Projection of the fitted matrix.
    dual_ : DualPoint
        Multipliers at termination.
    kkt_ : KktResidual
        Final residuals.
    n_iter_ : int
        Outer iterations used.
    reason_ : str
        Termination reason.
    """

    def __init__(
        self,
        equality_rows=None,
        b=None,
        inequality_rows=None,
        d=None,
        solver: str = "imabcd",
        tol: float = 1e-6,
        max_iter: int = 50_000,
        time_limit_s: float | None = None,
        prox_c: float = 1e-4,
        eps0: float | None = None,
        eps_power: float = 2.5,
        check_every: int = 1,
        seed: int = 0,
        partition_q: int = 0,
    ):
        self.equality_rows = equality_rows
        self.b = b
        self.inequality_rows = inequality_rows
        self.d = d
        self.solver = solver
        self.tol = tol
        self.max_iter = max_iter
        self.time_limit_s = time_limit_s
        self.prox_c = prox_c
        self.eps0 = eps0
        self.eps_power = eps_power
        self.check_every = check_every
        self.seed = seed
        self.partition_q = partition_q

    def _options(self) -> SolveOptions:
        return SolveOptions(
            tol=self.tol,
            max_iter=self.max_iter,
            time_limit_s=self.time_limit_s,
            prox_c=self.prox_c,
            eps0=self.eps0,
            eps_power=self.eps_power,
            check_every=self.check_every,
            seed=self.seed,
            partition_q=self.partition_q,
        )

    def _solve_one(self, g: np.ndarray):
        if self.solver not in SOLVERS:
            raise ValueError(
                f"unknown solver {self.solver!r}; choose from {sorted(SOLVERS)}"
            )
        if self.equality_rows is None or self.b is None:
            raise ValueError("equality_rows and b must be provided")
        inst = make_custom_instance(
            g,
            self.equality_rows,
            self.b,
            self.inequality_rows if self.inequality_rows is not None else (),
            self.d if self.d is not None else (),
        )
        return SOLVERS[self.solver](inst, self._options())

    def fit(self, X, y=None):
        """Project one symmetric matrix and keep the full solver outcome."""
        g = np.asarray(X, dtype=float)
        if g.ndim == 3 and g.shape[0] == 1:
            g = g[0]
        g = ensure_symmetric(g, "X")
        result = self._solve_one(g)
        self.result_ = result
        self.X_ = result.x
        self.dual_ = result.dual
        self.kkt_ = result.kkt
        self.n_iter_ = result.iterations
        self.reason_ = result.reason
        self.n_features_in_ = g.shape[0]
        return self

    def transform(self, X):
        """Project each symmetric matrix; accepts (n, n) or (k, n, n)."""
        arr = np.asarray(X, dtype=float)
        if arr.ndim == 2:
            return self._solve_one(ensure_symmetric(arr, "X")).x
        if arr.ndim != 3:
            raise ValueError("expected one matrix or a stack of matrices")
        return np.stack(
            [self._solve_one(ensure_symmetric(a, "X")).x for a in arr]
        )

    def fit_transform(self, X, y=None, **fit_params):
        arr = np.asarray(X, dtype=float)
        if arr.ndim == 3 and arr.shape[0] != 1:
            # Fitted state reflects the first matrix; the stack is mapped
            # through the same constraint system.
            self.fit(arr[:1])
            return self.transform(arr)
        self.fit(arr)
        return self.X_ if arr.ndim == 2 else self.X_[None, ...]
