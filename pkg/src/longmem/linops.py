"""Matrix-free linear operators and spectral-norm estimation.

Operators expose forward and transpose products only, so norms of n x n
objects cost O(iterations * apply) instead of O(n^3). materialize() turns a
small operator into a dense array for direct inspection.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, ParameterError, SizeCapError

MATERIALIZE_CAP = 2000


class LinearOperator:
    """Base class: subclasses set .shape and implement apply / t_apply."""

    shape: tuple[int, int]

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def t_apply(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_in(self, x, ncols):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or len(x) != ncols:
            raise ParameterError(
                f"operand has length {x.shape}, operator expects {ncols}")
        return x


class DenseOp(LinearOperator):
    """Operator wrapping an explicit 2-d array."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise ParameterError("DenseOp needs a 2-d array")
        self.shape = self.matrix.shape

    def apply(self, x):
        return self.matrix @ self._check_in(x, self.shape[1])

    def t_apply(self, y):
        return self.matrix.T @ self._check_in(y, self.shape[0])

    def dense(self):
        return self.matrix.copy()


class FuncOp(LinearOperator):
    """Operator defined by forward/transpose closures."""

    def __init__(self, shape, apply_fn, t_apply_fn=None):
        n, m = shape
        if n < 1 or m < 1:
            raise ParameterError("operator dimensions must be positive")
        self.shape = (int(n), int(m))
        self._apply = apply_fn
        self._t_apply = t_apply_fn

    def apply(self, x):
        return np.asarray(self._apply(self._check_in(x, self.shape[1])),
                          dtype=float)

    def t_apply(self, y):
        if self._t_apply is None:
            raise ParameterError("operator has no transpose product")
        return np.asarray(self._t_apply(self._check_in(y, self.shape[0])),
                          dtype=float)


class SymmetricToeplitzOp(LinearOperator):
    """n x n symmetric Toeplitz operator with first column gamma_0..gamma_{n-1}.

    apply() accumulates shifted copies of the operand, one per lag, so the
    cost is O(n^2) flops without ever forming the matrix.
    """

    def __init__(self, gamma, n=None):
        g = np.asarray(gamma, dtype=float)
        if g.ndim != 1 or len(g) == 0:
            raise ParameterError("gamma must be a nonempty 1-d array")
        if n is None:
            n = len(g)
        if n < 1 or n > len(g):
            raise ParameterError(f"n={n} needs gamma of length >= n")
        self.gamma = g[:n].copy()
        self.shape = (n, n)

    def apply(self, x):
        x = self._check_in(x, self.shape[0])
        g = self.gamma
        y = g[0] * x
        for k in range(1, len(g)):
            gk = g[k]
            if gk == 0.0:
                continue
            y[k:] += gk * x[:-k]
            y[:-k] += gk * x[k:]
        return y

    t_apply = apply


def toeplitz_apply(gamma, x) -> np.ndarray:
    """Product of the symmetric Toeplitz matrix built from gamma with x."""
    x = np.asarray(x, dtype=float)
    return SymmetricToeplitzOp(gamma, n=len(x)).apply(x)


def op_difference(A: LinearOperator, B: LinearOperator) -> LinearOperator:
    """Operator computing A x - B x (and the transpose analogue)."""
    if A.shape != B.shape:
        raise ParameterError(f"shape mismatch: {A.shape} vs {B.shape}")
    return FuncOp(A.shape,
                  lambda x: A.apply(x) - B.apply(x),
                  lambda y: A.t_apply(y) - B.t_apply(y))


def materialize(A: LinearOperator, cap: int = MATERIALIZE_CAP) -> np.ndarray:
    """Dense matrix of A, refusing dimensions above cap.

    Operators that carry a cheaper dense() method are taken at their word.
    """
    n, m = A.shape
    if max(n, m) > cap:
        raise SizeCapError(f"operator is {n} x {m}, cap is {cap}")
    fast = getattr(A, "dense", None)
    if callable(fast):
        out = np.asarray(fast(), dtype=float)
        if out.shape != (n, m):
            raise ParameterError("dense() returned a wrong-shaped array")
        return out
    cols = np.empty((n, m))
    e = np.zeros(m)
    for j in range(m):
        e[j] = 1.0
        cols[:, j] = A.apply(e)
        e[j] = 0.0
    return cols


def spectral_norm(A: LinearOperator, rel_tol: float = 1e-8,
                  max_iter: int = 5000, seed: int = 0,
                  restarts: int = 2) -> float:
    """Largest singular value of A by power iteration on A' A.

    The Rayleigh estimate ||A x_k|| is nondecreasing along the iteration, so
    runs converge from below; the maximum over independently seeded restarts
    is returned. A run that fails the rel_tol stopping rule within max_iter
    raises ConvergenceError carrying the best estimate seen.
    """
    if rel_tol <= 0 or max_iter < 1 or restarts < 1:
        raise ParameterError("rel_tol, max_iter, restarts must be positive")
    n, m = A.shape
    best = 0.0
    stalled = 0
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        x = rng.standard_normal(m)
        nx = np.linalg.norm(x)
        x = x / nx if nx > 0 else np.full(m, m ** -0.5)
        sigma_prev = -np.inf
        converged = False
        for _ in range(max_iter):
            y = A.apply(x)
            sigma = float(np.linalg.norm(y))
            if sigma == 0.0:
                converged = True
                break
            if abs(sigma - sigma_prev) <= rel_tol * sigma:
                converged = True
                break
            sigma_prev = sigma
            z = A.t_apply(y)
            nz = float(np.linalg.norm(z))
            if nz == 0.0:
                converged = True
                break
            x = z / nz
        best = max(best, sigma)
        if not converged:
            stalled += 1
    if stalled:
        raise ConvergenceError(
            f"{stalled} of {restarts} power-iteration runs missed "
            f"rel_tol={rel_tol:g} within {max_iter} iterations",
            estimate=best)
    return best
