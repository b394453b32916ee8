"""Banded modified-Cholesky representation of inverse autocovariance matrices.

The inverse of an n x n autocovariance matrix factors exactly as
T' D^{-1} T with T unit lower triangular built from finite-predictor
coefficients and D the prediction-error variances. Truncating every row of T
at bandwidth K gives the banded approximation studied here; rows past order K
reuse the order-K predictor. Plugging in least-squares fits of the predictors
yields the data-driven estimator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NotPositiveDefiniteError,
    ParameterError,
    SingularGramError,
    SizeCapError,
)
from .farima import PredictorTable, durbin_levinson
from .linops import DenseOp, LinearOperator, op_difference, spectral_norm

_PIVOT_RTOL = 1e-12
_VAR_RTOL = 1e-12


def _chol_solve_spd(G: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    """Solve G c = b for symmetric positive definite G.

    Hand-rolled so near-singularity is caught by a relative pivot test
    instead of surfacing as noise amplification downstream.
    """
    k = G.shape[0]
    L = np.zeros_like(G)
    floor = _PIVOT_RTOL * float(np.max(np.diagonal(G)))
    for j in range(k):
        pivot = G[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= floor:
            raise SingularGramError(
                f"Gram matrix numerically singular at order {order} "
                f"(pivot {j + 1} of {k})", order=order)
        L[j, j] = np.sqrt(pivot)
        if j + 1 < k:
            L[j + 1:, j] = (G[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    y = np.empty(k)
    for j in range(k):
        y[j] = (b[j] - L[j, :j] @ y[:j]) / L[j, j]
    c = np.empty(k)
    for j in range(k - 1, -1, -1):
        c[j] = (y[j] - L[j + 1:, j] @ c[j + 1:]) / L[j, j]
    return c


class SampleGram:
    """Lagged Gram matrices of one series via shared prefix sums.

    For order k the least-squares normal equations use
    G_ab = sum_{t=k}^{n-1} x_{t-a} x_{t-b}, 0 <= a, b <= k. All of them,
    for every k up to max_order, come from prefix sums of the lag products
    x_i x_{i+l}, costing O(n * max_order) once.
    """

    def __init__(self, x, max_order: int):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ParameterError("series must be 1-d")
        n = len(x)
        if max_order < 0:
            raise ParameterError("max_order must be >= 0")
        if n < 2 * max_order + 2:
            raise ParameterError(
                f"series of length {n} supports orders up to "
                f"{(n - 2) // 2}, got {max_order}")
        self.x = x
        self.n = n
        self.max_order = max_order
        # Z[l][j] = sum_{i<j} x_i x_{i+l}
        self._Z = []
        for l in range(max_order + 1):
            prod = x[: n - l] * x[l:]
            self._Z.append(np.concatenate(([0.0], np.cumsum(prod))))

    def entry(self, a: int, b: int, k: int) -> float:
        """G_ab for the order-k window t = k..n-1 (a >= b)."""
        if b > a:
            a, b = b, a
        return float(self._Z[a - b][self.n - a] - self._Z[a - b][k - a])

    def system(self, k: int):
        """(G, rhs, tss) of the order-k normal equations.

        G is k x k over a, b = 1..k, rhs_a = sum x_t x_{t-a}, and tss is
        sum_{t=k}^{n-1} x_t^2.
        """
        if not (1 <= k <= self.max_order):
            raise ParameterError(f"order {k} outside 1..{self.max_order}")
        G = np.empty((k, k))
        r = np.empty(k)
        for a in range(1, k + 1):
            r[a - 1] = self.entry(a, 0, k)
            for b in range(1, a + 1):
                v = self.entry(a, b, k)
                G[a - 1, b - 1] = v
                G[b - 1, a - 1] = v
        return G, r, self.entry(0, 0, k)


def _variance_order0(x: np.ndarray) -> float:
    n = len(x)
    if n < 2:
        raise ParameterError("need at least two observations")
    dev = x - x.mean()
    s2 = float(dev @ dev) / (n - 1)
    if s2 <= _VAR_RTOL * float(x @ x) / n:
        raise NotPositiveDefiniteError("series is numerically constant")
    return s2


def fit_ar_ls(u, k: int):
    """Least-squares AR(k) fit over the window t = k..n-1.

    Returns (coeffs, sigma2) with sigma2 = RSS / (n - k). Order 0 returns an
    empty coefficient vector and the mean-adjusted sample variance. The
    series is not mean-centered for k >= 1.
    """
    u = np.asarray(u, dtype=float)
    if k == 0:
        return np.empty(0), _variance_order0(u)
    gram = SampleGram(u, k)
    return _fit_from_gram(gram, k)


def _fit_from_gram(gram: SampleGram, k: int):
    G, r, tss = gram.system(k)
    c = _chol_solve_spd(G, r, order=k)
    rss = tss - float(c @ r)
    denom = gram.n - k
    sigma2 = rss / denom
    if sigma2 <= _VAR_RTOL * tss / denom:
        raise NotPositiveDefiniteError(
            f"residual variance vanished at order {k} (exact linear recursion)")
    return c, sigma2


def fit_all_orders(u, K: int) -> PredictorTable:
    """Least-squares predictor table for orders 0..K sharing one prefix-sum pass."""
    u = np.asarray(u, dtype=float)
    if K < 0:
        raise ParameterError("K must be >= 0")
    sig = np.empty(K + 1)
    sig[0] = _variance_order0(u)
    if K == 0:
        return PredictorTable(coeffs=[], sigma2_by_order=sig,
                              source="least_squares")
    gram = SampleGram(u, K)
    rows = []
    for k in range(1, K + 1):
        c, s2 = _fit_from_gram(gram, k)
        rows.append(c)
        sig[k] = s2
    return PredictorTable(coeffs=rows, sigma2_by_order=sig,
                          source="least_squares")


@dataclass(eq=False)
class BandedCholInverse(LinearOperator):
    """Banded Cholesky-form inverse T' D^{-1} T at bandwidth K.

    Row r of T (0-based) carries the negated order-min(r, K) predictor
    coefficients on the K sub-diagonals; D holds the prediction-error
    variances, frozen at order K beyond row K.
    """

    n: int
    K: int
    coeffs: list
    sigma2_by_order: np.ndarray
    source: str = "population"
    _C: np.ndarray = field(init=False, repr=False)
    _dvec: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("n must be >= 1")
        if not (0 <= self.K <= self.n - 1):
            raise ParameterError(f"bandwidth {self.K} not in 0..{self.n - 1}")
        self.sigma2_by_order = np.asarray(self.sigma2_by_order, dtype=float)
        if len(self.coeffs) != self.K or len(self.sigma2_by_order) != self.K + 1:
            raise ParameterError("need predictor rows 1..K and variances 0..K")
        if np.any(self.sigma2_by_order <= 0.0):
            raise NotPositiveDefiniteError("variances must be positive")
        self.coeffs = [np.asarray(c, dtype=float) for c in self.coeffs]
        for k, c in enumerate(self.coeffs, start=1):
            if len(c) != k:
                raise ParameterError(f"predictor row {k} has length {len(c)}")
        self.shape = (self.n, self.n)
        n, K = self.n, self.K
        C = np.zeros((K, n))
        for r in range(1, min(K, n - 1) + 1):
            C[:r, r] = self.coeffs[r - 1]
        if K >= 1 and n > K + 1:
            C[:, K + 1:] = self.coeffs[K - 1][:, None]
        d = np.empty(n)
        m = min(K, n - 1)
        d[: m + 1] = self.sigma2_by_order[: m + 1]
        d[m + 1:] = self.sigma2_by_order[K]
        self._C = C
        self._dvec = d

    def apply(self, x):
        x = self._check_in(x, self.n)
        n, K, C = self.n, self.K, self._C
        y = x.copy()
        for l in range(1, K + 1):
            y[l:] -= C[l - 1, l:] * x[: n - l]
        y /= self._dvec
        z = y.copy()
        for l in range(1, K + 1):
            z[: n - l] -= C[l - 1, l:] * y[l:]
        return z

    t_apply = apply

    def dense(self) -> np.ndarray:
        """Explicit n x n matrix, assembled as A' A with A = D^{-1/2} T."""
        n, K = self.n, self.K
        T = np.eye(n)
        for l in range(1, K + 1):
            r = np.arange(l, n)
            T[r, r - l] = -self._C[l - 1, l:]
        A = T / np.sqrt(self._dvec)[:, None]
        return A.T @ A

    def to_dict(self) -> dict:
        return {"n": self.n, "K": self.K, "source": self.source,
                "sigma2": self.sigma2_by_order.tolist(),
                "coeffs": [c.tolist() for c in self.coeffs]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "BandedCholInverse":
        return cls(n=int(obj["n"]), K=int(obj["K"]),
                   coeffs=[np.asarray(c, dtype=float) for c in obj["coeffs"]],
                   sigma2_by_order=np.asarray(obj["sigma2"], dtype=float),
                   source=str(obj.get("source", "population")))

    @classmethod
    def from_json(cls, text: str) -> "BandedCholInverse":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_table(cls, table: PredictorTable, n: int, K: int) -> "BandedCholInverse":
        if K > table.max_order:
            raise ParameterError(f"table holds orders up to {table.max_order}")
        return cls(n=n, K=K, coeffs=[table.coeffs[k] for k in range(K)],
                   sigma2_by_order=np.asarray(table.sigma2_by_order[: K + 1]),
                   source=table.source)


def build_population_inverse(gamma, n: int, K: int) -> BandedCholInverse:
    """Banded inverse from exact autocovariances gamma_0..gamma_{>=K}."""
    table = durbin_levinson(gamma, K)
    return BandedCholInverse.from_table(table, n, K)


def build_estimated_inverse(u, K: int) -> BandedCholInverse:
    """Plug-in banded inverse from one observed series."""
    u = np.asarray(u, dtype=float)
    table = fit_all_orders(u, K)
    return BandedCholInverse.from_table(table, len(u), K)


def inverse_apply(inv: BandedCholInverse, x) -> np.ndarray:
    """Product of the represented inverse with a vector."""
    return inv.apply(x)


def approximation_error_curve(gamma, n: int, Ks, rel_tol: float = 1e-8) -> np.ndarray:
    """Spectral-norm gap between each banded inverse and the exact inverse.

    The exact inverse is the full-band K = n-1 object; entries of the curve
    are || inv_banded(K) - inv_exact || for each requested K.
    """
    if n > 2000:
        raise SizeCapError("error curve materializes the exact inverse; n > 2000")
    Ks = [int(k) for k in Ks]
    if any(k < 0 or k > n - 1 for k in Ks):
        raise ParameterError("every K must lie in 0..n-1")
    table = durbin_levinson(gamma, n - 1)
    exact = BandedCholInverse.from_table(table, n, n - 1).dense()
    out = np.empty(len(Ks))
    for i, k in enumerate(Ks):
        banded = BandedCholInverse.from_table(table, n, k)
        out[i] = spectral_norm(op_difference(DenseOp(banded.dense()),
                                             DenseOp(exact)), rel_tol=rel_tol)
    return out
