"""Second-order structure of FARIMA(p, d, q) processes.

Exact MA/AR expansion weights, autocovariances, population finite-predictor
coefficients via the Durbin-Levinson recursion, and exact Gaussian simulation
through the innovations form of that recursion. Everything here is
deterministic given its inputs; simulation is deterministic given a seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ModelError,
    NotApplicableError,
    NotPositiveDefiniteError,
    ParameterError,
    PrecisionError,
)

_ROOT_MARGIN = 1e-8
_IMPULSE_CAP = 200_000

# AR/MA coefficients for the four named data-generating presets. Sign
# conventions: phi(B) = 1 - phi_1 B - ..., theta(B) = 1 + theta_1 B + ...,
# so e.g. an MA factor (1 - 0.4B) applied to the innovations is theta_1 = -0.4
# and an AR factor (1 + 0.4B) on the series is phi_1 = -0.4.
_PRESETS: dict[str, tuple[tuple[float, ...], tuple[float, ...]]] = {
    "dgp1": ((), ()),
    "dgp2": ((0.7,), ()),
    "dgp3": ((), (-0.4,)),
    "dgp4": ((-0.4,), (-0.3,)),
}


def _check_roots_outside(coeffs: tuple[float, ...], kind: str) -> None:
    # polynomial is 1 - c_1 z - ... for AR, 1 + c_1 z + ... for MA
    if not coeffs:
        return
    sign = -1.0 if kind == "ar" else 1.0
    poly = np.concatenate(([1.0], sign * np.asarray(coeffs, dtype=float)))
    # np.roots wants highest degree first
    roots = np.roots(poly[::-1])
    if roots.size and np.min(np.abs(roots)) <= 1.0 + _ROOT_MARGIN:
        raise ModelError(
            f"{kind} polynomial has a root with modulus <= 1 + {_ROOT_MARGIN:g}"
        )


@dataclass(frozen=True)
class FarimaModel:
    """FARIMA(p, d, q) specification: phi(B)(1-B)^d u_t = theta(B) w_t.

    Parameters
    ----------
    ar : tuple of float
        phi_1..phi_p with phi(B) = 1 - phi_1 B - ... - phi_p B^p.
    ma : tuple of float
        theta_1..theta_q with theta(B) = 1 + theta_1 B + ... + theta_q B^q.
    d : float
        Memory exponent, 0 <= d < 1/2 (d = 0 is the short-memory case).
    sigma2 : float
        Innovation variance, strictly positive.
    """

    ar: tuple[float, ...] = ()
    ma: tuple[float, ...] = ()
    d: float = 0.0
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "ar", tuple(float(c) for c in self.ar))
        object.__setattr__(self, "ma", tuple(float(c) for c in self.ma))
        if not (0.0 <= self.d < 0.5):
            raise ParameterError(f"d must lie in [0, 0.5), got {self.d}")
        if not self.sigma2 > 0.0:
            raise ParameterError(f"sigma2 must be positive, got {self.sigma2}")
        _check_roots_outside(self.ar, "ar")
        _check_roots_outside(self.ma, "ma")

    @classmethod
    def preset(cls, name: str, d: float, sigma2: float = 1.0) -> "FarimaModel":
        """Named process preset ('dgp1'..'dgp4') at memory exponent d."""
        try:
            ar, ma = _PRESETS[name]
        except KeyError:
            raise ParameterError(f"unknown preset {name!r}") from None
        return cls(ar=ar, ma=ma, d=d, sigma2=sigma2)

    def to_dict(self) -> dict:
        return {"ar": list(self.ar), "ma": list(self.ma), "d": self.d,
                "sigma2": self.sigma2}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "FarimaModel":
        return cls(ar=tuple(obj.get("ar", ())), ma=tuple(obj.get("ma", ())),
                   d=float(obj.get("d", 0.0)),
                   sigma2=float(obj.get("sigma2", 1.0)))

    @classmethod
    def from_json(cls, text: str) -> "FarimaModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class WeightSequence:
    """Truncated expansion weights of a linear filter.

    kind 'ma_psi' stores (psi_0, ..., psi_M) of the MA(inf) representation
    u_t = sum_j psi_j w_{t-j}; kind 'ar_a' stores (a_1, ..., a_M) of the
    AR(inf) representation u_t = sum_i a_i u_{t-i} + w_t.
    """

    kind: str
    values: np.ndarray
    truncation_len: int

    def __post_init__(self):
        if self.kind not in ("ma_psi", "ar_a"):
            raise ParameterError(f"unknown weight kind {self.kind!r}")
        expected = self.truncation_len + 1 if self.kind == "ma_psi" else self.truncation_len
        if len(self.values) != expected:
            raise ParameterError("weight vector length does not match truncation_len")


@dataclass(frozen=True)
class AutocovSequence:
    """Autocovariances gamma_0..gamma_{n-1} with a certified error bound.

    tail_bound is an absolute per-entry bound covering both truncation of the
    short-memory filter and floating-point accumulation.
    """

    values: np.ndarray
    tail_bound: float

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class PredictorTable:
    """Finite-predictor coefficients a(k) and prediction-error variances.

    coeffs[k-1] holds (a_{k,1}, ..., a_{k,k}) for k = 1..K;
    sigma2_by_order holds (sigma_0^2, ..., sigma_K^2) with sigma_0^2 = gamma_0.
    source is one of 'population', 'least_squares', 'detrended'.
    """

    coeffs: list
    sigma2_by_order: np.ndarray
    source: str = "population"

    def __post_init__(self):
        if self.source not in ("population", "least_squares", "detrended"):
            raise ParameterError(f"unknown table source {self.source!r}")
        if len(self.sigma2_by_order) != len(self.coeffs) + 1:
            raise ParameterError("sigma2_by_order must have one entry per order 0..K")
        for k, row in enumerate(self.coeffs, start=1):
            if len(row) != k:
                raise ParameterError(f"row {k} of predictor table has wrong length")
        if np.any(np.asarray(self.sigma2_by_order) <= 0.0):
            raise NotPositiveDefiniteError("prediction-error variances must be positive")

    @property
    def max_order(self) -> int:
        return len(self.coeffs)


def frac_weights(d: float, M: int, kind: str = "ma_psi") -> WeightSequence:
    """Expansion weights of the pure fractional filter.

    kind 'ma_psi': psi_j of (1-B)^{-d}, psi_0 = 1, psi_j = psi_{j-1}(j-1+d)/j.
    kind 'ar_a': a_j of (1-B)^{d} written as u_t = sum a_j u_{t-j} + w_t,
    i.e. a_j = -pi_j with pi_0 = 1, pi_j = pi_{j-1}(j-1-d)/j.
    """
    if not (0.0 <= d < 0.5):
        raise ParameterError(f"d must lie in [0, 0.5), got {d}")
    if M < 1:
        raise ParameterError("M must be >= 1")
    j = np.arange(1, M + 1, dtype=float)
    if kind == "ma_psi":
        psi = np.concatenate(([1.0], np.cumprod((j - 1.0 + d) / j)))
        return WeightSequence(kind="ma_psi", values=psi, truncation_len=M)
    if kind == "ar_a":
        pi = np.cumprod((j - 1.0 - d) / j)
        return WeightSequence(kind="ar_a", values=-pi, truncation_len=M)
    raise ParameterError(f"unknown weight kind {kind!r}")


def _arma_impulse(ar: tuple, ma: tuple, M: int) -> np.ndarray:
    """Impulse response c_0..c_M of theta(B)/phi(B)."""
    p, q = len(ar), len(ma)
    c = np.zeros(M + 1)
    c[0] = 1.0
    for jj in range(1, M + 1):
        acc = ma[jj - 1] if jj <= q else 0.0
        for i in range(1, min(jj, p) + 1):
            acc += ar[i - 1] * c[jj - i]
        c[jj] = acc
    return c


def _arma_impulse_certified(ar: tuple, ma: tuple) -> tuple[np.ndarray, float]:
    """Impulse response of theta/phi truncated so the absolute tail is certified.

    Returns (c_0..c_M, tail) with sum_{j>M} |c_j| <= tail. For pure MA the
    response is finite and tail is exactly 0.
    """
    p, q = len(ar), len(ma)
    if p == 0:
        return np.concatenate(([1.0], np.asarray(ma, dtype=float))), 0.0
    poly = np.concatenate(([1.0], -np.asarray(ar, dtype=float)))
    roots = np.roots(poly[::-1])
    lam = float(np.max(1.0 / np.abs(roots)))
    # geometric decay rate with a safety margin toward 1
    lam_eff = 0.5 * (1.0 + lam)
    geo = lam_eff / (1.0 - lam_eff)
    chunk = max(2 * (p + q) + 20, 32)
    c = list(_arma_impulse(ar, ma, chunk))
    total = float(np.sum(np.abs(c)))
    while True:
        recent = sum(abs(v) for v in c[-p:])
        tail = 8.0 * recent * geo
        if tail <= 1e-13 * max(1.0, total) and len(c) > q + p + 10:
            return np.asarray(c), tail
        if len(c) >= _IMPULSE_CAP:
            raise PrecisionError(
                "short-memory impulse response tail could not be certified "
                f"within {_IMPULSE_CAP} terms (root too close to the unit circle)"
            )
        start = len(c)
        grow = min(max(len(c), 64), _IMPULSE_CAP - len(c))
        # extend the recursion c_j = theta_j + sum_i phi_i c_{j-i}
        buf = np.zeros(start + grow)
        buf[:start] = c
        for jj in range(start, start + grow):
            acc = ma[jj - 1] if jj <= q else 0.0
            for i in range(1, p + 1):
                acc += ar[i - 1] * buf[jj - i]
            buf[jj] = acc
        c = list(buf)
        total = float(np.sum(np.abs(buf)))


def arma_weights(model: FarimaModel, M: int) -> WeightSequence:
    """MA(inf) weights psi_0..psi_M of the full FARIMA filter.

    psi(z) = theta(z) (1-z)^{-d} / phi(z), evaluated by running the fractional
    weights through the rational filter theta/phi (linear time in M).
    """
    if M < 0:
        raise ParameterError("M must be >= 0")
    from scipy.signal import lfilter

    psi_frac = frac_weights(model.d, max(M, 1), "ma_psi").values[: M + 1]
    b = np.concatenate(([1.0], np.asarray(model.ma, dtype=float)))
    a = np.concatenate(([1.0], -np.asarray(model.ar, dtype=float)))
    psi = lfilter(b, a, psi_frac)
    return WeightSequence(kind="ma_psi", values=psi, truncation_len=M)


def _ar_inf_weights(model: FarimaModel, M: int) -> np.ndarray:
    """AR(inf) weights a_1..a_M of the full filter phi(B)(1-B)^d / theta(B)."""
    d, ar, ma = model.d, model.ar, model.ma
    j = np.arange(1, M + 1, dtype=float)
    pi = np.concatenate(([1.0], np.cumprod((j - 1.0 - d) / j)))
    phipoly = np.concatenate(([1.0], -np.asarray(ar, dtype=float)))
    g = np.convolve(phipoly, pi)[: M + 1]
    q = len(ma)
    if q:
        h = np.empty(M + 1)
        for jj in range(M + 1):
            acc = g[jj]
            for i in range(1, min(jj, q) + 1):
                acc -= ma[i - 1] * h[jj - i]
            h[jj] = acc
    else:
        h = g
    return -h[1:]


def _frac_autocov_unit(d: float, n: int) -> np.ndarray:
    """gamma_0..gamma_{n-1} of (1-B)^{-d} w_t with unit innovation variance.

    Hosking's recursion: gamma_0 = Gamma(1-2d)/Gamma(1-d)^2,
    gamma_k = gamma_{k-1} (k-1+d)/(k-d).
    """
    g0 = math.gamma(1.0 - 2.0 * d) / math.gamma(1.0 - d) ** 2
    if n == 1:
        return np.array([g0])
    k = np.arange(1, n, dtype=float)
    return g0 * np.concatenate(([1.0], np.cumprod((k - 1.0 + d) / (k - d))))


def autocov(model: FarimaModel, n: int) -> AutocovSequence:
    """Autocovariances gamma_0..gamma_{n-1} of the process.

    The fractional core uses the exact Hosking recursion. A nontrivial ARMA
    part enters through gamma(k) = sigma^2 sum_{i,j} c_i c_j gamma_frac(k+i-j)
    with (c_i) the certified-truncation impulse response of theta/phi.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    d, s2 = model.d, model.sigma2
    if not model.ar and not model.ma:
        vals = s2 * _frac_autocov_unit(d, n)
        # recursion is exact; bound float accumulation in the cumprod chain
        bound = 16.0 * np.finfo(float).eps * (n + 4) * vals[0]
        return AutocovSequence(values=vals, tail_bound=float(bound))
    c, ctail = _arma_impulse_certified(model.ar, model.ma)
    M = len(c) - 1
    gx = _frac_autocov_unit(d, n + M)
    r = np.correlate(c, c, mode="full")[M:]  # r[m] = sum_i c_i c_{i+m}
    vals = r[0] * gx[:n].copy()
    idx = np.arange(n)
    for m in range(1, M + 1):
        if r[m] == 0.0:
            continue
        vals += r[m] * (gx[idx + m] + gx[np.abs(idx - m)])
    vals *= s2
    s1 = float(np.sum(np.abs(c)))
    trunc = s2 * gx[0] * (2.0 * ctail * (s1 + ctail))
    # Worst-case rounding, entrywise. The Hosking cumprod chain leaves a
    # relative error of at most ~2.1 j eps on gx[j] (4 roundings per factor,
    # slack for g0 included); each gx value enters vals with total weight
    # r_tot. The correlate dots carry (M+1) eps relative against the
    # absolute-value dot a_tot, and the m-loop adds M+6 roundings on
    # partial sums bounded by r_tot gx[0].
    eps = np.finfo(float).eps
    j_arr = np.arange(len(gx), dtype=float)
    e_chain = eps * float(np.max((2.1 * j_arr + 8.0) * gx))
    r_tot = float(np.abs(r[0]) + 2.0 * np.sum(np.abs(r[1:])))
    a_tot = float(np.sum(np.correlate(np.abs(c), np.abs(c), mode="full")[M:]))
    rounding = s2 * (r_tot * e_chain
                     + eps * gx[0] * (2.2 * (M + 1) * a_tot
                                      + (M + 6) * r_tot))
    bound = trunc + 1.5 * rounding
    if bound > 1e-10 * vals[0]:
        raise PrecisionError(
            f"could not certify autocovariance tail bound: {bound:.3e} "
            f"exceeds 1e-10 * gamma_0 = {1e-10 * vals[0]:.3e}"
        )
    return AutocovSequence(values=vals, tail_bound=float(bound))


def _gamma_vector(gamma) -> np.ndarray:
    if isinstance(gamma, AutocovSequence):
        return np.asarray(gamma.values, dtype=float)
    return np.asarray(gamma, dtype=float)


def durbin_levinson(gamma, K: int) -> PredictorTable:
    """Population finite predictors a(k), sigma_k^2 for k = 0..K.

    Standard Levinson recursion on the autocovariances. Raises
    NotPositiveDefiniteError if any prediction-error variance fails to stay
    strictly positive, which certifies positive definiteness as a side effect.
    """
    g = _gamma_vector(gamma)
    if K < 0:
        raise ParameterError("K must be >= 0")
    if K > len(g) - 1:
        raise ParameterError(f"K={K} needs {K + 1} autocovariances, got {len(g)}")
    if g[0] <= 0.0:
        raise NotPositiveDefiniteError("gamma_0 must be positive")
    sig = np.empty(K + 1)
    sig[0] = g[0]
    rows: list[np.ndarray] = []
    a = np.empty(max(K, 1))
    for k in range(1, K + 1):
        if k == 1:
            num = g[1]
        else:
            num = g[k] - a[: k - 1] @ g[k - 1:0:-1]
        kappa = num / sig[k - 1]
        if k > 1:
            a[: k - 1] = a[: k - 1] - kappa * a[k - 2::-1]
        a[k - 1] = kappa
        sig[k] = sig[k - 1] * (1.0 - kappa * kappa)
        if sig[k] <= 0.0:
            raise NotPositiveDefiniteError(
                f"prediction-error variance nonpositive at order {k}"
            )
        rows.append(a[:k].copy())
    return PredictorTable(coeffs=rows, sigma2_by_order=sig, source="population")


def _simulate_from_gamma(gamma: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Innovations-form draw: run Durbin-Levinson while emitting the sample."""
    n = len(z)
    u = np.empty(n)
    u[0] = math.sqrt(gamma[0]) * z[0]
    if n == 1:
        return u
    sig = gamma[0]
    a = np.empty(n - 1)
    for t in range(1, n):
        if t == 1:
            num = gamma[1]
        else:
            num = gamma[t] - a[: t - 1] @ gamma[t - 1:0:-1]
        kappa = num / sig
        if t > 1:
            a[: t - 1] = a[: t - 1] - kappa * a[t - 2::-1]
        a[t - 1] = kappa
        sig = sig * (1.0 - kappa * kappa)
        if sig <= 0.0:
            raise NotPositiveDefiniteError(
                f"prediction-error variance nonpositive at order {t}"
            )
        u[t] = a[:t] @ u[t - 1::-1] + math.sqrt(sig) * z[t]
    return u


def simulate(model: FarimaModel, n: int, seed) -> np.ndarray:
    """One exact Gaussian realization u_1..u_n of the process.

    Uses the innovations form of Durbin-Levinson,
    u_t = sum_{j<t} a_{t-1,j} u_{t-j} + sigma_{t-1} z_t, so there is no
    burn-in or truncation bias. Deterministic for a given seed.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    g = autocov(model, n).values
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    return _simulate_from_gamma(g, z)


@dataclass(frozen=True)
class RatioCheckReport:
    """Scaled maxima of the two finite-vs-infinite predictor ratio conditions."""

    max_ratio_scaled: float
    max_early_dev: float


def predictor_ratio_check(model: FarimaModel, m: int) -> RatioCheckReport:
    """Diagnostic for the finite-predictor ratio conditions.

    Computes max over i <= m of |a_{m,i}/a_i| ((m-i+1)/m)^d and max over
    i <= m/2 of |a_{m,i}/a_i - 1| m/i. Both stay bounded as m grows when the
    ratio conditions hold; callers compare across m.
    """
    if m < 10:
        raise ParameterError("m must be >= 10")
    if model.d == 0.0:
        raise NotApplicableError("ratio conditions need d > 0 (a_i vanish at d = 0)")
    a_inf = _ar_inf_weights(model, m)
    if np.any(a_inf == 0.0):
        raise NotApplicableError("an infinite-order AR weight is exactly zero")
    table = durbin_levinson(autocov(model, m + 1), m)
    a_m = table.coeffs[m - 1]
    ratios = a_m / a_inf
    i = np.arange(1, m + 1, dtype=float)
    scaled = np.abs(ratios) * ((m - i + 1.0) / m) ** model.d
    half = m // 2
    early = np.abs(ratios[:half] - 1.0) * (m / i[:half])
    return RatioCheckReport(
        max_ratio_scaled=float(np.max(scaled)),
        max_early_dev=float(np.max(early)),
    )
