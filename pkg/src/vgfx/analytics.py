"""Goodness-of-fit and error statistics: chi-square, NRMSE, ECDF/histograms, moments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import brentq, minimize

from .errors import ConfigError, DegenerateRange, EmptyBins


@dataclass
class BinnedCounts:
    edges: np.ndarray
    observed: np.ndarray
    expected: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.float64)
        self.observed = np.asarray(self.observed, dtype=np.float64)
        self.expected = np.asarray(self.expected, dtype=np.float64)
        k = self.observed.size
        if self.expected.size != k or self.edges.size != k + 1:
            raise ConfigError("need K observed, K expected and K+1 edges")
        if k and np.any(np.diff(self.edges) <= 0):
            raise ConfigError("bin edges must be strictly increasing")


@dataclass
class QuoteComparison:
    strikes: np.ndarray
    simulated: np.ndarray
    market: np.ndarray

    def __post_init__(self):
        self.strikes = np.asarray(self.strikes, dtype=np.float64)
        self.simulated = np.asarray(self.simulated, dtype=np.float64)
        self.market = np.asarray(self.market, dtype=np.float64)
        n = self.strikes.size
        if n < 1 or self.simulated.size != n or self.market.size != n:
            raise ConfigError("strikes, simulated and market must have equal length >= 1")
        if np.any(self.market < 0):
            raise ConfigError("market prices must be non-negative")


def chi_square(b: BinnedCounts) -> float:
    """Pearson statistic ``sum (O_i - E_i)^2 / E_i``."""
    if b.expected.size == 0 or np.any(b.expected <= 0):
        raise EmptyBins("every bin needs a positive expected count")
    d = b.observed - b.expected
    return float(np.sum(d * d / b.expected))


def chi_square_critical(dof: int, level: float = 0.95) -> float:
    """Upper quantile of the chi-square law via the inverse regularised incomplete gamma."""
    return float(2.0 * special.gammaincinv(dof / 2.0, level))


def nrmse(q: QuoteComparison, normalizer: str = "range") -> float:
    """RMSE of simulated vs market prices over the market range (or max)."""
    diff = q.simulated - q.market
    rmse = math.sqrt(math.fsum((diff * diff).tolist()) / diff.size)
    if normalizer == "range":
        scale = float(q.market.max() - q.market.min())
    elif normalizer == "max":
        scale = float(q.market.max())
    else:
        raise ConfigError(f"normalizer must be 'range' or 'max', got {normalizer!r}")
    if not scale > 0:
        raise DegenerateRange("market prices have zero range")
    return rmse / scale


def ecdf(sample):
    """Right-continuous empirical CDF as (sorted support, F at each support point)."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    if x.size == 0:
        raise ConfigError("sample must be non-empty")
    support = np.unique(x)
    counts = np.searchsorted(x, support, side="right")
    return support, counts / x.size


def ecdf_eval(sample, points):
    x = np.sort(np.asarray(sample, dtype=np.float64))
    return np.searchsorted(x, np.asarray(points, dtype=np.float64), side="right") / x.size


def ecdf_epdf(sample, edges=None, bins: int = 50):
    """Return ``((support, F), (edges, densities))``; densities integrate to 1."""
    x = np.asarray(sample, dtype=np.float64)
    if x.size == 0:
        raise ConfigError("sample must be non-empty")
    if edges is None:
        lo, hi = float(x.min()), float(x.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, bins + 1)
    counts, edges = np.histogram(x, bins=np.asarray(edges, dtype=np.float64))
    dens = counts / (counts.sum() * np.diff(edges)) if counts.sum() else np.zeros(counts.size)
    return ecdf(x), (edges, dens)


def tail_fraction(sample, k: float = 3.0) -> float:
    """Share of observations more than ``k`` sample standard deviations from the mean."""
    x = np.asarray(sample, dtype=np.float64)
    return float(np.mean(np.abs(x - x.mean()) > k * x.std(ddof=1)))


def moment_report(sample):
    """(mean, unbiased variance, skewness, kurtosis) with moments standardised by
    the unbiased standard deviation. Skewness and kurtosis are NaN when the
    variance is zero."""
    x = np.asarray(sample, dtype=np.float64)
    if x.size < 4:
        raise ConfigError("moment_report needs at least 4 observations")
    mean = float(x.mean())
    d = x - mean
    var = float(np.dot(d, d) / (x.size - 1))
    if var == 0.0:
        return mean, 0.0, float("nan"), float("nan")
    # standardise first so fourth powers of huge deviations stay finite
    z = d / math.sqrt(var)
    z2 = z * z
    return mean, var, float(np.mean(z2 * z)), float(np.mean(z2 * z2))


# ---------------------------------------------------------------------------
# reference distributions and the binning pipeline

@dataclass(frozen=True)
class NormalFit:
    mean: float
    std: float

    @classmethod
    def fit(cls, sample) -> "NormalFit":
        x = np.asarray(sample, dtype=np.float64)
        return cls(float(x.mean()), float(x.std(ddof=1)))

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=np.float64) - self.mean) / self.std)

    def ppf(self, q):
        return self.mean + self.std * special.ndtri(np.asarray(q, dtype=np.float64))


def _mixing_nodes():
    """Composite Gauss-Legendre nodes/weights on (0, 1), refined towards both ends."""
    cuts = [0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.5,
            0.8, 0.95, 0.99, 0.999, 0.9999, 1 - 1e-6, 1 - 1e-8, 1 - 1e-10, 1.0]
    x, w = np.polynomial.legendre.leggauss(48)
    nodes, weights = [], []
    for a, b in zip(cuts, cuts[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


_U_NODES, _U_WEIGHTS = _mixing_nodes()
VG_FIT_METHODS = ("mle", "moments")
_MLE_NU_STARTS = (0.1, 0.5, 2.0)
_MLE_SCREEN_SIZE = 20_000


def vg_logpdf(x, c: float, theta: float, sigma: float, nu: float) -> np.ndarray:
    """Log-density of ``c + theta*G + sigma*sqrt(G)*Z``, ``G ~ Gamma(1/nu, scale nu)``."""
    x = np.asarray(x, dtype=np.float64) - c
    s2 = sigma * sigma
    order = 1.0 / nu - 0.5
    root = math.sqrt(2.0 * s2 / nu + theta * theta)
    ax = np.maximum(np.abs(x), 1e-300)
    arg = ax * root / s2
    with np.errstate(divide="ignore", invalid="ignore"):
        log_k = np.log(special.kve(order, arg)) - arg
    return (math.log(2.0) + theta * x / s2 - math.log(nu) / nu
            - 0.5 * math.log(2.0 * math.pi) - math.log(sigma) - special.gammaln(1.0 / nu)
            + order * (np.log(ax) - math.log(root)) + log_k)


def _vg_skew_ratio(w: float) -> float:
    """skew^2 / excess-kurtosis as a function of ``w = theta^2 nu / variance``."""
    return w * (3.0 - w) ** 2 / (3.0 * (1.0 + 2.0 * w - w * w))


@dataclass(frozen=True)
class VarianceGammaFit:
    """Variance-gamma law ``c + theta*G + sigma*sqrt(G)*Z`` with ``G ~ Gamma(1/nu, scale nu)``.

    ``loc`` is the mean, so ``c = loc - theta``. Fitted by matching the
    variance, skewness and excess kurtosis:

        var    = sigma^2 + theta^2 nu
        skew   = sign(theta) sqrt(w nu) (3 - w)
        excess = 3 nu (1 + 2w - w^2),      w = theta^2 nu / var
    """

    loc: float
    sigma: float
    nu: float
    theta: float = 0.0

    @classmethod
    def fit(cls, sample, method: str = "mle") -> "VarianceGammaFit":
        """``method="moments"`` matches moments; ``"mle"`` refines that by maximum likelihood."""
        if method not in VG_FIT_METHODS:
            raise ConfigError(f"method must be one of {VG_FIT_METHODS}, got {method!r}")
        mom = cls._fit_moments(sample)
        if method == "moments":
            return mom
        return cls._fit_mle(np.asarray(sample, dtype=np.float64), mom)

    @classmethod
    def _fit_mle(cls, x, start: "VarianceGammaFit") -> "VarianceGammaFit":
        # Heavy-kurtosis moment fits put nu where the density spikes at the
        # centre and the optimiser stalls, so a few symmetric shapes are tried
        # as well (screened on a strided subsample) and the best is refined.
        scale = math.sqrt(start.sigma ** 2 + start.theta ** 2 * start.nu)
        starts = [start] + [cls(start.loc, scale, nu) for nu in _MLE_NU_STARTS]

        def objective(data):
            def nll(p):
                c, th = p[0] * scale, p[1] * scale
                sig, nu = math.exp(p[2]) * scale, math.exp(p[3])
                val = -np.sum(vg_logpdf(data, c, th, sig, nu))
                return val if np.isfinite(val) else 1e300
            return nll

        def descend(nll, p0):
            res = minimize(nll, p0, method="L-BFGS-B",
                           bounds=[(None, None), (None, None), (-30.0, 5.0), (-12.0, 6.0)],
                           options={"ftol": 1e-12, "gtol": 1e-8, "maxiter": 500})
            f0 = nll(p0)
            return (res.x, res.fun) if res.fun < f0 else (p0, f0)

        stride = max(1, x.size // _MLE_SCREEN_SIZE)
        screen = objective(x[::stride])
        candidates = []
        for st in starts:
            p0 = np.array([(st.loc - st.theta) / scale, st.theta / scale,
                           math.log(st.sigma / scale), math.log(max(st.nu, 1e-3))])
            candidates.append(descend(screen, p0))
        best = min(candidates, key=lambda c: c[1])[0]
        if stride > 1:
            best = descend(objective(x), best)[0]
        c, th = float(best[0] * scale), float(best[1] * scale)
        return cls(c + th, math.exp(best[2]) * scale, math.exp(best[3]), th)

    @classmethod
    def _fit_moments(cls, sample) -> "VarianceGammaFit":
        mean, var, skew, kurt = moment_report(sample)
        if not var > 0:
            raise DegenerateRange("sample has zero variance")
        excess = kurt - 3.0
        if not excess > 1e-6:
            return cls(mean, math.sqrt(var), 1e-6)
        target = skew * skew / excess
        w_max = 0.999
        if target <= 0.0:
            w = 0.0
        elif target >= _vg_skew_ratio(w_max):
            w = w_max
        else:
            w = brentq(lambda t: _vg_skew_ratio(t) - target, 0.0, w_max, xtol=1e-14)
        nu = excess / (3.0 * (1.0 + 2.0 * w - w * w))
        theta = math.copysign(math.sqrt(var * w / nu), skew)
        return cls(float(mean), math.sqrt(var * (1.0 - w)), nu, theta)

    def _mixing(self):
        shape = 1.0 / self.nu
        g = self.nu * special.gammaincinv(shape, _U_NODES)
        return np.maximum(g, np.finfo(float).tiny)

    def cdf(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        g = self._mixing()
        c = self.loc - self.theta
        z = (xs[:, None] - c - self.theta * g[None, :]) / (self.sigma * np.sqrt(g)[None, :])
        out = np.clip(special.ndtr(z) @ _U_WEIGHTS, 0.0, 1.0)
        return out if np.ndim(x) else float(out[0])

    def ppf(self, q):
        qs = np.atleast_1d(np.asarray(q, dtype=np.float64))
        out = np.empty_like(qs)
        sd = math.sqrt(self.sigma ** 2 + self.theta ** 2 * self.nu)
        width = 10.0 * sd
        for i, qi in enumerate(qs):
            if qi <= 0.0:
                out[i] = -np.inf
            elif qi >= 1.0:
                out[i] = np.inf
            else:
                lo, hi = self.loc - width, self.loc + width
                while self.cdf(lo) > qi:
                    lo -= width
                while self.cdf(hi) < qi:
                    hi += width
                out[i] = brentq(lambda t: self.cdf(t) - qi, lo, hi, xtol=1e-12 * sd)
        return out if np.ndim(q) else float(out[0])


def equiprobable_bins(sample, reference, n_bins: int = 20) -> BinnedCounts:
    """Bin ``sample`` into ``n_bins`` cells of equal probability under ``reference``."""
    x = np.asarray(sample, dtype=np.float64)
    if n_bins < 2:
        raise ConfigError("need at least 2 bins")
    inner = np.asarray(reference.ppf(np.arange(1, n_bins) / n_bins), dtype=np.float64)
    edges = np.concatenate(([-np.inf], inner, [np.inf]))
    idx = np.searchsorted(inner, x, side="right")
    observed = np.bincount(idx, minlength=n_bins).astype(np.float64)
    expected = np.full(n_bins, x.size / n_bins)
    return BinnedCounts(edges, observed, expected)


def goodness_of_fit(sample, reference, n_bins: int = 20) -> dict:
    """Chi-square statistic of ``sample`` against ``reference`` on equiprobable bins."""
    b = equiprobable_bins(sample, reference, n_bins)
    dof = n_bins - 1
    return {
        "statistic": chi_square(b),
        "dof": dof,
        "critical_95": chi_square_critical(dof, 0.95),
        "bins": b,
    }


def log_returns(prices) -> np.ndarray:
    p = np.asarray(prices, dtype=np.float64)
    if p.size < 2 or np.any(p <= 0):
        raise ConfigError("need at least two positive prices")
    return np.diff(np.log(p))
