"""Model parameters, correlation structure and the SDE coefficients.

The state is ``x = (S, V, r_d, r_f)``. The system is written as a drift
``b(x)`` plus a jump coefficient ``g(s, u, x)`` integrated against the jumps
``(s, u)`` of the pair (gamma subordinator, subordinated standard Brownian
motion in R^4).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, InvalidExponent, NotPositiveDefinite

PIVOT_TOL = 1e-12


class StateVector(NamedTuple):
    s: float
    v: float
    rd: float
    rf: float


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the four-factor system.

    ``a_*`` are long-run means of the mean-reverting factors and ``theta_*``
    are the drifts loaded on the subordinator increment. Volatilities may be
    zero (deterministic limit); everything else follows the model's sign
    constraints.
    """

    kappa_v: float
    kappa_d: float
    kappa_f: float
    a_v: float
    a_d: float
    a_f: float
    sigma_v: float
    sigma_d: float
    sigma_f: float
    theta_s: float = 0.0
    theta_v: float = 0.0
    theta_d: float = 0.0
    theta_f: float = 0.0
    s0: float = 100.0
    v0: float = 0.04
    rd0: float = 0.05
    rf0: float = 0.03

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{f.name} must be a finite number, got {value!r}")
        for name in ("kappa_v", "kappa_d", "kappa_f", "a_v", "a_d", "a_f",
                     "s0", "v0", "rd0", "rf0"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("sigma_v", "sigma_d", "sigma_f",
                     "theta_s", "theta_v", "theta_d", "theta_f"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    @property
    def initial_state(self) -> StateVector:
        return StateVector(self.s0, self.v0, self.rd0, self.rf0)

    def as_array(self) -> np.ndarray:
        """Packed coefficient vector in the order used by the path kernels."""
        return np.array([
            self.kappa_v, self.kappa_d, self.kappa_f,
            self.a_v, self.a_d, self.a_f,
            self.sigma_v, self.sigma_d, self.sigma_f,
            self.theta_s, self.theta_v, self.theta_d, self.theta_f,
        ], dtype=np.float64)


CORRELATION_NAMES = ("rho_sv", "rho_sd", "rho_sf", "rho_vd", "rho_vf", "rho_df")
_CORR_INDEX = {
    "rho_sv": (0, 1), "rho_sd": (0, 2), "rho_sf": (0, 3),
    "rho_vd": (1, 2), "rho_vf": (1, 3), "rho_df": (2, 3),
}


def cholesky_factor(rho) -> np.ndarray:
    """Lower-triangular ``H`` with ``H @ H.T == rho`` by the row recursion.

    Raises NotPositiveDefinite when a squared pivot falls to 1e-12 or below.
    """
    if isinstance(rho, CorrelationStructure):
        rho = rho.matrix
    a = np.asarray(rho, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ConfigError(f"correlation matrix must be square, got {a.shape}")
    h = np.zeros((n, n))
    for j in range(n):
        pivot = a[j, j]
        for k in range(j):
            pivot -= h[j, k] * h[j, k]
        if not pivot > PIVOT_TOL:
            raise NotPositiveDefinite(
                f"correlation matrix is not positive definite (pivot {j} = {pivot:.3e})")
        h[j, j] = math.sqrt(pivot)
        for i in range(j + 1, n):
            acc = a[i, j]
            for k in range(j):
                acc -= h[i, k] * h[j, k]
            h[i, j] = acc / h[j, j]
    return h


@dataclass(frozen=True)
class CorrelationStructure:
    """Correlations of the four driving Brownian motions ``(W_S, W_V, W_d, W_f)``."""

    rho_sv: float = 0.0
    rho_sd: float = 0.0
    rho_sf: float = 0.0
    rho_vd: float = 0.0
    rho_vf: float = 0.0
    rho_df: float = 0.0
    cholesky: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in CORRELATION_NAMES:
            value = getattr(self, name)
            if not -1.0 < value < 1.0:
                raise ConfigError(f"{name} must lie in (-1, 1), got {value!r}")
        h = cholesky_factor(self.matrix)
        h.setflags(write=False)
        object.__setattr__(self, "cholesky", h)

    @classmethod
    def from_matrix(cls, rho) -> "CorrelationStructure":
        a = np.asarray(rho, dtype=np.float64)
        if a.shape != (4, 4):
            raise ConfigError(f"expected a 4x4 correlation matrix, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise ConfigError("correlation matrix must be symmetric")
        if not np.all(np.diag(a) == 1.0):
            raise ConfigError("correlation matrix must have unit diagonal")
        return cls(**{name: float(a[i, j]) for name, (i, j) in _CORR_INDEX.items()})

    @property
    def matrix(self) -> np.ndarray:
        a = np.eye(4)
        for name, (i, j) in _CORR_INDEX.items():
            a[i, j] = a[j, i] = getattr(self, name)
        return a


BETA_CONVENTIONS = ("rate", "scale")


@dataclass(frozen=True)
class SubordinatorParams:
    """Gamma subordinator with shape ``alpha`` per unit time and parameter ``beta``.

    With the default ``convention="rate"`` an increment over a horizon ``h`` is
    Gamma(alpha*h, rate=beta): mean ``alpha*h/beta``, variance
    ``alpha*h/beta**2``, Levy density ``alpha/s * exp(-beta*s)``. With
    ``convention="scale"`` ``beta`` is the scale, i.e. the rate is ``1/beta``.
    """

    alpha: float = 1.0
    beta: float = 0.5
    convention: str = "rate"

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be > 0, got {self.alpha!r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ConfigError(f"beta must be > 0, got {self.beta!r}")
        if self.convention not in BETA_CONVENTIONS:
            raise ConfigError(f"convention must be one of {BETA_CONVENTIONS}, got {self.convention!r}")

    @classmethod
    def from_mean_variance(cls, mu: float, nu: float) -> "SubordinatorParams":
        """From mean rate ``mu`` and variance rate ``nu`` of the clock."""
        if mu <= 0 or nu <= 0:
            raise ConfigError("mu and nu must be > 0")
        return cls(alpha=mu * mu / nu, beta=mu / nu)

    @property
    def rate(self) -> float:
        return self.beta if self.convention == "rate" else 1.0 / self.beta

    def increment_shape(self, h: float) -> float:
        return self.alpha * h

    def increment_mean(self, h: float) -> float:
        return self.alpha * h / self.rate

    def increment_variance(self, h: float) -> float:
        return self.alpha * h / (self.rate * self.rate)


def fx_case_study() -> tuple[ModelParams, CorrelationStructure]:
    """EUR/USD-style reference configuration used throughout the test suite.

    The two correlations involving the variance/foreign-rate and
    domestic/foreign-rate pairs are not pinned down and default to 0.
    """
    params = ModelParams(
        kappa_v=1.70, kappa_d=0.20, kappa_f=0.32,
        a_v=0.0232, a_d=0.0475, a_f=0.0248,
        sigma_v=0.150, sigma_d=0.0352, sigma_f=0.0317,
        s0=100.0, v0=0.0275, rd0=0.0524, rf0=0.0291,
    )
    corr = CorrelationStructure(rho_sv=-0.1, rho_sd=-0.15, rho_sf=-0.15, rho_vd=0.12)
    return params, corr


def _pos(x: float) -> float:
    return x if x > 0.0 else 0.0


def drift(x, p: ModelParams, rho_sf: float = 0.0) -> np.ndarray:
    """Drift vector ``b(x)``; square-root arguments are clamped at zero."""
    s, v, rd, rf = (float(c) for c in x)
    return np.array([
        s * (rd - rf),
        p.kappa_v * (p.a_v - v),
        p.kappa_d * (p.a_d - rd),
        p.kappa_f * (p.a_f - rf) - p.sigma_f * rho_sf * math.sqrt(_pos(v) * _pos(rf)),
    ])


def jump_coeff(s: float, u, x, p: ModelParams, H) -> np.ndarray:
    """Jump coefficient ``g(s, u, x)`` for a subordinator jump ``s`` and Gaussian jump ``u``."""
    u1, u2, u3, u4 = (float(c) for c in u)
    x1, x2, x3, x4 = (float(c) for c in x)
    H = np.asarray(H, dtype=np.float64)
    return np.array([
        x1 * (p.theta_s * s + H[0, 0] * u1 * math.sqrt(_pos(x2))),
        p.theta_v * s + (H[1, 0] * u1 + H[1, 1] * u2) * p.sigma_v * math.sqrt(_pos(x2)),
        p.theta_d * s + (H[2, 0] * u1 + H[2, 1] * u2 + H[2, 2] * u3)
        * p.sigma_d * math.sqrt(_pos(x3)),
        p.theta_f * s + (H[3, 0] * u1 + H[3, 1] * u2 + H[3, 2] * u3 + H[3, 3] * u4)
        * p.sigma_f * math.sqrt(_pos(x4)),
    ])


# ---------------------------------------------------------------------------
# localization

BAND_SHAPES = ("smoothstep",)


@dataclass(frozen=True)
class LocalizationConfig:
    """Box ``[1/n, n]^4`` used for cutoffs and exit-time tracking.

    With ``apply=False`` the coefficients are left untouched and only the
    first exit from the box is recorded.
    """

    n: int
    band_shape: str = "smoothstep"
    apply: bool = True

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"localization level must be a positive integer, got {self.n!r}")
        if self.band_shape not in BAND_SHAPES:
            raise ConfigError(f"unknown band shape {self.band_shape!r}")

    def check_initial(self, x0) -> None:
        if any(not (1.0 / self.n <= c <= self.n) for c in x0):
            raise ConfigError(
                f"initial state {tuple(x0)} is outside [1/{self.n}, {self.n}]; "
                f"need n >= {minimal_level(x0)}")


def minimal_level(x0) -> int:
    """Smallest ``n0`` such that every component of ``x0`` lies in ``[1/n0, n0]``."""
    n = 1
    for c in x0:
        if c <= 0:
            raise ConfigError("initial values must be > 0")
        n = max(n, math.ceil(c), math.ceil(1.0 / c))
    while any(not (1.0 / n <= c <= n) for c in x0):
        n += 1
    return n


def cutoff(x: float, n: float) -> float:
    """Smooth one-dimensional cutoff: 1 on ``[1/n, n]``, 0 outside ``(1/(n+1), n+1)``.

    Cubic smoothstep ``3t^2 - 2t^3`` on both transition bands (C^1, monotone).
    """
    lo_in = 1.0 / n
    lo_out = 1.0 / (n + 1.0)
    hi_out = n + 1.0
    if lo_in <= x <= n:
        return 1.0
    if x <= lo_out or x >= hi_out:
        return 0.0
    if x > n:
        t = hi_out - x
    else:
        t = (x - lo_out) / (lo_in - lo_out)
    return t * t * (3.0 - 2.0 * t)


def box_cutoff(x, n: float) -> float:
    c1, c2, c3, c4 = (cutoff(float(c), n) for c in x)
    return c1 * c2 * c3 * c4


def localized_coeffs(x, p: ModelParams, loc: LocalizationConfig, H, rho_sf: float = 0.0):
    """Return ``(b_n(x), g_n(., ., x))``: drift and jump coefficient scaled by the box cutoff."""
    psi = box_cutoff(x, loc.n)
    b = drift(x, p, rho_sf)
    if psi == 1.0:
        return b, lambda s, u: jump_coeff(s, u, x, p, H)
    return psi * b, lambda s, u: psi * jump_coeff(s, u, x, p, H)


def jump_bound_constant(p: ModelParams, H, n: int) -> float:
    """Constant ``C_n`` with ``|g_n(s,u,x)| <= C_n (|s| + |u_1| + ... + |u_4|)`` for all x.

    On the support every component is at most ``n + 1``, so each row of
    ``g`` is bounded termwise; the Euclidean norm is dominated by the sum
    of the row bounds.
    """
    H = np.abs(np.asarray(H, dtype=np.float64))
    top = n + 1.0
    root = math.sqrt(top)
    s_coef = top * p.theta_s + p.theta_v + p.theta_d + p.theta_f
    weights = np.array([top * root, p.sigma_v * root, p.sigma_d * root, p.sigma_f * root])
    u_coefs = weights @ H
    return float(max(s_coef, u_coefs.max()))


# ---------------------------------------------------------------------------
# moments of the Levy measure of (subordinator, subordinated BM)

def gaussian_abs_moment(p: float) -> float:
    """``E|N(0,1)|^p``."""
    return 2.0 ** (p / 2.0) * math.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)


def levy_measure_moment(p: float, kind: str, sub: SubordinatorParams) -> float:
    """Integral of ``|s|^p`` (``kind="s"``) or ``|u_j|^p`` (``kind="u"``) against the Levy measure."""
    if not p >= 1.0:
        raise InvalidExponent(f"moment exponent must be >= 1, got {p!r}")
    a, b = sub.alpha, sub.rate
    if kind == "s":
        return a * math.gamma(p) / b ** p
    if kind == "u":
        return gaussian_abs_moment(p) * a * math.gamma(p / 2.0) / b ** (p / 2.0)
    raise ConfigError(f"kind must be 's' or 'u', got {kind!r}")
