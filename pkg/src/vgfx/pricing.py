"""European Monte Carlo and Longstaff-Schwartz American pricing on simulated paths.

Cash flows are discounted with the domestic short rate accrued on calendar
time (left-point rule). Exercise is allowed on grid dates ``t_1 .. t_N``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .analytics import moment_report
from .engine.paths import PathSet
from .errors import ConfigError, DegenerateRegressionWarning, StyleMismatch

STYLES = ("american", "european")
RIGHTS = ("put", "call")
BASES = ("monomial",)


@dataclass(frozen=True)
class OptionContract:
    style: str
    right: str
    strike: float
    maturity: float

    def __post_init__(self):
        object.__setattr__(self, "style", self.style.lower())
        object.__setattr__(self, "right", self.right.lower())
        if self.style not in STYLES:
            raise ConfigError(f"style must be one of {STYLES}, got {self.style!r}")
        if self.right not in RIGHTS:
            raise ConfigError(f"right must be one of {RIGHTS}, got {self.right!r}")
        if not self.strike > 0:
            raise ConfigError(f"strike must be > 0, got {self.strike!r}")
        if not self.maturity > 0:
            raise ConfigError(f"maturity must be > 0, got {self.maturity!r}")

    def payoff(self, s):
        if self.right == "put":
            return np.maximum(self.strike - s, 0.0)
        return np.maximum(s - self.strike, 0.0)


@dataclass(frozen=True)
class LsmConfig:
    basis: str = "monomial"
    degree: int = 3
    itm_only: bool = True

    def __post_init__(self):
        if self.basis not in BASES:
            raise ConfigError(f"basis must be one of {BASES}, got {self.basis!r}")
        if int(self.degree) != self.degree or self.degree < 1:
            raise ConfigError(f"degree must be an integer >= 1, got {self.degree!r}")


@dataclass
class PriceResult:
    price: float
    std_error: float
    n_paths: int
    exercise_fraction_per_step: np.ndarray = field(repr=False)
    style: str = ""
    right: str = ""
    strike: float = float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["exercise_fraction_per_step"] = [float(x) for x in self.exercise_fraction_per_step]
        return d


def _check_maturity(paths: PathSet, c: OptionContract) -> None:
    horizon = paths.grid.T - paths.grid.t0
    if not math.isclose(c.maturity, horizon, rel_tol=1e-9, abs_tol=1e-12):
        raise ConfigError(
            f"contract maturity {c.maturity!r} does not match the path horizon {horizon!r}")


def discount_factors(paths: PathSet) -> np.ndarray:
    """``D[i, j] = exp(-sum_{k<j} r_d[i, k] * dt)``."""
    rd = paths.rd
    dt = paths.grid.dt
    acc = np.zeros_like(rd)
    np.cumsum(rd[:, :-1] * dt, axis=1, out=acc[:, 1:])
    return np.exp(-acc)


def price_european(paths: PathSet, c: OptionContract) -> PriceResult:
    if c.style != "european":
        raise StyleMismatch(f"price_european needs a European contract, got {c.style}")
    _check_maturity(paths, c)
    disc = discount_factors(paths)[:, -1]
    values = c.payoff(paths.terminal()) * disc
    m = values.size
    n_steps = paths.grid.n_steps
    frac = np.zeros(n_steps + 1)
    frac[-1] = float(np.mean(c.payoff(paths.terminal()) > 0))
    se = float(values.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return PriceResult(float(values.mean()), se, m, frac, c.style, c.right, c.strike)


def _basis(x: np.ndarray, degree: int) -> np.ndarray:
    return np.vander(x, degree + 1, increasing=True)


def _regress(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares by normal equations, ridge-regularised when rank deficient."""
    A = X.T @ X
    b = X.T @ y
    if np.linalg.matrix_rank(X) < X.shape[1]:
        A = A + 1e-10 * np.trace(A) * np.eye(A.shape[0])
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        lam = 1e-10 * max(np.trace(A), 1.0)
        return np.linalg.solve(A + lam * np.eye(A.shape[0]), b)


def price_american_lsm(paths: PathSet, c: OptionContract, cfg: LsmConfig | None = None) -> PriceResult:
    """Longstaff-Schwartz backward induction.

    Continuation values are regressed on ``1, S/E, ..., (S/E)^degree``.
    ``exercise_fraction_per_step[j]`` is the share of paths whose realised
    exercise date is ``t_j``.
    """
    cfg = cfg or LsmConfig()
    if c.style != "american":
        raise StyleMismatch(f"price_american_lsm needs an American contract, got {c.style}")
    _check_maturity(paths, c)
    n_steps = paths.grid.n_steps
    if n_steps < 2:
        raise ConfigError("LSM needs at least two time steps")
    S = paths.S
    disc = discount_factors(paths)
    m = S.shape[0]

    intrinsic_T = c.payoff(S[:, -1])
    cash = intrinsic_T * disc[:, -1]       # realised cash flow discounted to t0
    ex_step = np.where(intrinsic_T > 0, n_steps, -1)
    n_cols = cfg.degree + 1

    for j in range(n_steps - 1, 0, -1):
        intrinsic = c.payoff(S[:, j])
        candidates = intrinsic > 0
        region = candidates if cfg.itm_only else np.ones(m, dtype=bool)
        if region.sum() < n_cols:
            if candidates.any():
                warnings.warn(
                    f"step {j}: {int(region.sum())} regression paths for {n_cols} basis "
                    "functions; continuing without exercise", DegenerateRegressionWarning,
                    stacklevel=2)
            continue
        x = S[region, j] / c.strike
        y = cash[region] / disc[region, j]
        coef = _regress(_basis(x, cfg.degree), y)
        fitted = np.zeros(m)
        fitted[region] = _basis(x, cfg.degree) @ coef
        exercise = candidates & region & (intrinsic > fitted)
        cash[exercise] = intrinsic[exercise] * disc[exercise, j]
        ex_step[exercise] = j

    frac = np.bincount(ex_step[ex_step >= 0], minlength=n_steps + 1)[: n_steps + 1] / m
    se = float(cash.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return PriceResult(float(cash.mean()), se, m, frac.astype(np.float64), c.style, c.right, c.strike)


def price(paths: PathSet, c: OptionContract, cfg: LsmConfig | None = None) -> PriceResult:
    if c.style == "american":
        return price_american_lsm(paths, c, cfg)
    return price_european(paths, c)


def moments_of_terminal(paths: PathSet):
    """(mean, variance, skewness, kurtosis) of ``S_T``."""
    return moment_report(paths.terminal())
