"""Euler-Maruyama path generation on an equidistant grid."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..model import (CorrelationStructure, LocalizationConfig, ModelParams,
                     StateVector, SubordinatorParams, box_cutoff)
from ..subordinator import draw_blocks
from . import backend

DRIFT_CLOCKS = ("subordinated", "calendar")
TRUNCATIONS = ("full", "absorb")
CLOCKS = ("gamma", "deterministic")
NEVER = -1


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    n_steps: int

    def __post_init__(self):
        if not self.t0 >= 0:
            raise ConfigError(f"t0 must be >= 0, got {self.t0!r}")
        if not self.T > self.t0:
            raise ConfigError(f"horizon T={self.T!r} must exceed t0={self.t0!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigError(f"n_steps must be a positive integer, got {self.n_steps!r}")

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class SimConfig:
    """Simulation switches.

    drift_clock
        ``"subordinated"`` multiplies the mean-reversion and carry drifts by
        the clock increment; ``"calendar"`` multiplies them by ``dt``.
    truncation
        ``"full"`` clamps square-root arguments at zero and keeps the signed
        state; ``"absorb"`` also clamps the state itself at zero.
    clock
        ``"deterministic"`` replaces every clock increment with ``dt``
        (diffusion limit). Random draws are still consumed so streams line up.
    gaussian_noise
        ``False`` zeroes the Gaussian draws.
    """

    n_paths: int = 1000
    seed: int = 0
    drift_clock: str = "subordinated"
    truncation: str = "full"
    localization: LocalizationConfig | None = None
    clock: str = "gamma"
    gaussian_noise: bool = True
    workers: int = 1
    chunk_size: int = 2048

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigError(f"n_paths must be >= 1, got {self.n_paths!r}")
        if self.drift_clock not in DRIFT_CLOCKS:
            raise ConfigError(f"drift_clock must be one of {DRIFT_CLOCKS}, got {self.drift_clock!r}")
        if self.truncation not in TRUNCATIONS:
            raise ConfigError(f"truncation must be one of {TRUNCATIONS}, got {self.truncation!r}")
        if self.clock not in CLOCKS:
            raise ConfigError(f"clock must be one of {CLOCKS}, got {self.clock!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be >= 1")


@dataclass
class PathSet:
    """Simulated states ``(M, N+1, 4)`` with per-path first box-exit index (-1 = never)."""

    grid: TimeGrid
    states: np.ndarray
    exit_step: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def S(self) -> np.ndarray:
        return self.states[:, :, 0]

    @property
    def V(self) -> np.ndarray:
        return self.states[:, :, 1]

    @property
    def rd(self) -> np.ndarray:
        return self.states[:, :, 2]

    @property
    def rf(self) -> np.ndarray:
        return self.states[:, :, 3]

    def terminal(self) -> np.ndarray:
        return self.states[:, -1, 0]

    def exited(self) -> np.ndarray:
        return self.exit_step >= 0


def step(x, dgamma: float, z, dt: float, p: ModelParams, H, cfg: SimConfig) -> StateVector:
    """One Euler-Maruyama step for a single state (scalar reference path)."""
    s, v, rd, rf = (float(c) for c in x)
    z1, z2, z3, z4 = (float(c) for c in z)
    H = np.asarray(H, dtype=np.float64)
    dg = float(dgamma)
    c = float(dt) if cfg.drift_clock == "calendar" else dg
    rho_sf = float(H[3, 0] * H[0, 0])
    sfr = p.sigma_f * rho_sf
    vp = v if v > 0.0 else 0.0
    rdp = rd if rd > 0.0 else 0.0
    rfp = rf if rf > 0.0 else 0.0
    h = H.tolist()
    phi1 = h[1][0] * z1 + h[1][1] * z2
    phi2 = h[2][0] * z1 + h[2][1] * z2 + h[2][2] * z3
    phi3 = h[3][0] * z1 + h[3][1] * z2 + h[3][2] * z3 + h[3][3] * z4

    terms = [
        (s * (rd - rf) * c, s * p.theta_s * dg, s * math.sqrt(vp * dg) * h[0][0] * z1),
        (p.kappa_v * (p.a_v - v) * c, p.theta_v * dg, p.sigma_v * math.sqrt(vp * dg) * phi1),
        (p.kappa_d * (p.a_d - rd) * c, p.theta_d * dg, p.sigma_d * math.sqrt(rdp * dg) * phi2),
        ((p.kappa_f * (p.a_f - rf) - sfr * math.sqrt(vp * rfp)) * c,
         p.theta_f * dg, p.sigma_f * math.sqrt(rfp * dg) * phi3),
    ]
    loc = cfg.localization
    if loc is not None and loc.apply:
        psi = box_cutoff((s, v, rd, rf), float(loc.n))
        terms = [tuple(psi * t for t in row) for row in terms]
    out = [xi + a + b + d for xi, (a, b, d) in zip((s, v, rd, rf), terms)]
    if cfg.truncation == "absorb":
        out = [o if o > 0.0 else 0.0 for o in out]
    return StateVector(*out)


def _loc_args(cfg: SimConfig):
    if cfg.localization is None:
        return 0.0, False
    return float(cfg.localization.n), bool(cfg.localization.apply)


def run_kernel(x0, dgamma: np.ndarray, z: np.ndarray, dt: float, p: ModelParams,
               corr: CorrelationStructure, cfg: SimConfig, advance=None):
    """Advance ``len(dgamma)`` paths from ``x0`` given explicit increments."""
    advance = advance or backend.advance_paths
    m, n = dgamma.shape
    states = np.empty((m, n + 1, 4))
    states[:, 0] = np.asarray(x0, dtype=np.float64)
    exit_step = np.full(m, NEVER, dtype=np.int64)
    loc_n, apply_cutoff = _loc_args(cfg)
    advance(states, np.ascontiguousarray(dgamma, dtype=np.float64),
            np.ascontiguousarray(z, dtype=np.float64),
            np.ascontiguousarray(corr.cholesky), p.as_array(), float(dt),
            float(corr.rho_sf), cfg.drift_clock == "calendar",
            cfg.truncation == "absorb", loc_n, apply_cutoff, exit_step)
    return states, exit_step


def path_chunks(n_paths: int, chunk_size: int) -> list[range]:
    return [range(lo, min(lo + chunk_size, n_paths)) for lo in range(0, n_paths, chunk_size)]


def simulate(p: ModelParams, corr: CorrelationStructure, sub: SubordinatorParams,
             grid: TimeGrid, cfg: SimConfig, advance=None) -> PathSet:
    """Simulate ``cfg.n_paths`` independent paths.

    Path ``i`` draws from the stream ``(cfg.seed, i)``; the output does not
    depend on ``cfg.workers`` or ``cfg.chunk_size``.
    """
    if not isinstance(p, ModelParams) or not isinstance(corr, CorrelationStructure) \
            or not isinstance(sub, SubordinatorParams):
        raise ConfigError("simulate expects ModelParams, CorrelationStructure, SubordinatorParams")
    x0 = p.initial_state
    if cfg.localization is not None:
        cfg.localization.check_initial(x0)
    dt = grid.dt
    n = grid.n_steps
    states = np.empty((cfg.n_paths, n + 1, 4))
    exit_step = np.empty(cfg.n_paths, dtype=np.int64)

    def work(ids: range) -> None:
        dgamma, z = draw_blocks(sub, dt, n, cfg.seed, np.arange(ids.start, ids.stop))
        if cfg.clock == "deterministic":
            dgamma[:] = dt
        if not cfg.gaussian_noise:
            z[:] = 0.0
        st, ex = run_kernel(x0, dgamma, z, dt, p, corr, cfg, advance)
        states[ids.start:ids.stop] = st
        exit_step[ids.start:ids.stop] = ex

    chunks = path_chunks(cfg.n_paths, cfg.chunk_size)
    if cfg.workers == 1 or len(chunks) == 1:
        for ids in chunks:
            work(ids)
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(work, chunks))

    provenance = {
        "seed": cfg.seed,
        "drift_clock": cfg.drift_clock,
        "truncation": cfg.truncation,
        "clock": cfg.clock,
        "gaussian_noise": cfg.gaussian_noise,
        "alpha": sub.alpha,
        "beta": sub.beta,
        "beta_convention": sub.convention,
    }
    return PathSet(grid, states, exit_step, provenance)
