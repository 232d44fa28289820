"""Pathwise (strong) convergence of the scheme under grid refinement.

Level ``m`` uses the step ``delta_t / m**2``. All levels are driven by the
same noise: the finest level's clock increments and subordinated Gaussian
increments are summed over nested blocks to give the coarse ones.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..model import (CorrelationStructure, LocalizationConfig, ModelParams,
                     SubordinatorParams, minimal_level)
from ..subordinator import draw_blocks
from .paths import SimConfig, path_chunks, run_kernel

CENSOR_FACTOR = 10


@dataclass
class ConvergenceResult:
    m_values: list[int]
    n_steps: list[int]
    errors: np.ndarray          # mean sup-norm error per level (0 at the reference)
    n_kept: int
    n_censored: int
    slope: float                # least-squares slope of log(error) against log(m)
    censor_level: int

    def rows(self):
        for m, n, e in zip(self.m_values, self.n_steps, self.errors):
            yield {"m": m, "n_steps": n, "error": float(e)}


def _steps_for(m: int, horizon: float, delta_t: float) -> int:
    exact = horizon * m * m / delta_t
    n = int(round(exact))
    if n < 1 or abs(n - exact) > 1e-9 * max(1.0, exact):
        raise ConfigError(f"level m={m} gives a non-integer step count {exact!r}")
    return n


def aggregate(dgamma: np.ndarray, z: np.ndarray, ratio: int):
    """Coarsen ``(M, N)`` clock and ``(M, N, 4)`` normal blocks by summing ``ratio`` fine steps."""
    if ratio == 1:
        return dgamma, z
    m, n = dgamma.shape
    gauss = np.sqrt(dgamma)[:, :, None] * z
    dg_c = dgamma.reshape(m, n // ratio, ratio).sum(axis=2)
    g_c = gauss.reshape(m, n // ratio, ratio, 4).sum(axis=2)
    return dg_c, g_c / np.sqrt(dg_c)[:, :, None]


def fit_slope(m_values, errors) -> float:
    m = np.asarray(m_values, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    keep = e > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(m[keep]), np.log(e[keep]), 1)[0])


def convergence_study(p: ModelParams, corr: CorrelationStructure, sub: SubordinatorParams,
                      T: float, cfg: SimConfig, m_values, delta_t: float = 1.0,
                      t0: float = 0.0) -> ConvergenceResult:
    """Mean sup-norm distance of each level to the finest level on shared noise.

    Paths leaving ``[1/n, n]^4`` at any level are censored; ``n`` comes from
    ``cfg.localization`` or defaults to ``CENSOR_FACTOR`` times the smallest
    admissible level for the initial state.
    """
    m_values = [int(m) for m in m_values]
    if len(m_values) < 2 or any(b <= a for a, b in zip(m_values, m_values[1:])):
        raise ConfigError("m_values must be strictly increasing with at least two levels")
    horizon = T - t0
    if horizon <= 0:
        raise ConfigError("T must exceed t0")
    m_ref = m_values[-1]
    steps = [_steps_for(m, horizon, delta_t) for m in m_values]
    n_ref = steps[-1]
    for m, n in zip(m_values, steps):
        if n_ref % n:
            raise ConfigError(f"level m={m} does not nest in the finest level m={m_ref}")

    x0 = p.initial_state
    loc = cfg.localization
    if loc is None:
        loc = LocalizationConfig(CENSOR_FACTOR * minimal_level(x0), apply=False)
    loc.check_initial(x0)
    level_cfg = SimConfig(n_paths=cfg.n_paths, seed=cfg.seed, drift_clock=cfg.drift_clock,
                          truncation=cfg.truncation, localization=loc)
    dt_ref = horizon / n_ref

    sums = np.zeros(len(m_values))
    kept = 0
    for ids in path_chunks(cfg.n_paths, cfg.chunk_size):
        dgamma, z = draw_blocks(sub, dt_ref, n_ref, cfg.seed, np.arange(ids.start, ids.stop))
        if cfg.clock == "deterministic":
            dgamma[:] = dt_ref
        if not cfg.gaussian_noise:
            z[:] = 0.0
        ref_states, ref_exit = run_kernel(x0, dgamma, z, dt_ref, p, corr, level_cfg)
        ok = ref_exit < 0
        level_states = []
        for n in steps[:-1]:
            ratio = n_ref // n
            dg_c, z_c = aggregate(dgamma, z, ratio)
            st, ex = run_kernel(x0, dg_c, z_c, horizon / n, p, corr, level_cfg)
            ok &= ex < 0
            level_states.append((ratio, st))
        kept += int(ok.sum())
        for k, (ratio, st) in enumerate(level_states):
            diff = st[ok] - ref_states[ok][:, ::ratio]
            sups = np.sqrt((diff * diff).sum(axis=2)).max(axis=1)
            sums[k] += sups.sum()

    errors = sums / kept if kept else np.full(len(m_values), np.nan)
    return ConvergenceResult(
        m_values=m_values, n_steps=steps, errors=errors, n_kept=kept,
        n_censored=cfg.n_paths - kept, slope=fit_slope(m_values[:-1], errors[:-1]),
        censor_level=loc.n)
