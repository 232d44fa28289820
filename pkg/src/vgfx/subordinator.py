"""Gamma subordinator increments and subordinated Gaussian increments.

Every path owns a Philox generator keyed on ``(seed, stream_id)``, so the
draws of path ``i`` never depend on which worker produced them or in which
order. Within a stream the gamma increments are drawn first, then the
``N x 4`` block of standard normals (NumPy's ziggurat).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import SubordinatorParams

_SEED_MASK = (1 << 64) - 1
# smallest positive double; keeps increments strictly positive when the
# small-shape boost underflows
_TINY = float(np.nextafter(0.0, 1.0))


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _SEED_MASK):
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        if not (0 <= self.stream_id <= _SEED_MASK):
            raise ConfigError(f"stream_id must fit in 64 unsigned bits, got {self.stream_id!r}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass
class IncrementBlock:
    dgamma: np.ndarray  # (N,)
    dgauss: np.ndarray  # (N, 4) raw standard normals


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def standard_gamma_mt(shape: float, size: int, gen: np.random.Generator) -> np.ndarray:
    """Gamma(shape, 1) draws by Marsaglia-Tsang squeeze/rejection.

    For ``shape < 1`` a Gamma(shape + 1) draw is multiplied by
    ``U**(1/shape)``, evaluated in log space.
    """
    if not shape > 0:
        raise ConfigError(f"gamma shape must be > 0, got {shape!r}")
    boost = shape < 1.0
    a = shape + 1.0 if boost else shape
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        # oversample a little: acceptance rate is above 0.95 for a >= 1
        batch = need + need // 16 + 8
        x = gen.standard_normal(batch)
        u = gen.random(batch)
        t = 1.0 + c * x
        ok = t > 0.0
        v = np.where(ok, t * t * t, 1.0)
        x2 = x * x
        squeeze = u < 1.0 - 0.0331 * x2 * x2
        with np.errstate(divide="ignore"):
            full = np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(v))
        accepted = d * v[ok & (squeeze | full)]
        take = min(need, accepted.size)
        out[filled:filled + take] = accepted[:take]
        filled += take
    if boost:
        u = gen.random(size)
        with np.errstate(divide="ignore"):
            log_g = np.log(out) + np.log(u) / shape
        out = np.exp(log_g)
    np.maximum(out, _TINY, out=out)
    return out


def sample_gamma_increments(sub: SubordinatorParams, dt: float, n_steps: int, rng) -> np.ndarray:
    """``n_steps`` i.i.d. Gamma(alpha*dt, rate) clock increments."""
    if not dt > 0:
        raise ConfigError(f"dt must be > 0, got {dt!r}")
    if n_steps < 1:
        raise ConfigError(f"n_steps must be >= 1, got {n_steps!r}")
    gen = _as_generator(rng)
    return standard_gamma_mt(sub.increment_shape(dt), int(n_steps), gen) / sub.rate


def sample_subordinated_increments(dgamma, rng, H=None) -> np.ndarray:
    """Rows ``sqrt(dgamma_j) * Z_j`` with ``Z_j ~ N(0, I_4)``.

    The result is uncorrelated; the Cholesky factor is applied by the
    scheme. ``H`` is only checked for shape.
    """
    dgamma = np.asarray(dgamma, dtype=np.float64)
    if H is not None and np.shape(H) != (4, 4):
        raise ConfigError("H must be 4x4")
    gen = _as_generator(rng)
    z = gen.standard_normal((dgamma.size, 4))
    return np.sqrt(dgamma)[:, None] * z


def draw_block(sub: SubordinatorParams, dt: float, n_steps: int, stream: RngStream) -> IncrementBlock:
    """All randomness consumed by one path: clock increments then raw normals."""
    gen = stream.generator()
    dgamma = standard_gamma_mt(sub.increment_shape(dt), n_steps, gen) / sub.rate
    dgauss = gen.standard_normal((n_steps, 4))
    return IncrementBlock(dgamma, dgauss)


def draw_blocks(sub: SubordinatorParams, dt: float, n_steps: int, seed: int,
                path_ids) -> tuple[np.ndarray, np.ndarray]:
    """Stacked increment blocks for the given path ids: ``(M, N)`` and ``(M, N, 4)``."""
    path_ids = np.asarray(path_ids, dtype=np.int64)
    dgamma = np.empty((path_ids.size, n_steps))
    dgauss = np.empty((path_ids.size, n_steps, 4))
    for k, pid in enumerate(path_ids):
        block = draw_block(sub, dt, n_steps, RngStream(seed, int(pid)))
        dgamma[k] = block.dgamma
        dgauss[k] = block.dgauss
    return dgamma, dgauss
