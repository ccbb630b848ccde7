"""Single-level and coupled Euler-Maruyama kernels over one unit of time.

RNG contract: a block at level ``l`` consumes exactly ``2**l`` standard normal
``d_x``-vectors, in time order, via one ``rng.standard_normal((2**l, d_x))``
call. The coarse member of a coupled pair never draws; it uses sums of
consecutive fine increments. Batched filter code draws ``(N, 2**l, d_x)`` in
one call, which is the same stream as ``N`` consecutive single-block calls.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._pykernels import euler_step
from .errors import LevelError
from .models import SdeModel


@dataclass(frozen=True)
class PathBlock:
    """States ``x_p, x_{p+D}, ..., x_{p+1}`` of one particle at step ``D = 2**-level``."""

    level: int
    start_time: int
    states: np.ndarray  # (2**level + 1, d_x)

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


def brownian_increments(rng: np.random.Generator, shape: tuple, dt: float) -> np.ndarray:
    return rng.standard_normal(shape) * np.sqrt(dt)


def _run(model: SdeModel, x: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
    states = np.empty((v.shape[0] + 1, model.d_x))
    states[0] = x
    for k in range(v.shape[0]):
        states[k + 1] = euler_step(model, states[k], v[k], dt)
    return states


def euler_block(model: SdeModel, level: int, x, rng: np.random.Generator, start_time: int = 0) -> PathBlock:
    """Sample a unit-time Euler path at step ``2**-level`` started from ``x``."""
    if level < 0:
        raise LevelError(f"negative level {level}")
    dt = 2.0 ** -level
    v = brownian_increments(rng, (2 ** level, model.d_x), dt)
    x = np.asarray(x, dtype=float).reshape(model.d_x)
    return PathBlock(level, start_time, _run(model, x, v, dt))


def coupled_euler_block(model: SdeModel, level: int, x_fine, x_coarse, rng: np.random.Generator,
                        start_time: int = 0) -> tuple[PathBlock, PathBlock]:
    """Fine (``level``) and coarse (``level - 1``) blocks sharing one Brownian path."""
    if level < 1:
        raise LevelError("coupled blocks need level >= 1")
    dt = 2.0 ** -level
    v = brownian_increments(rng, (2 ** level, model.d_x), dt)
    xf = np.asarray(x_fine, dtype=float).reshape(model.d_x)
    xc = np.asarray(x_coarse, dtype=float).reshape(model.d_x)
    fine = _run(model, xf, v, dt)
    coarse = _run(model, xc, v[0::2] + v[1::2], 2.0 * dt)
    return PathBlock(level, start_time, fine), PathBlock(level - 1, start_time, coarse)
