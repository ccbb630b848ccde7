"""Pure numpy implementation of the unit-time propagation kernels.

This is the fallback used when the compiled extension is unavailable or the
model has no compiled coefficient family. Particles are processed as a batch;
the Python loop runs over the ``2**level`` Euler sub-steps.
"""
from __future__ import annotations

import numpy as np

from .models import SdeModel


def euler_step(model: SdeModel, x: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
    """``x + b(x) dt + sigma(x) v`` for a batch of states ``(..., d_x)``."""
    sv = np.einsum("...ij,...j->...i", model.diffusion(x), v)
    return x + model.drift(x) * dt + sv


def log_g(model: SdeModel, x: np.ndarray, dy: np.ndarray, half_dt: float) -> np.ndarray:
    h = model.obs_fn(x)
    return np.sum(h * dy, axis=-1) - half_dt * np.sum(h * h, axis=-1)


def propagate(model: SdeModel, x0: np.ndarray, v: np.ndarray, dy: np.ndarray, dt: float):
    """Run one unit-time Euler block for every particle.

    Parameters
    ----------
    x0 : (N, d_x) starting states
    v : (N, K, d_x) Brownian increments, ``K = 1/dt``
    dy : (K, d_y) observation increments of the block

    Returns
    -------
    terminal states (N, d_x) and block log-weights (N,)
    """
    x = np.array(x0, dtype=float)
    lw = np.zeros(x.shape[0])
    half_dt = 0.5 * dt
    for k in range(v.shape[1]):
        lw = lw + log_g(model, x, dy[k], half_dt)
        x = euler_step(model, x, v[:, k], dt)
    return x, lw


def propagate_coupled(model: SdeModel, xf0: np.ndarray, xc0: np.ndarray, v: np.ndarray,
                      dy_fine: np.ndarray, dy_coarse: np.ndarray, dt: float):
    """Fine block driven by ``v``; coarse block (step ``2 dt``) driven by pairwise sums of ``v``."""
    xf, lwf = propagate(model, xf0, v, dy_fine, dt)
    vc = v[:, 0::2] + v[:, 1::2]
    xc, lwc = propagate(model, xc0, vc, dy_coarse, 2.0 * dt)
    return xf, lwf, xc, lwc
