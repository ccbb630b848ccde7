"""Exact normalising constants for the discretized linear-Gaussian model.

For ``h(x) = c x`` the per-step weight ``G`` is the likelihood ratio
``N(dy; c x D, D) / N(dy; 0, D)``. Under the Euler discretization of an
Ornstein-Uhlenbeck signal the discretized ``gamma_t^l(1)`` is therefore the
marginal likelihood of a scalar linear-Gaussian state-space model divided by
the pure-noise likelihood of the same increments, and a Kalman filter gives it
exactly. This is the ground truth used to test the particle estimators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UnsupportedModelError
from .models import KIND_OU, CONSTANT_VOL, SdeModel
from .observations import ObservationPath

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LinearGaussianSpec:
    """``x_{k+1} = A x_k + N(0, Q)``, ``dy_k = H x_k + N(0, R)``, ``x_0 = x0``."""

    A: float
    Q: float
    H: float
    R: float
    x0: float
    level: int

    def __post_init__(self):
        if self.Q <= 0 or self.R <= 0:
            raise ConfigurationError("Q and R must be positive")


def linear_gaussian_spec(model: SdeModel, level: int) -> LinearGaussianSpec:
    """The Euler-discretized OU model at ``level`` as a linear-Gaussian spec."""
    if model.kernel is None or model.kernel[0] != KIND_OU or model.d_x != 1 or model.d_y != 1:
        raise UnsupportedModelError(f"no exact oracle for model {model.name!r}; only OU is linear-Gaussian")
    dt = 2.0 ** -level
    sigma = model.kernel[1][0] if model.kernel[1] else CONSTANT_VOL
    return LinearGaussianSpec(A=1.0 - dt, Q=sigma * sigma * dt, H=model.obs_scale * dt, R=dt,
                              x0=float(model.initial_state[0]), level=level)


def _log_normal(y: float, mean: float, var: float) -> float:
    return -0.5 * (_LOG_2PI + math.log(var) + (y - mean) ** 2 / var)


def kalman_gamma_series(spec: LinearGaussianSpec, path: ObservationPath, t_max: int):
    """``log gamma_t(1)`` and ``E[X_t | data]`` for ``t = 1..t_max``."""
    path.check_level(spec.level)
    if not 1 <= t_max <= path.horizon:
        raise ConfigurationError(f"t_max={t_max} outside 1..{path.horizon}")
    if path.d_y != 1:
        raise UnsupportedModelError("the oracle is scalar")
    K = 2 ** spec.level
    dy = path.increments(spec.level)[:, 0]
    m, P = spec.x0, 0.0
    log_gamma = 0.0
    out_lg = np.empty(t_max)
    out_mean = np.empty(t_max)
    for k in range(t_max * K):
        y = float(dy[k])
        S = spec.H * spec.H * P + spec.R
        log_gamma += _log_normal(y, spec.H * m, S) - _log_normal(y, 0.0, spec.R)
        gain = P * spec.H / S
        m = m + gain * (y - spec.H * m)
        P = (1.0 - gain * spec.H) * P
        m = spec.A * m
        P = spec.A * spec.A * P + spec.Q
        if (k + 1) % K == 0:
            out_lg[(k + 1) // K - 1] = log_gamma
            out_mean[(k + 1) // K - 1] = m
    return out_lg, out_mean


def kalman_log_gamma(spec: LinearGaussianSpec, path: ObservationPath, t: int) -> tuple[float, float]:
    """``(log gamma_t(1), gamma_t(id))`` with ``gamma_t(id) = gamma_t(1) E[X_t | data]``."""
    lg, mean = kalman_gamma_series(spec, path, t)
    return float(lg[-1]), float(math.exp(lg[-1]) * mean[-1])


def oracle_gamma(model: SdeModel, path: ObservationPath, level: int, t: int) -> tuple[float, float]:
    """``(gamma_t^l(1), gamma_t^l(id))`` for the OU model."""
    lg, g_id = kalman_log_gamma(linear_gaussian_spec(model, level), path, t)
    return math.exp(lg), g_id
