"""Partially observed diffusion models.

A model is the signal SDE ``dX = b(X) dt + sigma(X) dW`` started at ``x_*``
together with the observation drift ``h`` of ``dY = h(X) dt + dB``.

All model callables are vectorised over leading axes: ``drift`` and ``obs_fn``
map ``(..., d_x)`` arrays to ``(..., d_x)`` / ``(..., d_y)``, ``diffusion`` maps
``(..., d_x)`` to ``(..., d_x, d_x)``.

The boundedness / Lipschitz assumptions usually placed on ``b``, ``sigma`` and
``h`` are documented but not enforced; the GBM benchmark model already has an
unbounded diffusion coefficient.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable

import numpy as np

from .errors import ConfigurationError

ArrayFn = Callable[[np.ndarray], np.ndarray]

# Builtin model families understood by the compiled kernels. The numeric
# expressions below are mirrored operation-for-operation in _kernels.pyx so that
# both backends produce identical floating point results.
KIND_OU = 0
KIND_LANGEVIN = 1
KIND_GBM = 2
KIND_NONLINEAR = 3

LANGEVIN_DOF = 10.0
GBM_DRIFT = 0.05
GBM_VOL = 0.2
CONSTANT_VOL = 0.5


@dataclass(frozen=True)
class SdeModel:
    """Signal/observation model.

    ``kernel`` is ``(kind, params)`` for builtin families, which lets the
    compiled backend evaluate the coefficients without calling back into
    Python. Custom models leave it as ``None`` and always run on the numpy
    backend.
    """

    d_x: int
    d_y: int
    drift: ArrayFn
    diffusion: ArrayFn
    obs_fn: ArrayFn
    initial_state: np.ndarray
    sigma_constant: bool = False
    name: str = "custom"
    obs_scale: float = 1.0
    kernel: tuple[int, tuple[float, ...]] | None = field(default=None, compare=False)

    def __post_init__(self):
        x0 = np.asarray(self.initial_state, dtype=float).reshape(self.d_x)
        object.__setattr__(self, "initial_state", x0)
        if self.d_x < 1 or self.d_y < 1:
            raise ConfigurationError("dimensions must be positive")

    def diffusion_covariance(self, x: np.ndarray) -> np.ndarray:
        """``a(x) = sigma(x) sigma(x)^T``."""
        s = self.diffusion(np.asarray(x, dtype=float))
        return s @ np.swapaxes(s, -1, -2)


def _ou_drift(x):
    return -x


def _langevin_drift(x, nu):
    return -0.5 * (nu + 1.0) * x / (nu + x * x)


def _gbm_drift(x, b0):
    return b0 * x


def _const_diffusion(x, s):
    return np.full(x.shape + (1,), s)


def _gbm_diffusion(x, s0):
    return (s0 * x)[..., None]


def _nonlinear_diffusion(x):
    return (1.0 / np.sqrt(1.0 + x * x))[..., None]


def _linear_obs(x, scale):
    return scale * x


def builtin_model(name: str, obs_scale: float = 1.0) -> SdeModel:
    """One of the four scalar benchmark models, observed through ``h(x) = obs_scale * x``.

    ``obs_scale=0`` gives the degenerate ``h = 0`` variant used in tests.
    """
    key = name.lower().replace("_", "").replace("-", "")
    h = partial(_linear_obs, scale=float(obs_scale))
    if key in ("ou", "ornsteinuhlenbeck"):
        return SdeModel(1, 1, _ou_drift, partial(_const_diffusion, s=CONSTANT_VOL), h,
                        np.zeros(1), sigma_constant=True, name="OU", obs_scale=obs_scale,
                        kernel=(KIND_OU, (CONSTANT_VOL,)))
    if key == "langevin":
        return SdeModel(1, 1, partial(_langevin_drift, nu=LANGEVIN_DOF),
                        partial(_const_diffusion, s=CONSTANT_VOL), h, np.zeros(1),
                        sigma_constant=True, name="Langevin", obs_scale=obs_scale,
                        kernel=(KIND_LANGEVIN, (LANGEVIN_DOF, CONSTANT_VOL)))
    if key == "gbm":
        return SdeModel(1, 1, partial(_gbm_drift, b0=GBM_DRIFT), partial(_gbm_diffusion, s0=GBM_VOL),
                        h, np.ones(1), sigma_constant=False, name="GBM", obs_scale=obs_scale,
                        kernel=(KIND_GBM, (GBM_DRIFT, GBM_VOL)))
    if key in ("nonlineardiffusion", "nonlinear", "nld"):
        return SdeModel(1, 1, _ou_drift, _nonlinear_diffusion, h, np.zeros(1),
                        sigma_constant=False, name="NonlinearDiffusion", obs_scale=obs_scale,
                        kernel=(KIND_NONLINEAR, ()))
    raise ConfigurationError(f"unknown model {name!r}; expected OU, Langevin, GBM or NonlinearDiffusion")


MODEL_NAMES = ("OU", "Langevin", "GBM", "NonlinearDiffusion")


def custom_model(drift: ArrayFn, diffusion: ArrayFn, obs_fn: ArrayFn, initial_state,
                 d_y: int = 1, sigma_constant: bool = False, name: str = "custom") -> SdeModel:
    """Wrap user supplied vectorised coefficient functions."""
    x0 = np.atleast_1d(np.asarray(initial_state, dtype=float))
    return SdeModel(x0.size, d_y, drift, diffusion, obs_fn, x0, sigma_constant=sigma_constant, name=name)


def without_kernel(model: SdeModel) -> SdeModel:
    """Same model, forced onto the numpy backend."""
    return replace(model, kernel=None)
