"""Backend selection for the propagation kernels.

The compiled extension is used when it imported successfully, the model
carries a compiled coefficient family and ``UNBIASED_ZAKAI_BACKEND`` is not
set to ``python``. Everything else goes through the numpy fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels
from .models import SdeModel

try:
    from . import _kernels as _ext
except ImportError:  # extension not built
    _ext = None

_forced = os.environ.get("UNBIASED_ZAKAI_BACKEND", "").strip().lower()
if _forced not in ("", "auto", "python", "compiled"):
    raise ImportError(f"UNBIASED_ZAKAI_BACKEND must be auto, python or compiled, not {_forced!r}")
if _forced == "compiled" and _ext is None:
    raise ImportError("UNBIASED_ZAKAI_BACKEND=compiled but the extension module is not built")

_use_compiled = _ext is not None and _forced != "python"


def compiled_available() -> bool:
    return _ext is not None


def backend_name() -> str:
    return "compiled" if _use_compiled else "python"


def set_backend(name: str) -> None:
    """Switch backends at runtime: 'python', 'compiled' or 'auto' (the import-time choice)."""
    global _use_compiled
    if name == "auto":
        _use_compiled = _ext is not None and _forced != "python"
    elif name == "compiled":
        if _ext is None:
            raise RuntimeError("compiled extension is not available")
        _use_compiled = True
    elif name == "python":
        _use_compiled = False
    else:
        raise ValueError(name)


def _compiled_for(model: SdeModel) -> bool:
    return _use_compiled and model.kernel is not None and model.d_x == 1 and model.d_y == 1


def _params(model: SdeModel) -> np.ndarray:
    return np.asarray(model.kernel[1], dtype=np.float64)


def propagate(model: SdeModel, x0: np.ndarray, v: np.ndarray, dy: np.ndarray, dt: float):
    """Terminal states ``(N, d_x)`` and block log-weights ``(N,)``; see ``_pykernels.propagate``."""
    if _compiled_for(model):
        x, lw = _ext.propagate(model.kernel[0], _params(model), float(model.obs_scale),
                               np.ascontiguousarray(x0[:, 0]), np.ascontiguousarray(v[:, :, 0]),
                               np.ascontiguousarray(dy[:, 0]), dt)
        return x[:, None], lw
    return _pykernels.propagate(model, x0, v, dy, dt)


def propagate_coupled(model: SdeModel, xf0, xc0, v, dy_fine, dy_coarse, dt: float):
    if _compiled_for(model):
        xf, lwf, xc, lwc = _ext.propagate_coupled(
            model.kernel[0], _params(model), float(model.obs_scale),
            np.ascontiguousarray(xf0[:, 0]), np.ascontiguousarray(xc0[:, 0]),
            np.ascontiguousarray(v[:, :, 0]), np.ascontiguousarray(dy_fine[:, 0]),
            np.ascontiguousarray(dy_coarse[:, 0]), dt)
        return xf[:, None], lwf, xc[:, None], lwc
    return _pykernels.propagate_coupled(model, xf0, xc0, v, dy_fine, dy_coarse, dt)
