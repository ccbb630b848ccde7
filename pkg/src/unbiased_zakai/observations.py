"""Observation paths and the discretized Girsanov weights.

The path is stored once, at its finest resolution ``2**-finest_level``.
Increments at a coarser level are produced on demand by summing the fine
increments strictly left to right, so repeated queries are bit-identical.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ResolutionError, ShapeError
from .models import SdeModel


@dataclass(frozen=True)
class ObservationPath:
    finest_level: int
    horizon: int
    increments_fine: np.ndarray  # (horizon * 2**finest_level, d_y)
    seed: int | None = None

    def __post_init__(self):
        inc = np.asarray(self.increments_fine, dtype=float)
        if inc.ndim == 1:
            inc = inc[:, None]
        if self.finest_level < 0 or self.horizon < 1:
            raise ConfigurationError("need finest_level >= 0 and horizon >= 1")
        if inc.shape[0] != self.horizon * 2 ** self.finest_level:
            raise ShapeError(
                f"expected {self.horizon * 2 ** self.finest_level} increments, got {inc.shape[0]}")
        inc.setflags(write=False)
        object.__setattr__(self, "increments_fine", inc)

    @property
    def d_y(self) -> int:
        return self.increments_fine.shape[1]

    def check_level(self, level: int) -> None:
        if level < 0:
            raise ResolutionError(f"negative level {level}")
        if level > self.finest_level:
            raise ResolutionError(
                f"level {level} is finer than the stored data (finest level {self.finest_level})")

    def increments(self, level: int) -> np.ndarray:
        """All increments ``y_{(k+1)D} - y_{kD}`` at step ``D = 2**-level``, shape ``(T*2**level, d_y)``."""
        self.check_level(level)
        ratio = 2 ** (self.finest_level - level)
        if ratio == 1:
            return self.increments_fine
        blocks = self.increments_fine.reshape(-1, ratio, self.d_y)
        # cumsum is sequential, unlike np.sum's pairwise reduction
        return np.cumsum(blocks, axis=1)[:, -1, :]

    def increment(self, level: int, k: int) -> np.ndarray:
        self.check_level(level)
        n = self.horizon * 2 ** level
        if not 0 <= k < n:
            raise ResolutionError(f"step index {k} outside [0, {n})")
        ratio = 2 ** (self.finest_level - level)
        chunk = self.increments_fine[k * ratio:(k + 1) * ratio]
        return np.cumsum(chunk, axis=0)[-1]


def simulate_observation_path(rng_seed: int, horizon: int, finest_level: int, d_y: int = 1) -> ObservationPath:
    """Brownian increments, i.e. the observation law under the reference measure."""
    if horizon < 1 or finest_level < 0:
        raise ConfigurationError("need horizon >= 1 and finest_level >= 0")
    rng = np.random.default_rng(rng_seed)
    n = horizon * 2 ** finest_level
    inc = rng.standard_normal((n, d_y)) * np.sqrt(2.0 ** -finest_level)
    return ObservationPath(finest_level, horizon, inc, seed=rng_seed)


def save_path_csv(path: ObservationPath, filename) -> None:
    """Write ``level,horizon,d_y`` metadata, then one ``k,dy_1..dy_d`` row per increment."""
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "horizon", "d_y"])
        w.writerow([path.finest_level, path.horizon, path.d_y])
        w.writerow(["k"] + [f"dy_{i + 1}" for i in range(path.d_y)])
        for k, row in enumerate(path.increments_fine):
            w.writerow([k] + [format(v, ".17g") for v in row])


def load_path_csv(filename) -> ObservationPath:
    with open(filename, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2 or [c.strip() for c in rows[0][:3]] != ["level", "horizon", "d_y"]:
        raise ConfigurationError(f"{filename}: missing 'level,horizon,d_y' header")
    level, horizon, d_y = (int(v) for v in rows[1][:3])
    body = rows[2:]
    if body and body[0][0].strip() == "k":
        body = body[1:]
    data = np.array([[float(v) for v in r[1:1 + d_y]] for r in body], dtype=float).reshape(-1, d_y)
    ks = [int(r[0]) for r in body]
    if ks != list(range(len(ks))):
        raise ShapeError(f"{filename}: increment rows must be numbered 0..n-1 in order")
    return ObservationPath(level, horizon, data)


# --- Girsanov weights -------------------------------------------------------

def _log_g(h: np.ndarray, dy: np.ndarray, dt: float) -> np.ndarray:
    # h*dy - (dt/2)|h|^2; the compiled kernels use the same operation order
    return np.sum(h * dy, axis=-1) - (0.5 * dt) * np.sum(h * h, axis=-1)


def log_weight_g(model: SdeModel, path: ObservationPath, level: int, k: int, x) -> float:
    """Log of ``G_k^l(x)`` for the observation increment ``k`` at step ``2**-level``."""
    dy = path.increment(level, k)
    h = model.obs_fn(np.asarray(x, dtype=float).reshape(model.d_x))
    return float(_log_g(h, dy, 2.0 ** -level))


def log_block_weight(model: SdeModel, path: ObservationPath, level: int, p: int, block) -> float:
    """Log of the product of ``G`` over the first ``2**level`` states of a unit-time block.

    The block's last state (time ``p+1``) is not weighted; it seeds the next block.
    """
    states = block.states if hasattr(block, "states") else np.asarray(block, dtype=float)
    blk_level = getattr(block, "level", level)
    n = 2 ** level
    if blk_level != level or states.shape[0] != n + 1:
        raise ShapeError(f"block of {states.shape[0]} states does not belong to level {level}")
    if not 0 <= p < path.horizon:
        raise ResolutionError(f"unit interval {p} outside the observed horizon {path.horizon}")
    dy = path.increments(level)[p * n:(p + 1) * n]
    g = _log_g(model.obs_fn(states[:n].reshape(n, model.d_x)), dy, 2.0 ** -level)
    total = 0.0
    for v in g:
        total += v
    return float(total)


def log_z_discretized(model: SdeModel, path: ObservationPath, level: int, trajectory) -> float:
    """Log of the discretized Girsanov weight ``Z_T^l`` of a full trajectory on ``[0, T]``."""
    traj = np.asarray(trajectory, dtype=float).reshape(-1, model.d_x)
    n = 2 ** level
    if (traj.shape[0] - 1) % n or traj.shape[0] < n + 1:
        raise ShapeError(f"trajectory of {traj.shape[0]} states does not tile unit blocks at level {level}")
    T = (traj.shape[0] - 1) // n
    if T > path.horizon:
        raise ShapeError(f"trajectory spans {T} units but the data horizon is {path.horizon}")
    return float(sum(log_block_weight(model, path, level, p, traj[p * n:(p + 1) * n + 1])
                     for p in range(T)))
