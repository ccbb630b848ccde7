"""Particle filter and coupled particle filter over unit-time blocks.

Both filters keep, per particle, the log of the weight accumulated since the
last resampling time, and a running log normalising-constant factor that
absorbs the mean weight whenever resampling fires. With resampling at every
unit time this is exactly the textbook product-of-mean-weights estimator; with
ESS-triggered resampling it is its standard adaptive generalisation.

Only the terminal state of each particle's current block is stored; the
intermediate Euler states are consumed inside the propagation kernel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _backend
from .errors import ConfigurationError, LevelError, ResolutionError
from .euler import brownian_increments
from .models import SdeModel
from .observations import ObservationPath
from .resampling import ess, maximal_coupling_batch, multinomial_indices, normalize_with_log_mean

TestFunction = Callable[[np.ndarray], np.ndarray]


def _identity(x):
    return x[:, 0]


def _one(x):
    return np.ones(x.shape[0])


PHI = {"identity": _identity, "one": _one}


def resolve_phi(phi) -> TestFunction:
    if callable(phi):
        return phi
    try:
        return PHI[phi]
    except KeyError:
        raise ConfigurationError(f"unknown test function {phi!r}; expected one of {sorted(PHI)}") from None


@dataclass(frozen=True)
class ResamplingPolicy:
    mode: str = "ess_threshold"
    threshold_fraction: float = 0.25

    def __post_init__(self):
        if self.mode not in ("every_unit", "ess_threshold"):
            raise ConfigurationError(f"unknown resampling mode {self.mode!r}")
        if not 0.0 < self.threshold_fraction <= 1.0:
            raise ConfigurationError("threshold_fraction must lie in (0, 1]")

    @classmethod
    def parse(cls, text: str | "ResamplingPolicy" | None) -> "ResamplingPolicy":
        """Accepts ``every``, ``every_unit``, ``ess`` or ``ess:<fraction>``."""
        if text is None:
            return cls()
        if isinstance(text, cls):
            return text
        t = str(text).strip().lower()
        if t in ("every", "every_unit", "always"):
            return cls("every_unit")
        if t == "ess":
            return cls()
        if t.startswith("ess:"):
            try:
                return cls("ess_threshold", float(t[4:]))
            except ValueError:
                pass
        raise ConfigurationError(f"cannot parse resampling policy {text!r}")

    def fires(self, ess_value: float, n: int) -> bool:
        return self.mode == "every_unit" or ess_value < self.threshold_fraction * n

    def __str__(self):
        return "every" if self.mode == "every_unit" else f"ess:{self.threshold_fraction:g}"


EVERY_UNIT = ResamplingPolicy("every_unit")


@dataclass
class Ensemble:
    level: int
    x: np.ndarray  # (N, d_x) states at the current integer time
    cum_log_weights: np.ndarray  # (N,)
    log_gamma_running: float = 0.0
    time: int = 1

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def weigh(self) -> tuple[np.ndarray, float]:
        """Normalised weights and log mean weight since the last resampling."""
        return normalize_with_log_mean(self.cum_log_weights)

    def estimates(self, phi: TestFunction, pmf: np.ndarray, log_mean: float) -> tuple[float, float, float]:
        """``(eta(phi), log gamma(1), gamma(phi))`` at the current time."""
        eta = float(np.dot(pmf, phi(self.x)))
        log_g1 = self.log_gamma_running + log_mean
        return eta, log_g1, float(np.exp(log_g1) * eta)

    def absorb_and_select(self, log_mean: float, idx: np.ndarray) -> None:
        self.log_gamma_running += log_mean
        self.x = self.x[idx]
        self.cum_log_weights = np.zeros(self.n)


@dataclass
class FilterOutput:
    """Per integer time ``t = 1..t_max`` estimates from one particle filter run."""

    level: int
    n_particles: int
    eta_phi: np.ndarray
    log_gamma_1: np.ndarray
    gamma_phi: np.ndarray
    ess: np.ndarray
    resampled: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.eta_phi.size + 1)

    @property
    def gamma_1(self) -> np.ndarray:
        return np.exp(self.log_gamma_1)

    @property
    def log_gamma_phi(self) -> np.ndarray:
        """``log |gamma(phi)|``; the sign is that of ``eta_phi`` because ``gamma(1) > 0``."""
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.gamma_phi))

    @property
    def cost(self) -> float:
        return float(self.eta_phi.size * self.n_particles * 2 ** self.level)


@dataclass
class CoupledFilterOutput:
    level: int
    n_particles: int
    fine: FilterOutput
    coarse: FilterOutput
    ess_min: np.ndarray
    resampled: np.ndarray
    meet_fraction: np.ndarray  # fraction of i == j pairs at each resampling time, nan otherwise
    overlap: np.ndarray  # sum_i min(pmf_fine, pmf_coarse) at each resampling time, nan otherwise

    @property
    def eta_diff(self) -> np.ndarray:
        return self.fine.eta_phi - self.coarse.eta_phi

    @property
    def gamma_diff(self) -> np.ndarray:
        return self.fine.gamma_phi - self.coarse.gamma_phi

    @property
    def gamma1_diff(self) -> np.ndarray:
        return self.fine.gamma_1 - self.coarse.gamma_1

    @property
    def cost(self) -> float:
        return float(self.ess_min.size * self.n_particles * 2 ** self.level)


def _check(path: ObservationPath, level: int, n: int, t_max: int) -> None:
    path.check_level(level)
    if n < 1:
        raise ConfigurationError("need at least one particle")
    if not 1 <= t_max <= path.horizon:
        raise ResolutionError(f"t_max={t_max} outside the observed horizon 1..{path.horizon}")


def pf_run(model: SdeModel, path: ObservationPath, level: int, n: int, t_max: int,
           policy=None, rng_seed=0, phi="identity") -> FilterOutput:
    """Particle filter at discretization level ``level`` with ``n`` particles.

    ``rng_seed`` is anything accepted by ``numpy.random.default_rng``.
    """
    _check(path, level, n, t_max)
    policy = ResamplingPolicy.parse(policy)
    phi = resolve_phi(phi)
    rng = np.random.default_rng(rng_seed)
    K, dt = 2 ** level, 2.0 ** -level
    dy = path.increments(level)

    x0 = np.tile(model.initial_state, (n, 1))
    x, lw = _backend.propagate(model, x0, brownian_increments(rng, (n, K, model.d_x), dt), dy[:K], dt)
    ens = Ensemble(level, x, lw)

    eta = np.empty(t_max)
    lg1 = np.empty(t_max)
    gphi = np.empty(t_max)
    ess_t = np.empty(t_max)
    res = np.zeros(t_max, dtype=bool)
    for t in range(1, t_max + 1):
        pmf, lm = ens.weigh()
        eta[t - 1], lg1[t - 1], gphi[t - 1] = ens.estimates(phi, pmf, lm)
        ess_t[t - 1] = ess(pmf)
        if t == t_max:
            break
        if policy.fires(ess_t[t - 1], n):
            res[t - 1] = True
            ens.absorb_and_select(lm, multinomial_indices(rng, pmf, n))
        v = brownian_increments(rng, (n, K, model.d_x), dt)
        ens.x, lw = _backend.propagate(model, ens.x, v, dy[t * K:(t + 1) * K], dt)
        ens.cum_log_weights = ens.cum_log_weights + lw
        ens.time = t + 1
    return FilterOutput(level, n, eta, lg1, gphi, ess_t, res)


def cpf_run(model: SdeModel, path: ObservationPath, level: int, n: int, t_max: int,
            policy=None, rng_seed=0, phi="identity") -> CoupledFilterOutput:
    """Coupled particle filter for the level pair ``(level, level - 1)``.

    Resampling fires when the smaller of the two ESS values drops below the
    threshold; the two index sets are then drawn from the maximal coupling of
    the fine and coarse weight PMFs.
    """
    if level < 1:
        raise LevelError("the coupled filter needs level >= 1")
    _check(path, level, n, t_max)
    policy = ResamplingPolicy.parse(policy)
    phi = resolve_phi(phi)
    rng = np.random.default_rng(rng_seed)
    K, dt = 2 ** level, 2.0 ** -level
    dyf = path.increments(level)
    dyc = path.increments(level - 1)
    Kc = K // 2

    x0 = np.tile(model.initial_state, (n, 1))
    v = brownian_increments(rng, (n, K, model.d_x), dt)
    xf, lwf, xc, lwc = _backend.propagate_coupled(model, x0, x0, v, dyf[:K], dyc[:Kc], dt)
    fine = Ensemble(level, xf, lwf)
    coarse = Ensemble(level - 1, xc, lwc)

    out = {k: np.empty(t_max) for k in ("eta_f", "lg_f", "g_f", "ess_f", "eta_c", "lg_c", "g_c", "ess_c")}
    res = np.zeros(t_max, dtype=bool)
    meet = np.full(t_max, np.nan)
    overlap = np.full(t_max, np.nan)
    for t in range(1, t_max + 1):
        i = t - 1
        (pf, lmf), (pc, lmc) = fine.weigh(), coarse.weigh()
        out["eta_f"][i], out["lg_f"][i], out["g_f"][i] = fine.estimates(phi, pf, lmf)
        out["eta_c"][i], out["lg_c"][i], out["g_c"][i] = coarse.estimates(phi, pc, lmc)
        out["ess_f"][i], out["ess_c"][i] = ess(pf), ess(pc)
        if t == t_max:
            break
        if policy.fires(min(out["ess_f"][i], out["ess_c"][i]), n):
            res[i] = True
            idx_f, idx_c = maximal_coupling_batch(rng, pf, pc, n)
            meet[i] = float(np.mean(idx_f == idx_c))
            overlap[i] = float(np.minimum(pf, pc).sum())
            fine.absorb_and_select(lmf, idx_f)
            coarse.absorb_and_select(lmc, idx_c)
        v = brownian_increments(rng, (n, K, model.d_x), dt)
        fine.x, lwf, coarse.x, lwc = _backend.propagate_coupled(
            model, fine.x, coarse.x, v, dyf[t * K:(t + 1) * K], dyc[t * Kc:(t + 1) * Kc], dt)
        fine.cum_log_weights = fine.cum_log_weights + lwf
        coarse.cum_log_weights = coarse.cum_log_weights + lwc
        fine.time = coarse.time = t + 1

    fo = FilterOutput(level, n, out["eta_f"], out["lg_f"], out["g_f"], out["ess_f"], res)
    co = FilterOutput(level - 1, n, out["eta_c"], out["lg_c"], out["g_c"], out["ess_c"], res.copy())
    return CoupledFilterOutput(level, n, fo, co, np.minimum(out["ess_f"], out["ess_c"]), res, meet, overlap)
