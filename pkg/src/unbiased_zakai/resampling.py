"""Weight normalisation, effective sample size and (coupled) categorical sampling.

Categorical draws use inverse-CDF sampling of one uniform per draw against a
cumulative sum, so results are reproducible across platforms for a fixed
generator state.
"""
from __future__ import annotations

import numpy as np

from .errors import DegeneracyError, ShapeError

_CLAMP = 1e-15


def normalize_with_log_mean(log_weights) -> tuple[np.ndarray, float]:
    """Normalised weights and ``log(mean(exp(log_weights)))``, via max subtraction."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0:
        raise ShapeError("need at least one weight")
    top = lw.max()
    if np.isnan(top) or top == np.inf:
        raise DegeneracyError("non-finite log-weights")
    if top == -np.inf:
        raise DegeneracyError("all weights are zero")
    w = np.exp(lw - top)
    total = w.sum()
    if not np.isfinite(total):
        raise DegeneracyError("non-finite log-weights")
    return w / total, float(top + np.log(total / lw.size))


def normalize(log_weights) -> np.ndarray:
    """Probabilities proportional to ``exp(log_weights)``."""
    return normalize_with_log_mean(log_weights)[0]


def log_mean_weight(log_weights) -> float:
    """``log(mean(exp(log_weights)))`` computed stably."""
    return normalize_with_log_mean(log_weights)[1]


def ess(pmf) -> float:
    p = np.asarray(pmf, dtype=float)
    return float(1.0 / np.dot(p, p))


def _validate_pmf(pmf) -> np.ndarray:
    p = np.asarray(pmf, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.isfinite(p).all():
        raise ShapeError("invalid probability mass function")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ShapeError(f"PMF sums to {p.sum()!r}, not 1")
    return p


def _inverse_cdf(pmf: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(pmf)
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    return np.minimum(idx, pmf.size - 1)


def multinomial_indices(rng: np.random.Generator, pmf, n: int) -> np.ndarray:
    """``n`` i.i.d. draws (0-based indices) from ``pmf``."""
    p = _validate_pmf(pmf)
    return _inverse_cdf(p, rng.random(n))


def _meet_and_residuals(r1: np.ndarray, r2: np.ndarray):
    m = np.minimum(r1, r2)
    rbar = float(m.sum())
    r4 = r1 - m
    r5 = r2 - m
    r4[r4 < _CLAMP] = 0.0
    r5[r5 < _CLAMP] = 0.0
    return m, rbar, r4, r5


def maximal_coupling_indices(rng: np.random.Generator, r1, r2) -> tuple[int, int]:
    """One draw ``(i, j)`` with ``i ~ r1``, ``j ~ r2`` and ``P(i == j)`` maximal.

    With probability ``rbar = sum(min(r1, r2))`` both indices come from the
    normalised overlap; otherwise they are drawn independently from the
    normalised residuals. Indices are 0-based.
    """
    p1, p2 = _validate_pmf(r1), _validate_pmf(r2)
    if p1.shape != p2.shape:
        raise ShapeError("PMFs must have the same size")
    m, rbar, r4, r5 = _meet_and_residuals(p1, p2)
    u = rng.random()
    if u < rbar:
        i = int(_inverse_cdf(m, np.array([rng.random()]))[0])
        return i, i
    if r4.sum() == 0.0 or r5.sum() == 0.0:
        # rbar is 1 up to rounding; the residual branch carries no mass
        i = int(_inverse_cdf(m, np.array([rng.random()]))[0])
        return i, i
    i = int(_inverse_cdf(r4, np.array([rng.random()]))[0])
    j = int(_inverse_cdf(r5, np.array([rng.random()]))[0])
    return i, j


def maximal_coupling_batch(rng: np.random.Generator, r1, r2, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n`` independent maximal-coupling draws.

    Consumes three uniform vectors of length ``n`` (branch selector, first
    index, second index) regardless of which branch each draw takes.
    """
    p1, p2 = _validate_pmf(r1), _validate_pmf(r2)
    if p1.shape != p2.shape:
        raise ShapeError("PMFs must have the same size")
    m, rbar, r4, r5 = _meet_and_residuals(p1, p2)
    u = rng.random(n)
    a = rng.random(n)
    b = rng.random(n)
    residual_ok = r4.sum() > 0.0 and r5.sum() > 0.0
    meet = (u < rbar) | (not residual_ok)
    i = np.empty(n, dtype=np.intp)
    j = np.empty(n, dtype=np.intp)
    if meet.any():
        i[meet] = _inverse_cdf(m, a[meet])
        j[meet] = i[meet]
    rest = ~meet
    if rest.any():
        i[rest] = _inverse_cdf(r4, a[rest])
        j[rest] = _inverse_cdf(r5, b[rest])
    return i, j
