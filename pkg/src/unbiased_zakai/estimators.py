"""Multilevel and randomized (single-term / coupled-sum) estimators of gamma_t(phi).

Seeding: every estimator takes a seed accepted by ``numpy.random.SeedSequence``
and derives independent child streams from it with ``SeedSequence.spawn``, so
a (seed, replicate index) pair reproduces a draw exactly, whatever the worker
count.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ResolutionError
from .filters import ResamplingPolicy, cpf_run, pf_run
from .models import SdeModel
from .observations import ObservationPath


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def seed_tuple(seed) -> tuple[int, ...]:
    """Flatten an int or nested int sequence into a tuple usable as SeedSequence entropy."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in np.asarray(seed, dtype=np.int64).ravel())


# --- multilevel particle filter -------------------------------------------

@dataclass
class MlpfOutput:
    level: int
    n_levels: tuple[int, ...]
    eta_phi: np.ndarray
    gamma_phi: np.ndarray
    gamma_1: np.ndarray
    cost: float


def mlpf_run(model: SdeModel, path: ObservationPath, L: int, n_levels, t_max: int,
             policy=None, rng_seed=0, phi="identity") -> MlpfOutput:
    """Level-0 particle filter plus independent coupled filters for levels ``1..L``; telescoped sums."""
    n_levels = tuple(int(n) for n in n_levels)
    if len(n_levels) != L + 1 or min(n_levels) < 1:
        raise ConfigurationError(f"need {L + 1} positive particle counts, got {n_levels}")
    path.check_level(L)
    policy = ResamplingPolicy.parse(policy)
    seeds = seed_sequence(rng_seed).spawn(L + 1)
    base = pf_run(model, path, 0, n_levels[0], t_max, policy, seeds[0], phi)
    eta = base.eta_phi.copy()
    gphi = base.gamma_phi.copy()
    g1 = base.gamma_1.copy()
    for l in range(1, L + 1):
        c = cpf_run(model, path, l, n_levels[l], t_max, policy, seeds[l], phi)
        eta += c.eta_diff
        gphi += c.gamma_diff
        g1 += c.gamma1_diff
    cost = float(t_max * sum(n * 2 ** l for l, n in enumerate(n_levels)))
    return MlpfOutput(L, n_levels, eta, gphi, g1, cost)


def allocate_levels(epsilon: float, sigma_constant: bool, scale: float = 1.0) -> tuple[int, list[int]]:
    """Finest level and per-level particle counts for a target root-MSE ``epsilon``.

    ``Delta_L ~ epsilon**2``; non-constant diffusion uses
    ``N_l = scale * eps**-2 * Delta_L**-1/4 * Delta_l**3/4``, constant diffusion
    ``N_l = scale * eps**-2 * (L + 1) * Delta_l``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ConfigurationError("epsilon must lie in (0, 1)")
    log_inv = math.log2(1.0 / epsilon)
    L = max(0, math.ceil(2.0 * log_inv - 1e-9))
    counts = []
    for l in range(L + 1):
        if sigma_constant:
            raw = scale * 2.0 ** (2.0 * log_inv - l) * (L + 1)
        else:
            raw = scale * 2.0 ** (2.0 * log_inv + 0.25 * L - 0.75 * l)
        counts.append(max(1, math.ceil(raw * (1.0 - 1e-12))))
    return L, counts


# --- level distributions ------------------------------------------------------

@dataclass(frozen=True)
class LevelDistribution:
    kind: str
    l_max: int
    alpha: float | None
    pmf: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=float)
        if p.ndim != 1 or p.size != self.l_max + 1 or np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
            raise ConfigurationError("level PMF must be strictly positive on 0..l_max and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "pmf", p)

    @property
    def tails(self) -> np.ndarray:
        """``Q(l) = sum_{q >= l} P(q)``."""
        q = np.cumsum(self.pmf[::-1])[::-1].copy()
        q[0] = 1.0
        return q

    def sample(self, rng: np.random.Generator) -> int:
        u = rng.random()
        return int(min(np.searchsorted(np.cumsum(self.pmf), u, side="right"), self.l_max))

    def expected_cost(self, method: str, t: int, n: int, m: int = 1) -> float:
        """Expected ``t M N sum_l P(l) c_l`` with ``c_l = 2**l`` (ST) or ``sum_{q<=l} 2**q`` (CS)."""
        levels = np.arange(self.l_max + 1)
        per_level = 2.0 ** levels if method == "st" else 2.0 ** (levels + 1) - 1.0
        return float(t * m * n * np.dot(self.pmf, per_level))


_KIND_ALIASES = {
    "sigma_constant": "sigma_constant", "const": "sigma_constant", "constant": "sigma_constant",
    "sigma_nonconstant": "sigma_nonconstant", "nonconst": "sigma_nonconstant", "nonconstant": "sigma_nonconstant",
}


def make_level_distribution(kind: str, l_max: int, alpha: float = 0.25) -> LevelDistribution:
    """``P(l)`` proportional to ``2**(-l * r) (l + 1) log2(l + 2)**2`` on ``0..l_max``.

    ``r = 1`` for constant diffusion coefficients and ``r = 1/2 + alpha`` otherwise.
    """
    try:
        kind = _KIND_ALIASES[kind]
    except KeyError:
        raise ConfigurationError(f"unknown level distribution kind {kind!r}") from None
    if l_max < 0:
        raise ConfigurationError("l_max must be non-negative")
    if kind == "sigma_nonconstant":
        if not 0.0 < alpha < 0.5:
            raise ConfigurationError("alpha must lie in (0, 1/2)")
        rate = 0.5 + alpha
    else:
        rate, alpha = 1.0, None
    l = np.arange(l_max + 1, dtype=float)
    w = 2.0 ** (-rate * l) * (l + 1.0) * np.log2(l + 2.0) ** 2
    return LevelDistribution(kind, l_max, alpha, w / w.sum())


def distribution_from_pmf(pmf) -> LevelDistribution:
    p = np.asarray(pmf, dtype=float)
    return LevelDistribution("custom", p.size - 1, None, p)


# --- randomized unbiased estimators --------------------------------------------

@dataclass
class UnbiasedEstimate:
    """One single-term or coupled-sum draw; values are per integer time ``1..t_max``."""

    method: str
    value_phi: np.ndarray
    value_one: np.ndarray
    level_drawn: int
    cost_units: float
    seed: tuple[int, ...]
    elapsed: float
    terms: dict = field(default_factory=dict, repr=False)  # level -> (psi_phi, psi_one)


def _psi(model, path, level, n, t_max, policy, seed, phi):
    if level == 0:
        o = pf_run(model, path, 0, n, t_max, policy, seed, phi)
        return o.gamma_phi, o.gamma_1
    c = cpf_run(model, path, level, n, t_max, policy, seed, phi)
    return c.gamma_diff, c.gamma1_diff


def _check_support(path: ObservationPath, dist: LevelDistribution) -> None:
    if dist.l_max > path.finest_level:
        raise ResolutionError(
            f"level distribution reaches {dist.l_max} but the data stop at level {path.finest_level}")


def st_estimate(model: SdeModel, path: ObservationPath, dist: LevelDistribution, n: int, t_max: int,
                policy=None, rng_seed=0, phi="identity") -> UnbiasedEstimate:
    """Single-term estimator: draw ``L ~ P`` and return ``Psi^L / P(L)``."""
    _check_support(path, dist)
    policy = ResamplingPolicy.parse(policy)
    start = time.perf_counter()
    level_ss, filt_ss = seed_sequence(rng_seed).spawn(2)
    L = dist.sample(np.random.default_rng(level_ss))
    psi_phi, psi_one = _psi(model, path, L, n, t_max, policy, filt_ss, phi)
    p = dist.pmf[L]
    return UnbiasedEstimate("st", psi_phi / p, psi_one / p, L, float(t_max * n * 2 ** L),
                            seed_tuple(seed_sequence(rng_seed).entropy), time.perf_counter() - start,
                            {L: (psi_phi, psi_one)})


def cs_estimate(model: SdeModel, path: ObservationPath, dist: LevelDistribution, n: int, t_max: int,
                policy=None, rng_seed=0, phi="identity") -> UnbiasedEstimate:
    """Coupled-sum estimator: draw ``L ~ P`` and return ``Psi^0 + sum_{l=1}^L Psi^l / Q(l)``."""
    _check_support(path, dist)
    policy = ResamplingPolicy.parse(policy)
    start = time.perf_counter()
    level_ss, *level_seeds = seed_sequence(rng_seed).spawn(dist.l_max + 2)
    L = dist.sample(np.random.default_rng(level_ss))
    tails = dist.tails
    value_phi = value_one = None
    terms = {}
    for l in range(L + 1):
        psi_phi, psi_one = _psi(model, path, l, n, t_max, policy, level_seeds[l], phi)
        terms[l] = (psi_phi, psi_one)
        if l == 0:
            value_phi, value_one = psi_phi.copy(), psi_one.copy()
        else:
            value_phi += psi_phi / tails[l]
            value_one += psi_one / tails[l]
    cost = float(t_max * n * (2 ** (L + 1) - 1))
    return UnbiasedEstimate("cs", value_phi, value_one, L, cost,
                            seed_tuple(seed_sequence(rng_seed).entropy), time.perf_counter() - start, terms)


@dataclass(frozen=True)
class UnbiasedSpec:
    """Everything needed to draw one ST or CS estimate, minus the seed."""

    method: str
    model: SdeModel
    path: ObservationPath
    dist: LevelDistribution
    n: int
    t_max: int
    policy: ResamplingPolicy = ResamplingPolicy()
    phi: str = "identity"

    def __post_init__(self):
        if self.method not in ("st", "cs"):
            raise ConfigurationError(f"unknown randomized estimator {self.method!r}")

    def draw(self, seed) -> UnbiasedEstimate:
        fn = st_estimate if self.method == "st" else cs_estimate
        return fn(self.model, self.path, self.dist, self.n, self.t_max, self.policy, seed, self.phi)

    def expected_cost(self, m: int = 1) -> float:
        return self.dist.expected_cost(self.method, self.t_max, self.n, m)


@dataclass
class ReplicateSummary:
    mean_phi: np.ndarray
    mean_one: np.ndarray
    var_phi: np.ndarray  # sample variance of single draws
    var_one: np.ndarray
    total_cost: float
    expected_cost: float
    draws: list[UnbiasedEstimate]

    @property
    def m(self) -> int:
        return len(self.draws)

    @property
    def levels(self) -> np.ndarray:
        return np.array([d.level_drawn for d in self.draws])


def _draw_chunk(spec: UnbiasedSpec, seeds: list) -> list[UnbiasedEstimate]:
    return [spec.draw(s) for s in seeds]


def replicate_seeds(base_seed, m: int) -> list[tuple[int, ...]]:
    base = seed_tuple(base_seed)
    return [base + (i,) for i in range(m)]


def replicate_average(spec: UnbiasedSpec, m: int, base_seed=0, workers: int = 1) -> ReplicateSummary:
    """Average ``m`` independent draws; replicate ``i`` is seeded by ``(*base_seed, i)``."""
    if m < 1:
        raise ConfigurationError("need at least one replicate")
    seeds = replicate_seeds(base_seed, m)
    if workers > 1 and m > 1:
        chunks = [seeds[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_draw_chunk, [spec] * workers, chunks))
        draws = [None] * m
        for w, part in enumerate(parts):
            draws[w::workers] = part
    else:
        draws = _draw_chunk(spec, seeds)
    phi = np.array([d.value_phi for d in draws])
    one = np.array([d.value_one for d in draws])
    ddof_var = (lambda a: a.var(axis=0, ddof=1)) if m > 1 else (lambda a: np.full(a.shape[1], np.nan))
    return ReplicateSummary(phi.mean(axis=0), one.mean(axis=0), ddof_var(phi), ddof_var(one),
                            float(sum(d.cost_units for d in draws)), spec.expected_cost(m), draws)
