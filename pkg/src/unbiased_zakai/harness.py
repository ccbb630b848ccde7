"""Cost-versus-MSE experiments: ground truth, method sweeps and CSV output.

MSE is always measured against the configured ground truth (a fine, large
particle filter, or the exact Kalman value for OU), not against the unknown
continuous-time solution.

Every (method, point, run) task is seeded by ``(seed, method index, point
index, run index)``; results are written in that index order, so the output is
bit-identical for any worker count.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ResolutionError
from .estimators import (UnbiasedSpec, allocate_levels, make_level_distribution, mlpf_run,
                         replicate_average, seed_tuple)
from .filters import ResamplingPolicy, pf_run, resolve_phi
from .models import SdeModel, builtin_model
from .observations import ObservationPath, load_path_csv, simulate_observation_path
from .oracle import oracle_gamma

log = logging.getLogger(__name__)

METHODS = ("pf", "mlpf", "st", "cs")
GROUND_TRUTH_SEED = 20_240_901
PILOT_STREAM = 1_000_000


@dataclass
class MethodConfig:
    method: str
    levels: list[int] = field(default_factory=lambda: list(range(1, 8)))
    n_scale: float = 1.0  # pf / mlpf: multiplier on the particle allocation
    particles: int | None = None  # st / cs: fixed N (default 100 or 200)
    alpha: float = 0.25
    pilot_draws: int = 200
    pilot_level: int | None = None  # st / cs: level of the variance pilot (default: finest sweep level)
    m_scale: float = 1.0
    m_fixed: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.levels:
            raise ConfigurationError("a method needs at least one sweep level")


@dataclass
class ExperimentConfig:
    model: str = "OU"
    obs_scale: float = 1.0
    data: dict = field(default_factory=lambda: {"seed": 7, "level": 8, "horizon": 50})
    t: int = 50
    phi: str = "identity"
    policy: str = "ess:0.25"
    runs: int = 100
    seed: int = 1
    ground_truth: dict = field(default_factory=dict)
    methods: list[MethodConfig] = field(default_factory=list)
    output_dir: str = "benchmark_out"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        d["methods"] = [m if isinstance(m, MethodConfig) else MethodConfig(**m) for m in d.get("methods", [])]
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, filename) -> "ExperimentConfig":
        with open(filename) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.runs < 2:
            raise ConfigurationError("need runs >= 2 to estimate an MSE")
        resolve_phi(self.phi)
        ResamplingPolicy.parse(self.policy)
        builtin_model(self.model)
        if not self.methods:
            raise ConfigurationError("no methods configured")


def build_model(cfg: ExperimentConfig) -> SdeModel:
    return builtin_model(cfg.model, cfg.obs_scale)


def build_path(data: dict) -> ObservationPath:
    if "file" in data:
        return load_path_csv(data["file"])
    return simulate_observation_path(int(data.get("seed", 7)), int(data.get("horizon", 50)),
                                     int(data.get("level", 8)))


# --- ground truth ----------------------------------------------------------------

@dataclass
class GroundTruth:
    value: float
    source: str  # "pf" or "oracle"
    pf_value: float | None = None
    oracle_value: float | None = None
    pf_se: float | None = None
    seed: int = GROUND_TRUTH_SEED


def ground_truth(model: SdeModel, path: ObservationPath, phi="identity", t: int | None = None, *,
                 level: int = 8, particles: int = 10_000, seed: int = GROUND_TRUTH_SEED,
                 policy="ess:0.25", method: str = "auto", check_runs: int = 0) -> GroundTruth:
    """Reference value of ``gamma_t(phi)``: a level-8 particle filter with 10**4 particles.

    For the OU model (``method='auto'``) the exact level-``level`` Kalman value
    is returned instead and the particle filter value is kept as a cross-check.
    ``check_runs > 1`` adds that many independent particle filter runs to
    estimate the standard error of the particle filter value.
    """
    t = path.horizon if t is None else t
    if path.finest_level < level:
        raise ResolutionError(f"ground truth needs data at level {level}, have {path.finest_level}")
    phi_name = phi if isinstance(phi, str) else None
    pf = pf_run(model, path, level, particles, t, policy, seed, phi)
    pf_value = float(pf.gamma_phi[-1])
    pf_se = None
    if check_runs > 1:
        vals = [pf_value] + [float(pf_run(model, path, level, particles, t, policy, (seed, r), phi).gamma_phi[-1])
                             for r in range(1, check_runs)]
        pf_se = float(np.std(vals, ddof=1) / math.sqrt(check_runs))
    oracle_value = None
    if method in ("auto", "oracle") and model.name == "OU" and phi_name in ("identity", "one"):
        g1, gid = oracle_gamma(model, path, level, t)
        oracle_value = gid if phi_name == "identity" else g1
    elif method == "oracle":
        raise ConfigurationError("oracle ground truth is only available for OU with phi in {identity, one}")
    if oracle_value is not None:
        return GroundTruth(oracle_value, "oracle", pf_value, oracle_value, pf_se, seed)
    return GroundTruth(pf_value, "pf", pf_value, None, pf_se, seed)


# --- sweep points ----------------------------------------------------------------

def epsilon_for_level(level: int) -> float:
    """Target root-MSE whose discretization bias matches level ``level`` (``Delta_L = eps**2``)."""
    return 2.0 ** (-level / 2.0)


@dataclass
class SweepPoint:
    method: str
    level: int
    epsilon: float
    n_levels: tuple[int, ...] = ()  # pf: (N,), mlpf: (N_0..N_L), st/cs: (N,)
    m: int = 1
    pilot_var: float | None = None
    expected_cost: float = 0.0


def default_particles(model: SdeModel) -> int:
    return 100 if model.sigma_constant else 200


def _unbiased_spec(ctx, mc: MethodConfig, level: int) -> UnbiasedSpec:
    cfg, model, path = ctx
    kind = "sigma_constant" if model.sigma_constant else "sigma_nonconstant"
    dist = make_level_distribution(kind, level, mc.alpha)
    n = mc.particles or default_particles(model)
    return UnbiasedSpec(mc.method, model, path, dist, n, cfg.t, ResamplingPolicy.parse(cfg.policy), cfg.phi)


def pilot_constant(ctx, mi: int) -> tuple[float | None, int | None]:
    """Per-draw variance ``c`` of an ST/CS method at its pilot level (``None`` for PF/MLPF or fixed M).

    Every sweep point then uses ``M = ceil(m_scale * c * eps**-2)``, so the
    variance of the M-draw mean matches ``eps**2`` at the pilot point.
    """
    cfg, _, _ = ctx
    mc = cfg.methods[mi]
    if mc.method not in ("st", "cs") or mc.m_fixed is not None:
        return None, None
    level = max(mc.levels) if mc.pilot_level is None else mc.pilot_level
    pilot = replicate_average(_unbiased_spec(ctx, mc, level), mc.pilot_draws, (cfg.seed, mi, PILOT_STREAM))
    var = pilot.var_one[-1] if cfg.phi == "one" else pilot.var_phi[-1]
    return float(var), level


def plan_point(ctx, mi: int, pi: int, c: float | None = None) -> SweepPoint:
    cfg, model, path = ctx
    mc = cfg.methods[mi]
    level = mc.levels[pi]
    eps = epsilon_for_level(level)
    if level > path.finest_level:
        raise ResolutionError(f"sweep level {level} exceeds data level {path.finest_level}")
    if mc.method == "pf":
        n = max(1, math.ceil(mc.n_scale * eps ** -2 * (1 - 1e-12)))
        return SweepPoint("pf", level, eps, (n,), expected_cost=float(cfg.t * n * 2 ** level))
    if mc.method == "mlpf":
        L, counts = allocate_levels(eps, model.sigma_constant, mc.n_scale)
        cost = float(cfg.t * sum(n * 2 ** l for l, n in enumerate(counts)))
        return SweepPoint("mlpf", L, eps, tuple(counts), expected_cost=cost)
    spec = _unbiased_spec(ctx, mc, level)
    if mc.m_fixed is not None:
        m = int(mc.m_fixed)
    elif c is None:
        raise ConfigurationError("ST/CS sweep points need the pilot constant")
    else:
        m = max(1, math.ceil(mc.m_scale * c * eps ** -2 * (1 - 1e-12)))
    return SweepPoint(mc.method, level, eps, (spec.n,), m, c, spec.expected_cost(m))


def run_point(ctx, point: SweepPoint, mi: int, pi: int, run: int) -> tuple[float, float]:
    """One independent estimate of ``gamma_t(phi)`` and its realized cost."""
    cfg, model, path = ctx
    seed = (cfg.seed, mi, pi, run)
    if point.method == "pf":
        o = pf_run(model, path, point.level, point.n_levels[0], cfg.t, cfg.policy, seed, cfg.phi)
        return float(o.gamma_phi[-1]), o.cost
    if point.method == "mlpf":
        o = mlpf_run(model, path, point.level, point.n_levels, cfg.t, cfg.policy, seed, cfg.phi)
        return float(o.gamma_phi[-1]), o.cost
    spec = _unbiased_spec(ctx, cfg.methods[mi], point.level)
    s = replicate_average(spec, point.m, seed)
    value = s.mean_one[-1] if cfg.phi == "one" else s.mean_phi[-1]
    return float(value), s.total_cost


# --- orchestration ---------------------------------------------------------------

@lru_cache(maxsize=4)
def _context_from_json(cfg_json: str):
    cfg = ExperimentConfig.from_dict(json.loads(cfg_json))
    return cfg, build_model(cfg), build_path(cfg.data)


def _task(cfg_json: str, point: SweepPoint, mi: int, pi: int, run: int):
    return run_point(_context_from_json(cfg_json), point, mi, pi, run)


def _pilot_task(cfg_json: str, mi: int):
    return pilot_constant(_context_from_json(cfg_json), mi)


@dataclass
class BenchmarkResult:
    ground_truth: GroundTruth
    results: list[dict]
    summary: list[dict]


RESULT_COLUMNS = ["method", "level", "run", "seed", "estimate", "sq_error", "cost", "ground_truth"]
SUMMARY_COLUMNS = ["method", "level", "epsilon", "allocation", "m", "pilot_var", "pilot_level", "runs", "mse",
                   "mse_se",
                   "mean_cost", "expected_cost", "log_mse", "log_cost", "ground_truth", "gt_source",
                   "gt_seed", "seed"]


def _seed_str(*parts) -> str:
    return ":".join(str(p) for p in parts)


def benchmark(cfg: ExperimentConfig, workers: int = 1, write: bool = True) -> BenchmarkResult:
    """Run every configured method at every sweep level ``cfg.runs`` times and tabulate MSE and cost."""
    cfg.validate()
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
    ctx = _context_from_json(cfg_json)
    _, model, path = ctx
    gt_opts = dict(cfg.ground_truth)
    gt = ground_truth(model, path, cfg.phi, cfg.t, policy=cfg.policy, **gt_opts)
    log.info("ground truth %.10g (%s)", gt.value, gt.source)

    index = [(mi, pi) for mi, mc in enumerate(cfg.methods) for pi in range(len(mc.levels))]
    tasks = [(mi, pi, r) for mi, pi in index for r in range(cfg.runs)]
    n_methods = len(cfg.methods)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pilots = list(pool.map(_pilot_task, [cfg_json] * n_methods, range(n_methods)))
            plan = {(mi, pi): plan_point(ctx, mi, pi, pilots[mi][0]) for mi, pi in index}
            outs = list(pool.map(_task, [cfg_json] * len(tasks), [plan[(mi, pi)] for mi, pi, _ in tasks],
                                 *zip(*tasks), chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        pilots = [pilot_constant(ctx, mi) for mi in range(n_methods)]
        plan = {(mi, pi): plan_point(ctx, mi, pi, pilots[mi][0]) for mi, pi in index}
        outs = [run_point(ctx, plan[(mi, pi)], mi, pi, r) for mi, pi, r in tasks]

    results = []
    for (mi, pi, r), (est, cost) in zip(tasks, outs):
        p = plan[(mi, pi)]
        results.append({"method": p.method, "level": p.level, "run": r, "seed": _seed_str(cfg.seed, mi, pi, r),
                        "estimate": est, "sq_error": (est - gt.value) ** 2, "cost": cost,
                        "ground_truth": gt.value})
    summary = []
    for mi, pi in index:
        p = plan[(mi, pi)]
        rows = [row for row, (a, b, _) in zip(results, tasks) if (a, b) == (mi, pi)]
        sq = np.array([row["sq_error"] for row in rows])
        costs = np.array([row["cost"] for row in rows])
        mse = float(sq.mean())
        cost_axis = p.expected_cost if p.method in ("st", "cs") else float(costs.mean())
        summary.append({
            "method": p.method, "level": p.level, "epsilon": p.epsilon,
            "allocation": " ".join(str(n) for n in p.n_levels), "m": p.m,
            "pilot_var": "" if p.pilot_var is None else p.pilot_var,
            "pilot_level": "" if pilots[mi][1] is None else pilots[mi][1], "runs": cfg.runs,
            "mse": mse, "mse_se": float(sq.std(ddof=1) / math.sqrt(sq.size)),
            "mean_cost": float(costs.mean()), "expected_cost": p.expected_cost,
            "log_mse": math.log(mse) if mse > 0 else float("-inf"), "log_cost": math.log(cost_axis),
            "ground_truth": gt.value, "gt_source": gt.source, "gt_seed": gt.seed,
            "seed": _seed_str(cfg.seed, mi, pi),
        })
    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "results.csv", RESULT_COLUMNS, results)
        _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    return BenchmarkResult(gt, results, summary)


def _fmt(v):
    return format(v, ".17g") if isinstance(v, float) else v


def _write_csv(filename, columns, rows) -> None:
    with open(filename, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in columns})


def loglog_slope(summary: list[dict], method: str) -> float:
    """Least-squares slope of log MSE against log cost over a method's sweep points."""
    rows = [r for r in summary if r["method"] == method]
    if len(rows) < 2:
        raise ConfigurationError(f"need at least two sweep points for {method!r}")
    x = np.array([r["log_cost"] for r in rows])
    y = np.array([r["log_mse"] for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
