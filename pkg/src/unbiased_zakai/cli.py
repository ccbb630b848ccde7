"""Command-line entry point: ``unbiased-zakai <command> ...`` (or ``python -m unbiased_zakai``)."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys

from .errors import DegeneracyError, ZakaiError
from .estimators import UnbiasedSpec, allocate_levels, make_level_distribution, mlpf_run, replicate_average
from .filters import ResamplingPolicy, pf_run
from .harness import ExperimentConfig, benchmark, loglog_slope
from .models import MODEL_NAMES, builtin_model
from .observations import load_path_csv, save_path_csv, simulate_observation_path
from .oracle import kalman_log_gamma, linear_gaussian_spec

log = logging.getLogger("unbiased_zakai")


def _f(x) -> str:
    return format(float(x), ".17g")


def _writer(out):
    if out in (None, "-"):
        return csv.writer(sys.stdout, lineterminator="\n"), None
    fh = open(out, "w", newline="")
    return csv.writer(fh), fh


def _model_name(text: str) -> str:
    for name in MODEL_NAMES:
        if name.lower() == text.lower():
            return name
    raise argparse.ArgumentTypeError(f"unknown model {text!r}; choose from {', '.join(MODEL_NAMES)}")


def cmd_simulate_data(a) -> None:
    path = simulate_observation_path(a.seed, a.horizon, a.level, a.d_y)
    save_path_csv(path, a.out)


def cmd_run_pf(a) -> None:
    model = builtin_model(a.model, a.obs_scale)
    path = load_path_csv(a.data)
    o = pf_run(model, path, a.level, a.particles, a.t, a.policy, a.seed, a.phi)
    w, fh = _writer(a.out)
    w.writerow(["t", "eta_phi", "log_gamma_phi", "log_gamma_1", "ess_min", "resampled"])
    for i, t in enumerate(o.times):
        w.writerow([t, _f(o.eta_phi[i]), _f(o.log_gamma_phi[i]), _f(o.log_gamma_1[i]), _f(o.ess[i]),
                    int(o.resampled[i])])
    if fh:
        fh.close()


def _randomized(a, method: str) -> None:
    model = builtin_model(a.model, a.obs_scale)
    path = load_path_csv(a.data)
    dist = make_level_distribution(a.dist, a.lmax, a.alpha)
    spec = UnbiasedSpec(method, model, path, dist, a.particles, a.t, ResamplingPolicy.parse(a.policy), a.phi)
    s = replicate_average(spec, a.replicates, a.seed, a.workers)
    w, fh = _writer(a.out)
    w.writerow(["row", "replicate", "seed", "t", "value_phi", "value_one", "level_drawn", "cost"])
    for r, d in enumerate(s.draws):
        seed = ":".join(map(str, d.seed))
        for i in range(a.t):
            w.writerow(["draw", r, seed, i + 1, _f(d.value_phi[i]), _f(d.value_one[i]), d.level_drawn,
                        _f(d.cost_units)])
    for kind, phi_v, one_v in (("mean", s.mean_phi, s.mean_one), ("variance", s.var_phi, s.var_one)):
        for i in range(a.t):
            w.writerow([kind, "", a.seed, i + 1, _f(phi_v[i]), _f(one_v[i]), "", _f(s.total_cost)])
    if fh:
        fh.close()


def cmd_run_st(a) -> None:
    _randomized(a, "st")


def cmd_run_cs(a) -> None:
    _randomized(a, "cs")


def cmd_run_mlpf(a) -> None:
    model = builtin_model(a.model, a.obs_scale)
    path = load_path_csv(a.data)
    if a.nl:
        counts = [int(n) for n in a.nl.split(",")]
        L = len(counts) - 1 if a.levels is None else a.levels
    else:
        L, counts = allocate_levels(a.epsilon, model.sigma_constant, a.n_scale)
        if a.levels is not None and a.levels != L:
            raise SystemExit(f"--levels {a.levels} disagrees with the level {L} implied by --epsilon")
    o = mlpf_run(model, path, L, counts, a.t, a.policy, a.seed, a.phi)
    w, fh = _writer(a.out)
    w.writerow(["t", "eta_phi", "gamma_phi", "gamma_1", "level", "n_levels", "cost", "seed"])
    for i in range(a.t):
        w.writerow([i + 1, _f(o.eta_phi[i]), _f(o.gamma_phi[i]), _f(o.gamma_1[i]), L,
                    " ".join(map(str, counts)), _f(o.cost), a.seed])
    if fh:
        fh.close()


def cmd_oracle(a) -> None:
    model = builtin_model(a.model, a.obs_scale)
    path = load_path_csv(a.data)
    lg, g_id = kalman_log_gamma(linear_gaussian_spec(model, a.level), path, a.t)
    print(f"log_gamma_1 {_f(lg)}")
    print(f"posterior_mean {_f(g_id / math.exp(lg))}")


def cmd_benchmark(a) -> None:
    cfg = ExperimentConfig.load(a.config)
    for key in ("t", "runs", "seed"):
        if getattr(a, key) is not None:
            setattr(cfg, key, getattr(a, key))
    if a.output_dir is not None:
        cfg.output_dir = a.output_dir
    res = benchmark(cfg, a.workers)
    print(f"ground_truth {_f(res.ground_truth.value)} ({res.ground_truth.source})")
    for method in dict.fromkeys(r["method"] for r in res.summary):
        rows = [r for r in res.summary if r["method"] == method]
        if len(rows) >= 2:
            print(f"slope {method} {loglog_slope(res.summary, method):.4f}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unbiased-zakai", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate-data", help="simulate a pure-noise observation path and write it as CSV")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--horizon", type=int, required=True)
    s.add_argument("--level", type=int, required=True)
    s.add_argument("--d-y", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate_data)

    def common(sp, level=True):
        sp.add_argument("--model", type=_model_name, default="OU")
        sp.add_argument("--obs-scale", type=float, default=1.0)
        sp.add_argument("--data", required=True)
        if level:
            sp.add_argument("--level", type=int, required=True)
        sp.add_argument("--t", type=int, required=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--policy", default="ess:0.25")
        sp.add_argument("--phi", choices=["identity", "one"], default="identity")
        sp.add_argument("--out", default="-")

    s = sub.add_parser("run-pf", help="one particle filter run")
    common(s)
    s.add_argument("--particles", type=int, required=True)
    s.set_defaults(func=cmd_run_pf)

    for name, fn in (("run-st", cmd_run_st), ("run-cs", cmd_run_cs)):
        s = sub.add_parser(name, help=f"{'single-term' if name == 'run-st' else 'coupled-sum'} estimator")
        common(s, level=False)
        s.add_argument("--dist", choices=["const", "nonconst"], required=True)
        s.add_argument("--alpha", type=float, default=0.25)
        s.add_argument("--lmax", type=int, required=True)
        s.add_argument("--particles", type=int, required=True)
        s.add_argument("--replicates", type=int, required=True)
        s.add_argument("--workers", type=int, default=1)
        s.set_defaults(func=fn)

    s = sub.add_parser("run-mlpf", help="one multilevel particle filter run")
    common(s, level=False)
    s.add_argument("--levels", type=int)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--nl", help="comma-separated particle counts N_0,...,N_L")
    s.add_argument("--n-scale", type=float, default=1.0)
    s.set_defaults(func=cmd_run_mlpf)

    s = sub.add_parser("oracle", help="exact discretized log gamma_t(1) and posterior mean (OU only)")
    s.add_argument("--data", required=True)
    s.add_argument("--level", type=int, required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--model", type=_model_name, default="OU")
    s.add_argument("--obs-scale", type=float, default=1.0)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("benchmark", help="cost versus MSE sweep from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--t", type=int)
    s.add_argument("--runs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except DegeneracyError as exc:
        print(f"degeneracy error: {exc}", file=sys.stderr)
        return 3
    except (ZakaiError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
