"""Compare the compiled Euler kernels against the pure-Python fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat 5]``. Each row reports the
best wall time over ``--repeat`` runs for one workload on each backend, the
speedup, and whether the two backends produced bit-identical results.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from unbiased_zakai import builtin_model, cpf_run, pf_run, simulate_observation_path
from unbiased_zakai import _backend


def workloads(path):
    nld = builtin_model("NonlinearDiffusion")
    ou = builtin_model("OU")
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal((1000, 1))
    v = rng.standard_normal((1000, 64, 1)) / 8.0
    dyf, dyc = path.increments(6)[:64], path.increments(5)[:32]
    return {
        "propagate N=1000 K=64": lambda: _backend.propagate(nld, x0, v, dyf, 1 / 64),
        "propagate_coupled N=1000 K=64": lambda: _backend.propagate_coupled(nld, x0, x0, v, dyf, dyc, 1 / 64),
        "pf OU l=5 N=200 t=10": lambda: pf_run(ou, path, 5, 200, 10, "ess:0.25", 1).gamma_phi,
        "cpf NLD l=5 N=200 t=10": lambda: cpf_run(nld, path, 5, 200, 10, "ess:0.25", 1).gamma_diff,
    }


def _flat(result):
    if isinstance(result, tuple):
        return np.concatenate([np.ravel(r) for r in result])
    return np.ravel(result)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _backend.compiled_available():
        raise SystemExit("compiled extension not built; run `pip install --no-build-isolation -e .` first")
    path = simulate_observation_path(7, 10, 8)
    print(f"{'workload':34s} {'compiled s':>11s} {'python s':>11s} {'speedup':>8s}  identical")
    for name, fn in workloads(path).items():
        times, outputs = {}, {}
        for backend in ("compiled", "python"):
            _backend.set_backend(backend)
            outputs[backend] = _flat(fn())
            times[backend] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        _backend.set_backend("auto")
        same = np.array_equal(outputs["compiled"], outputs["python"])
        print(f"{name:34s} {times['compiled']:11.4f} {times['python']:11.4f} "
              f"{times['python'] / times['compiled']:8.1f}  {same}")


if __name__ == "__main__":
    main()
