"""Time the state-vector kernels under both backends.

    python3 benchmarks/bench_kernels.py [--repeat 50] [--json out.json]

Backends are switched in-process with ``use_backend``; numba compilation
happens in an untimed warm-up call and the best of ``repeat`` timings is kept.
"""
from __future__ import annotations

import argparse
import json
import math
import time

import numpy as np

from quditqaoa import _kernels
from quditqaoa.problems import bundled_coloring
from quditqaoa.qaoa import CircuitObjective, mixer_unitary

CASES = [(2, 12), (3, 6), (3, 9), (4, 6), (5, 5)]


def _time(fn, repeat: int) -> float:
    fn()  # warm-up / compile
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def kernel_cases(repeat: int) -> list[dict]:
    rows = []
    rng = np.random.default_rng(0)
    for dim, n in CASES:
        size = dim**n
        psi0 = rng.normal(size=size) + 1j * rng.normal(size=size)
        psi0 /= np.linalg.norm(psi0)
        values = rng.integers(0, 20, size).astype(np.float64)
        op = mixer_unitary(dim, 0.37)
        for name in ("numpy", "numba"):
            _kernels.use_backend(name)
            psi = psi0.copy()
            rows.append({
                "backend": name, "dim": dim, "qudits": n, "size": size,
                "phase_us": 1e6 * _time(lambda: _kernels.apply_phase(psi, values, 0.2), repeat),
                "mixer_us": 1e6 * _time(lambda: _kernels.apply_local_all(psi, op, dim, n), repeat),
                "expect_us": 1e6 * _time(lambda: _kernels.expectation(psi, values), repeat),
            })
    return rows


def objective_cases(repeat: int) -> list[dict]:
    diag = bundled_coloring().diagonal()
    rows = []
    for name in ("numpy", "numba"):
        _kernels.use_backend(name)
        obj = CircuitObjective(diag)
        for p in (1, 3, 5):
            x = np.linspace(0.1, 1.0, 2 * p)
            rows.append({"backend": name, "p": p, "eval_us": 1e6 * _time(lambda: obj(x), repeat)})
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba is not importable; only the numpy backend can run")
        return 1
    kernels, objective = kernel_cases(args.repeat), objective_cases(args.repeat)

    print(f"{'backend':8} {'d':>2} {'N':>3} {'d^N':>7} {'phase us':>10} {'mixer us':>10} {'expect us':>10}")
    for r in kernels:
        print(f"{r['backend']:8} {r['dim']:>2} {r['qudits']:>3} {r['size']:>7} "
              f"{r['phase_us']:>10.1f} {r['mixer_us']:>10.1f} {r['expect_us']:>10.1f}")
    print()
    print("bundled N=6 coloring, full objective evaluation")
    by = {(r["backend"], r["p"]): r["eval_us"] for r in objective}
    for p in (1, 3, 5):
        ratio = by[("numpy", p)] / by[("numba", p)]
        print(f"  p={p}: numpy {by[('numpy', p)]:8.1f} us   numba {by[('numba', p)]:8.1f} us   x{ratio:.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kernels": kernels, "objective": objective}, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
