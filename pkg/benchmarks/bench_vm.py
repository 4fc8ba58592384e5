"""Wall-clock comparison of the compiled and pure-Python interpreter kernels.

Runs ``Heavy.work(n)`` from the loop-heavy template and ``Escrow``-style
calls on each available backend, checks that both return identical results,
and prints the median time per call and the speedup.

    python3 benchmarks/bench_vm.py [--n 2000] [--repeat 15]
"""

from __future__ import annotations

import argparse
import statistics
import time

from lazyc import vm
from lazyc.mcl import parse_file
from lazyc.scenario import TEMPLATE_DIR
from lazyc.vm import CallEnv, execute_call, initial_storage


def time_backend(backend: str, contract, fname: str, args, repeat: int):
    f = contract.function(fname)
    storage = initial_storage(contract)
    env = CallEnv("Bob", gas_limit=10**9)
    samples, result = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = execute_call(storage, f, args, env, {}, this=contract.name, backend=backend)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples), result


def available_backends() -> list:
    out = ["python"]
    try:
        vm.kernel("cython")
        out.append("cython")
    except ImportError:
        pass
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="loop length for Heavy.work")
    ap.add_argument("--repeat", type=int, default=15)
    ns = ap.parse_args(argv)

    heavy = parse_file(TEMPLATE_DIR / "loop_heavy.mcl").contract
    counter = parse_file(TEMPLATE_DIR / "counter.mcl").contract
    cases = [("loop_heavy", heavy, "work", [ns.n]), ("counter", counter, "inc", [])]
    backends = available_backends()
    print(f"active backend: {vm.BACKEND}; measuring {', '.join(backends)}")
    for label, contract, fname, args in cases:
        times, results = {}, {}
        for b in backends:
            times[b], results[b] = time_backend(b, contract, fname, args, ns.repeat)
        ref = results["python"]
        for b in backends:
            r = results[b]
            same = (r.outcome, r.gas_used, r.storage_after) == (
                ref.outcome, ref.gas_used, ref.storage_after)
            print(f"{label:>10} {b:>7}: {times[b] * 1e3:9.3f} ms/call  "
                  f"gas={r.gas_used}  {'match' if same else 'MISMATCH'}")
        if "cython" in times:
            print(f"{label:>10} speedup: {times['python'] / times['cython']:.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
