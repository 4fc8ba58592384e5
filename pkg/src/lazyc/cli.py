"""``lazyc`` command line.

Exit codes: 0 success, 1 usage or input error, 2 scenario error,
3 invariant violation detected during a run.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from lazyc.bench import generate_workload, run_benchmark
from lazyc.errors import InvariantViolation, LazycError, ScenarioParseError
from lazyc.gas import DEFAULT_SCHEDULE, load_schedule
from lazyc.mcl import parse_file
from lazyc.scenario import load_scenario, run_scenario
from lazyc.wrap import LazyParams, save_lzc, wrap_contract

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SCENARIO = 2
EXIT_INVARIANT = 3


def _err(msg: str) -> None:
    print(f"lazyc: {msg}", file=sys.stderr)


def cmd_transform(ns) -> int:
    try:
        contracts = [parse_file(p) for p in ns.sources]
        params = LazyParams(deposit=ns.deposit, window=ns.window,
                            max_gas_per_call=ns.max_call_gas,
                            checkpoint_interval=ns.checkpoint_every)
        lc = wrap_contract(contracts, params)
    except (OSError, ValueError, LazycError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    save_lzc(lc, ns.output)
    print(f"wrote {ns.output}: {len(lc.rewritten_functions)} functions")
    return EXIT_OK


def cmd_run(ns) -> int:
    try:
        sc = load_scenario(ns.scenario)
        res = run_scenario(sc, seed=ns.seed, strict=True)
    except ScenarioParseError as exc:
        _err(str(exc))
        return EXIT_SCENARIO
    except InvariantViolation as exc:
        _err(f"invariant violation: {exc}")
        return EXIT_INVARIANT
    if ns.trace:
        Path(ns.trace).write_text(res.trace_ndjson(), encoding="utf-8")
    if ns.report:
        Path(ns.report).write_text(res.report_json(), encoding="utf-8")
    else:
        sys.stdout.write(res.report_json())
    return EXIT_OK


def cmd_bench(ns) -> int:
    try:
        schedule = load_schedule(ns.schedule) if ns.schedule else DEFAULT_SCHEDULE
        wl = generate_workload(ns.seed, ns.template, ns.calls, ns.iterations)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    sys.stdout.write(run_benchmark(wl, schedule).to_json())
    return EXIT_OK


def cmd_check(ns) -> int:
    try:
        sc = load_scenario(ns.scenario)
    except ScenarioParseError as exc:
        _err(str(exc))
        return EXIT_SCENARIO
    print(f"{ns.scenario}: ok ({len(sc.cast)} parties, {len(sc.timeline)} directives, "
          f"{len(sc.lazy.rewritten_functions)} functions)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lazyc", description="Lazy smart-contract toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("transform", help="wrap .mcl contracts into a lazy contract (.lzc)")
    t.add_argument("sources", nargs="+")
    t.add_argument("--deposit", type=int, required=True)
    t.add_argument("--window", type=int, required=True)
    t.add_argument("--max-call-gas", type=int, default=None)
    t.add_argument("--checkpoint-every", type=int, default=None)
    t.add_argument("-o", "--output", required=True)
    t.set_defaults(func=cmd_transform)

    r = sub.add_parser("run", help="run a scenario script")
    r.add_argument("scenario")
    r.add_argument("--trace", help="write the NDJSON trace here")
    r.add_argument("--report", help="write the JSON report here (default: stdout)")
    r.add_argument("--seed", type=int, default=None)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="compare eager and lazy gas on a synthetic workload")
    b.add_argument("--template", required=True)
    b.add_argument("--calls", type=int, required=True)
    b.add_argument("--schedule", help="gas schedule file (key = value lines)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--iterations", type=int, default=1000, help="loop length for loop-heavy")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("check", help="parse and validate a scenario without running it")
    c.add_argument("scenario")
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
