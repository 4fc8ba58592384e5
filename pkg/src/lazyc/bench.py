"""Eager-vs-lazy gas comparison on synthetic workloads.

A workload is a deterministic list of calls against one template contract.
``run_benchmark`` replays the same calls on two fresh chains: once against
the contract deployed as-is (every call executes on-chain) and once against
its lazy wrapper (every call is only appended to the ledger).
"""

from __future__ import annotations

import json
import random
import statistics
from dataclasses import asdict, dataclass, field

from lazyc.chain import ChainState, Transaction
from lazyc.gas import DEFAULT_SCHEDULE, GasSchedule
from lazyc.mcl import parse_file
from lazyc.scenario import TEMPLATE_DIR, TEMPLATES
from lazyc.wrap import LazyParams, wrap_contract

SENDERS = ("Bob", "Alice", "Carol")
TX_HEADROOM = 100_000
FUNDING = 10**15


@dataclass(frozen=True)
class WorkloadCall:
    sender: str
    fname: str
    args: tuple
    payment: int
    g_m: int


@dataclass(frozen=True)
class Workload:
    template: str
    seed: int
    calls: tuple
    iterations: int = 0

    @property
    def senders(self) -> tuple:
        return tuple(sorted({c.sender for c in self.calls}))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _counter(rng, n, _it):
    out = []
    for _ in range(n):
        who = rng.choice(SENDERS)
        r = rng.random()
        if r < 0.7:
            out.append(WorkloadCall(who, "inc", (), 0, 100_000))
        elif r < 0.9:
            out.append(WorkloadCall(who, "add", (rng.randrange(1, 1000),), 0, 100_000))
        else:
            out.append(WorkloadCall(who, "reset", (), 0, 100_000))
    return out


def _escrow(rng, n, _it):
    out = []
    for i in range(n):
        who = rng.choice(SENDERS)
        r = rng.random()
        if i == 0:
            out.append(WorkloadCall("Bob", "start", (rng.randrange(1, 2**32),), 100, 200_000))
        elif r < 0.35:
            out.append(WorkloadCall(who, "fund", (), rng.randrange(1, 50), 200_000))
        elif r < 0.55:
            out.append(WorkloadCall(who, "refund", (rng.randrange(0, 30),), 0, 200_000))
        elif r < 0.75:
            out.append(WorkloadCall(who, "getReward", (rng.randrange(0, 10**6),), 0, 200_000))
        elif r < 0.9:
            out.append(WorkloadCall(who, "claim", (rng.randrange(0, 100),), 0, 200_000))
        else:
            to = rng.choice(SENDERS)
            out.append(WorkloadCall(who, "tip", (to, rng.randrange(0, 20)), 0, 200_000))
    return out


def _loop_heavy(rng, n, iterations):
    g_m = 10_000 * iterations + TX_HEADROOM
    return [WorkloadCall(rng.choice(SENDERS), "work", (iterations,), 0, g_m) for _ in range(n)]


def _map_writer(rng, n, _it):
    out = []
    for _ in range(n):
        who = rng.choice(SENDERS)
        target = rng.choice(SENDERS)
        r = rng.random()
        if r < 0.5:
            out.append(WorkloadCall(who, "set", (target, rng.randrange(0, 100)), 0, 200_000))
        elif r < 0.85:
            out.append(WorkloadCall(who, "bump", (target,), 0, 200_000))
        else:
            out.append(WorkloadCall(who, "clear", (target,), 0, 200_000))
    return out


_GENERATORS = {"counter": _counter, "escrow": _escrow, "loop_heavy": _loop_heavy,
               "map_writer": _map_writer}


def canonical_template(name: str) -> str:
    key = name.replace("-", "_")
    if key not in _GENERATORS:
        raise ValueError(f"unknown template {name!r}; known: {sorted(_GENERATORS)}")
    return key


def generate_workload(seed: int, template: str, n_calls: int, iterations: int = 1000) -> Workload:
    """Deterministic call mix for ``template`` drawn from ``seed``."""
    key = canonical_template(template)
    if n_calls < 0:
        raise ValueError("n_calls must be >= 0")
    rng = random.Random(f"{key}:{seed}")
    calls = tuple(_GENERATORS[key](rng, n_calls, iterations))
    return Workload(key, seed, calls, iterations if key == "loop_heavy" else 0)


@dataclass
class GasReport:
    records: list
    totals: dict
    saving_percent: float
    undefined: bool = False
    mean_saving_percent: float = 0.0
    median_saving_percent: float = 0.0
    verdicts: list = field(default_factory=list)
    seed: int = 0
    template: str = ""
    n_calls: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _saving(lazy: int, eager: int) -> float:
    return 100.0 * (1.0 - lazy / eager)


def _drain(chain: ChainState) -> list:
    receipts = []
    while chain.mempool:
        receipts.extend(chain.mine_block().txs)
    return receipts


def run_benchmark(workload: Workload, schedule: GasSchedule = DEFAULT_SCHEDULE,
                  gas_price: int = 1) -> GasReport:
    vc = parse_file(TEMPLATE_DIR / TEMPLATES[workload.template])
    name = vc.name
    senders = workload.senders

    # eager leg: the contract itself, called directly
    eager = ChainState(schedule=schedule)
    for s in senders:
        eager.mint(s, FUNDING)
    eager.deploy_eager([vc])
    for c in workload.calls:
        eager.submit_tx(Transaction(c.sender, name, c.fname, c.args, c.payment,
                                    c.g_m + TX_HEADROOM, gas_price))
    eager_rx = _drain(eager)

    # lazy leg: join, fund L-balances, then append the same calls
    params = LazyParams(deposit=100_000, window=100)
    lazy = ChainState(schedule=schedule)
    for s in senders:
        lazy.mint(s, FUNDING)
    lazy.deploy_lazy(wrap_contract([vc], params))
    setup = 0
    for s in senders:
        lazy.submit_tx(Transaction(s, "L", "join", (), params.deposit, TX_HEADROOM * 10, gas_price))
        setup += 1
        paid = sum(c.payment for c in workload.calls if c.sender == s)
        if paid:
            lazy.submit_tx(Transaction(s, "L", "depositEther", (), paid, TX_HEADROOM * 10,
                                       gas_price))
            setup += 1
    for c in workload.calls:
        lazy.submit_tx(Transaction(c.sender, "L", "requestCall",
                                   (c.fname, c.g_m, c.payment, list(c.args)), 0,
                                   TX_HEADROOM * 10, gas_price))
    lazy_rx = _drain(lazy)
    for r in lazy_rx:
        if r.outcome != "Success":
            raise RuntimeError(f"lazy benchmark tx failed: {r.entry} {r.error}")

    records = [{"entry": r.entry, "gas_eager": 0, "gas_lazy": r.gas_used}
               for r in lazy_rx[:setup]]
    calls = sorted(eager_rx, key=lambda r: r.id)
    for er, lr in zip(calls, lazy_rx[setup:]):
        records.append({"entry": er.entry, "gas_eager": er.gas_used, "gas_lazy": lr.gas_used})
    total_eager = sum(r["gas_eager"] for r in records)
    total_lazy = sum(r["gas_lazy"] for r in records)
    per_call = [_saving(r["gas_lazy"], r["gas_eager"]) for r in records if r["gas_eager"]]
    if not workload.calls or total_eager == 0:
        saving, undefined = 0.0, True
    else:
        saving, undefined = _saving(total_lazy, total_eager), False
    return GasReport(
        records=records,
        totals={"gas_eager": total_eager, "gas_lazy": total_lazy},
        saving_percent=saving,
        undefined=undefined,
        mean_saving_percent=statistics.fmean(per_call) if per_call else 0.0,
        median_saving_percent=statistics.median(per_call) if per_call else 0.0,
        seed=workload.seed,
        template=workload.template,
        n_calls=len(workload.calls),
    )
