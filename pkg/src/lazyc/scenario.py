"""Scenario scripts: parse, run block by block, and report.

Format (one item per line, ``#`` comments)::

    param deposit 100000          # LazyParams fields, run settings, gas.<key>
    genesis Bob 1000000
    contract example              # template name, builtin:<name>, or a path
    party Bob Honest              # Honest | Passive | OverWithdrawer:n | ...
    @block 12100 Bob join
    @block 12100 Bob deposit 100
    @block 12100 Bob requestCall start 30000 100 111

Arguments are integers, ``true``/``false``, ``@Name`` addresses, or bare
words (function names).  In each block, scripted transactions go first (in
file order), then every reactive party's transactions in cast order; a
party only sees the chain as of the end of the previous block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from lazyc.chain import ChainState
from lazyc.encoding import payload_size
from lazyc.errors import InvariantViolation, LazycError, ScenarioParseError
from lazyc.gas import DEFAULT_SCHEDULE, GasSchedule, intrinsic_gas
from lazyc.mcl import parse_file
from lazyc.party import Observation, Party, Strategy
from lazyc.protocol import CallRequest, Checkpoint, WithdrawRequest, entry_record, replay_entry
from lazyc.vm import CallEnv, Outcome, execute_call
from lazyc.wrap import LazyParams, wrap_contract

TEMPLATE_DIR = Path(__file__).parent / "templates"
TEMPLATES = {"counter": "counter.mcl", "escrow": "escrow.mcl", "example": "example.mcl",
             "loop_heavy": "loop_heavy.mcl", "loop-heavy": "loop_heavy.mcl",
             "map_writer": "map_writer.mcl", "map-writer": "map_writer.mcl"}

_LAZY_KEYS = {f.name for f in fields(LazyParams)}
_RUN_KEYS = {"seed", "start_block", "end_block", "gas_price", "tx_gas", "hasher", "address"}


@dataclass
class Directive:
    block: int
    party: str
    action: str
    args: list
    line: int = 0


@dataclass
class Scenario:
    params: LazyParams
    genesis: list
    contracts: list
    cast: dict
    timeline: list
    schedule: GasSchedule = DEFAULT_SCHEDULE
    seed: int = 0
    start_block: int = 0
    end_block: Optional[int] = None
    gas_price: int = 1
    tx_gas: int = 1_000_000
    hasher: str = "sha3_256"
    address: str = "L"
    path: Optional[str] = None
    lazy: object = field(default=None, repr=False)


def resolve_contract_path(spec: str, base: Path) -> Path:
    name = spec[len("builtin:"):] if spec.startswith("builtin:") else spec
    if name in TEMPLATES:
        return TEMPLATE_DIR / TEMPLATES[name]
    p = Path(spec)
    return p if p.is_absolute() else base / p


def parse_value(tok: str):
    if tok.startswith("@"):
        return tok[1:]
    if tok == "true":
        return True
    if tok == "false":
        return False
    try:
        return int(tok.replace("_", ""), 0)
    except ValueError:
        return tok


def parse_scenario(text: str, base: Path | str = ".", path: str | None = None) -> Scenario:
    base = Path(base)
    lazy_kw, run_kw, gas_kw = {}, {}, {}
    genesis, contracts, cast, timeline = [], [], {}, []

    def fail(lineno, msg):
        raise ScenarioParseError(f"{path or '<scenario>'}:{lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0]
        if head == "param":
            if len(toks) != 3:
                fail(lineno, "expected 'param key value'")
            key, val = toks[1], toks[2]
            if key.startswith("gas."):
                try:
                    gas_kw[key[4:]] = int(val.replace("_", ""))
                except ValueError:
                    fail(lineno, f"gas cost {val!r} is not an integer")
            elif key in _LAZY_KEYS:
                lazy_kw[key] = None if val == "none" else _int(val, lineno, fail)
            elif key in _RUN_KEYS:
                run_kw[key] = val if key in ("hasher", "address") else _int(val, lineno, fail)
            else:
                fail(lineno, f"unknown param {key!r}")
        elif head == "genesis":
            if len(toks) != 3:
                fail(lineno, "expected 'genesis address amount'")
            genesis.append((toks[1].lstrip("@"), _int(toks[2], lineno, fail)))
        elif head == "contract":
            if len(toks) != 2:
                fail(lineno, "expected 'contract path'")
            contracts.append(str(resolve_contract_path(toks[1], base)))
        elif head == "party":
            if len(toks) not in (2, 3):
                fail(lineno, "expected 'party name strategy'")
            try:
                cast[toks[1]] = Strategy.parse(toks[2] if len(toks) == 3 else "Honest")
            except ValueError as exc:
                fail(lineno, str(exc))
        elif head == "@block":
            if len(toks) < 4:
                fail(lineno, "expected '@block N party action args...'")
            n = _int(toks[1], lineno, fail)
            if timeline and n < timeline[-1].block:
                fail(lineno, f"block {n} comes before block {timeline[-1].block}")
            timeline.append(Directive(n, toks[2], toks[3], [parse_value(t) for t in toks[4:]],
                                      lineno))
        else:
            fail(lineno, f"unknown directive {head!r}")

    for d in timeline:
        if d.party not in cast:
            fail(d.line, f"unknown party {d.party!r}")
    if "deposit" not in lazy_kw or "window" not in lazy_kw:
        raise ScenarioParseError("scenario must set 'param deposit' and 'param window'")
    if not contracts:
        raise ScenarioParseError("scenario names no contract")
    try:
        schedule = DEFAULT_SCHEDULE.with_overrides(**gas_kw)
        params = LazyParams(**lazy_kw)
    except ValueError as exc:
        raise ScenarioParseError(str(exc)) from None
    sc = Scenario(params, genesis, contracts, cast, timeline, schedule, path=path, **run_kw)
    _load_contracts(sc)
    return sc


def _int(tok, lineno, fail):
    try:
        return int(tok.replace("_", ""), 0)
    except ValueError:
        fail(lineno, f"{tok!r} is not an integer")


def _load_contracts(sc: Scenario) -> None:
    validated = []
    for p in sc.contracts:
        try:
            validated.append(parse_file(p))
        except OSError as exc:
            raise ScenarioParseError(f"cannot read contract {p}: {exc}") from None
        except LazycError as exc:
            raise ScenarioParseError(f"{p}: {exc}") from None
    try:
        sc.lazy = wrap_contract(validated, sc.params)
    except LazycError as exc:
        raise ScenarioParseError(f"cannot wrap contracts: {exc}") from None
    for d in sc.timeline:
        if d.action in ("call", "requestCall"):
            if len(d.args) < 3:
                raise ScenarioParseError(
                    f"line {d.line}: requestCall needs fname g_m payment [args...]")
            if sc.lazy.qualify(str(d.args[0])) is None:
                raise ScenarioParseError(f"line {d.line}: unknown function {d.args[0]!r}")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario(text, path.parent, str(path))


# --- running -------------------------------------------------------------------


@dataclass
class ScenarioResult:
    scenario: Scenario
    chain: ChainState
    state: object
    parties: dict
    trace: list
    report: dict
    violations: list

    @property
    def verdicts(self) -> list:
        return self.report["verdicts"]

    def trace_ndjson(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, default=_jsonable) + "\n" for r in self.trace)

    def report_json(self) -> str:
        return json.dumps(self.report, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (set, frozenset, tuple)):
        return sorted(o) if isinstance(o, (set, frozenset)) else list(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _mutable_flags(e) -> tuple:
    if isinstance(e, WithdrawRequest):
        return (e.challenged, e.paid, e.voided, e.challenger)
    if isinstance(e, Checkpoint):
        return (e.challenged, e.invalid, e.challenger)
    return ()


def run_scenario(scenario, seed: int | None = None, strict: bool = True,
                 max_idle: int | None = None) -> ScenarioResult:
    """Execute a scenario; with ``strict`` an auditor violation raises InvariantViolation."""
    sc = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    if seed is not None:
        sc.seed = seed
    lc = sc.lazy
    t = sc.params.window
    chain = ChainState(sc.params.block_gas_cap, sc.schedule, height=sc.start_block)
    for addr, amt in sc.genesis:
        chain.mint(addr, amt)
    st = chain.deploy_lazy(lc, sc.address, sc.hasher)
    parties = {name: Party(name, strat, lc, sc.schedule, sc.hasher, sc.gas_price, sc.address,
                           sc.tx_gas) for name, strat in sc.cast.items()}
    start_accounts = {n: chain.account_balance(n) for n in parties}
    by_block: dict = {}
    for d in sc.timeline:
        by_block.setdefault(d.block, []).append(d)
    last = sc.timeline[-1].block if sc.timeline else chain.height
    idle_limit = max_idle if max_idle is not None else 2 * t + 2
    cap = (sc.end_block if sc.end_block is not None else last + 50 * t)

    trace: list = []
    violations: list = []
    seen_entries = 0
    seen_events = 0
    flags: dict = {}
    fees_nonsim = {n: 0 for n in parties}
    idle = 0
    n = chain.height + 1
    if not sc.timeline and sc.end_block is None:
        cap = chain.height  # nothing to do
    while n <= cap:
        for p in parties.values():
            p.observe(Observation(n, st, chain.account_balance(p.name)))
        txs: list = []
        for d in by_block.get(n, ()):
            p = parties[d.party]
            mine = [x for x in txs if x.origin == d.party]
            txs.extend(p.directive(d.action, list(d.args), Observation(n, st, None), mine))
        order = list(parties.values())
        for p in order:
            txs.extend(p.step(Observation(n, st, chain.account_balance(p.name))))
        for tx in txs:
            chain.submit_tx(tx)
        receipt = chain.mine_block()
        for r in receipt.txs:
            if r.origin in fees_nonsim and r.entry != "simulate":
                fees_nonsim[r.origin] += r.fee
            trace.append({"type": "tx", "block": n, "id": r.id, "origin": r.origin,
                          "entry": r.entry, "args": list(r.args), "value": r.value,
                          "outcome": r.outcome, "gas_used": r.gas_used, "fee": r.fee,
                          "payout": r.payout, "error": r.error})
        while seen_entries < len(st.ledger):
            e = st.ledger[seen_entries]
            trace.append({"type": "entry", "block": n, **entry_record(e)})
            flags[e.index] = _mutable_flags(e)
            seen_entries += 1
        for e in st.ledger:
            if e.kind in ("WithdrawRequest", "Checkpoint"):
                fl = _mutable_flags(e)
                if flags.get(e.index) != fl:
                    flags[e.index] = fl
                    trace.append({"type": "entry_update", "block": n, **entry_record(e)})
        while seen_events < len(st.events):
            trace.append({"type": "event", **st.events[seen_events]})
            seen_events += 1
        bad = chain.conservation_violations()
        if bad:
            violations.extend(f"block {n}: {v}" for v in bad)
            if strict:
                raise InvariantViolation("; ".join(violations))
        if receipt.txs or chain.mempool:
            idle = 0
        else:
            idle += 1
        if sc.end_block is None and n >= last and idle >= idle_limit:
            break
        n += 1

    report = build_report(sc, chain, st, parties, trace, start_accounts, fees_nonsim, violations)
    report["seed"] = sc.seed
    return ScenarioResult(sc, chain, st, parties, trace, report, violations)


def eager_call_gas(lc, e: CallRequest, schedule: GasSchedule, hasher: str,
                   storage: dict, balances: dict):
    """Gas of running the original call directly on-chain, and the resulting state."""
    cname, fname = e.fname.split(".", 1)
    f = lc.contract(cname).function(fname)
    base = intrinsic_gas(payload_size(fname, list(e.args)), schedule)
    env = CallEnv(e.party, e.payment, e.snapshot.get("block.number", e.block), 10**12)
    r = execute_call(storage, f, list(e.args), env, balances, schedule=schedule, this=cname,
                     program=lc.eager_program(), hasher=hasher)
    if r.outcome is Outcome.SUCCESS:
        return base + r.gas_used, r.storage_after, {k: v for k, v in r.balances_after.items() if v}
    return base + r.gas_used, storage, balances


def build_report(sc, chain, st, parties, trace, start_accounts, fees_nonsim, violations) -> dict:
    lc = sc.lazy
    txs = [r for r in trace if r["type"] == "tx"]
    records = [{"id": r["id"], "entry": r["entry"], "gas_lazy": r["gas_used"], "gas_eager": 0}
               for r in txs]
    # every successful requestCall appended exactly one CallRequest, in order
    call_ids = [r["id"] for r in txs if r["entry"] == "requestCall" and r["outcome"] == "Success"]
    eager = _eager_gas_per_call(sc, st)
    by_id = {r["id"]: r for r in records}
    for tid, g in zip(call_ids, eager):
        by_id[tid]["gas_eager"] = g

    total_lazy = sum(r["gas_lazy"] for r in records)
    total_eager = sum(r["gas_eager"] for r in records)
    verdicts = [{"dispute": j, "kind": d.kind, "dishonest": d.dishonest, "charged": d.charged,
                 "gamma": dict(sorted(d.gamma.items())), "timed_out": list(d.timed_out),
                 "resolved_block": d.resolved_block}
                for j, d in sorted(st.disputes.items()) if d.resolved]
    slashed = sorted({v["dishonest"] for v in verdicts}
                     | {p for d in st.disputes.values() for p in d.timed_out})
    view = _reference_replica(parties, st)
    flows = _contract_flows(sc, st)
    net = {}
    for name in parties:
        receivable = sum(e.amount for e in st.ledger if isinstance(e, WithdrawRequest)
                         and e.party == name and not e.paid)
        b_now = view.balance(name) if view is not None else 0
        wealth = (chain.account_balance(name) + st.deposit_remaining.get(name, 0)
                  + st.claims.get(name, 0) + receivable + b_now)
        net[name] = wealth - start_accounts[name] + fees_nonsim[name] - flows.get(name, 0)
    return {
        "records": records,
        "totals": {"gas_lazy": total_lazy, "gas_eager": total_eager},
        "verdicts": verdicts,
        "slashed": slashed,
        "deviants": sorted(n for n, p in parties.items() if p.strategy.deviant),
        "net_currency": net,
        "gamma": dict(sorted(st.gamma.items())),
        "claims_outstanding": dict(sorted(st.claims.items())),
        "simulate_txs": sum(1 for r in txs if r["entry"] == "simulate"),
        "final_height": chain.height,
        "ledger_length": len(st.ledger),
        "sim_cursor": st.sim_cursor,
        "violations": list(violations),
    }


def _eager_gas_per_call(sc, st) -> list:
    """Gas each call request would have cost run directly on the unwrapped contract."""
    lc = sc.lazy
    program = lc.eager_program()
    storage, bal = lc.initial_storage(), {}
    out = []
    for e in st.ledger:
        if isinstance(e, CallRequest):
            cname, fname = e.fname.split(".", 1)
            f = lc.contract(cname).function(fname)
            base = intrinsic_gas(payload_size(fname, list(e.args)), sc.schedule)
            env = CallEnv(e.party, e.payment, e.snapshot.get("block.number", e.block), 10**12)
            if e.payment > bal.get(e.party, 0):
                out.append(base)
                continue
            r = execute_call(storage, f, list(e.args), env, bal, schedule=sc.schedule,
                             this=cname, program=program, hasher=sc.hasher)
            out.append(base + r.gas_used)
            if r.outcome is Outcome.SUCCESS:
                storage = r.storage_after
                bal = {k: v for k, v in r.balances_after.items() if v}
        elif e.kind == "Deposit":
            bal = {**bal, e.party: bal.get(e.party, 0) + e.amount}
        elif isinstance(e, WithdrawRequest) and bal.get(e.party, 0) >= e.amount:
            bal = {**bal, e.party: bal[e.party] - e.amount}
    return out


def _reference_replica(parties, st):
    for p in parties.values():
        if p.replica.next_index > len(st.ledger):
            return p.replica
    return None


def _contract_flows(sc, st) -> dict:
    """Net L-balance change per party caused by call requests (economic activity)."""
    lc = sc.lazy
    program = lc.lazy_program()
    storage, b = lc.initial_storage(), {}
    flows: dict = {}
    for e in st.ledger:
        step = replay_entry(lc, program, storage, b, e, sc.schedule, sc.hasher)
        if isinstance(e, CallRequest):
            for p in set(b) | set(step.b):
                d = step.b.get(p, 0) - b.get(p, 0)
                if d:
                    flows[p] = flows.get(p, 0) + d
        storage, b = step.storage, step.b
    return flows
