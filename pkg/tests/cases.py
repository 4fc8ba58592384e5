"""Random (template, state, args, globals) call cases."""

from __future__ import annotations

import random

from lazyc.mcl import ast as A
from lazyc.vm import initial_storage

from helpers import template

PARTIES = ("Alice", "Bob", "Carol", "Ingrid")
TEMPLATES = ("counter", "escrow", "example", "loop_heavy", "map_writer")
EDGE = (0, 1, 2, 7, 100, 2**255, 2**256 - 2, 2**256 - 1)


def rand_uint(rng: random.Random, small: bool = False) -> int:
    r = rng.random()
    if small or r < 0.6:
        return rng.randrange(0, 200)
    if r < 0.8:
        return rng.choice(EDGE)
    return rng.randrange(0, 2**256)


def rand_value(rng, typ):
    if typ == A.UINT:
        return rand_uint(rng)
    if typ == A.BOOL:
        return rng.random() < 0.5
    if typ == A.ADDRESS:
        return rng.choice(PARTIES)
    raise ValueError(typ)


def rand_storage(rng, c: A.ContractDef) -> dict:
    st = initial_storage(c)
    for v in c.state_vars:
        if rng.random() < 0.3:
            continue  # keep the initializer
        if v.type == A.MAP:
            st[v.name] = {p: rand_uint(rng) for p in PARTIES if rng.random() < 0.5}
            st[v.name] = {k: x for k, x in st[v.name].items() if x}
        elif v.type == A.ADDRESS:
            st[v.name] = rng.choice(PARTIES + ("",))
        else:
            st[v.name] = rand_value(rng, v.type)
    return st


def rand_case(rng: random.Random, name: str | None = None) -> dict:
    name = name or rng.choice(TEMPLATES)
    vc = template(name)
    c = vc.contract
    f = rng.choice(c.functions)
    args = []
    for p in f.params:
        if name == "loop_heavy":
            args.append(rng.randrange(0, 40))
        else:
            args.append(rand_value(rng, p.type))
    bal = {p: rng.randrange(0, 500) for p in PARTIES if rng.random() < 0.8}
    if rng.random() < 0.7:
        bal[c.name] = rng.randrange(0, 500)
    value = 0
    if f.payable:
        value = rng.randrange(0, 300)
    return {
        "template": name, "vc": vc, "contract": c, "f": f, "args": args,
        "storage": rand_storage(rng, c), "balances": {k: v for k, v in bal.items() if v},
        "sender": rng.choice(PARTIES), "value": value, "block": rng.randrange(0, 10**6),
    }


def preservation_pair(case: dict, limit: int = 10**7):
    """Run a case as original code and as the rewritten replay of a request.

    Returns ``(eager, lazy)`` pairs of ``(outcome, storage, balances)`` where
    balances have zero entries dropped.
    """
    from lazyc.mcl import ast as A
    from lazyc.protocol import CallRequest, replay_entry
    from lazyc.vm import CallEnv, execute_call
    from lazyc.wrap import LazyParams, wrap_contract

    c = case["contract"]
    env = CallEnv(case["sender"], case["value"], case["block"], limit)
    if case["value"] > case["balances"].get(case["sender"], 0):
        eager = ("Revert", case["storage"], case["balances"])
    else:
        r = execute_call(case["storage"], case["f"], case["args"], env, case["balances"],
                         this=c.name)
        eager = (str(r.outcome), r.storage_after,
                 {k: v for k, v in r.balances_after.items() if v})

    lc = wrap_contract([case["vc"]], LazyParams(deposit=1, window=1))
    q = f"{c.name}.{case['f'].name}"
    globs = {A.BLOCK_NUMBER: case["block"], A.MSG_SENDER: case["sender"],
             A.MSG_VALUE: case["value"]}
    snap = {g: globs[g] for g in lc.snapshot_globals[q]}
    e = CallRequest(1, case["sender"], q, limit, tuple(case["args"]), case["value"], snap,
                    case["block"])
    step = replay_entry(lc, lc.lazy_program(), {c.name: case["storage"]}, case["balances"], e)
    outcome = {"Ignored": "Revert"}.get(step.outcome, step.outcome)
    lazy = (outcome, step.storage[c.name], {k: v for k, v in step.b.items() if v})
    return eager, lazy
