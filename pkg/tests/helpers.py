"""Shared fixtures-as-functions for the test suite."""

from __future__ import annotations

from pathlib import Path

from lazyc.chain import ChainState, Transaction
from lazyc.gas import DEFAULT_SCHEDULE
from lazyc.mcl import parse, parse_file, validate
from lazyc.scenario import TEMPLATE_DIR, TEMPLATES
from lazyc.wrap import LazyParams, wrap_contract

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


def template(name: str):
    return parse_file(TEMPLATE_DIR / TEMPLATES[name])


def contract(src: str):
    return validate(parse(src))


def lazy(names=("example",), deposit=100_000, window=100, **kw):
    cs = [template(n) if isinstance(n, str) else n for n in names]
    return wrap_contract(cs, LazyParams(deposit=deposit, window=window, **kw))


class Net:
    """A chain with one lazy contract, driven one transaction per block."""

    def __init__(self, lc=None, schedule=DEFAULT_SCHEDULE, height=0, funds=10**12,
                 parties=("Alice", "Bob", "Carol", "Ingrid")):
        self.lc = lc or lazy()
        self.chain = ChainState(schedule=schedule, height=height)
        for p in parties:
            self.chain.mint(p, funds)
        self.st = self.chain.deploy_lazy(self.lc)

    def at(self, block, origin, entry, *args, value=0, gas=10**6, price=1):
        """Mine ``entry`` alone in block ``block``; returns its receipt."""
        assert block > self.chain.height, "blocks must increase"
        self.chain.height = block - 1
        self.chain.submit_tx(Transaction(origin, "L", entry, tuple(args), value, gas, price))
        (r,) = self.chain.mine_block().txs
        return r

    def ok(self, block, origin, entry, *args, **kw):
        r = self.at(block, origin, entry, *args, **kw)
        assert r.outcome == "Success", (entry, r.error)
        return r

    def join(self, block, *names):
        for i, n in enumerate(names):
            self.ok(block + i, n, "join", value=self.lc.params.deposit)
