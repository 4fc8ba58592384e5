"""C to L rewriting, wrapping and the .lzc format."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lazyc.errors import AlreadyRewritten, ExternalCallError, NameCollision
from lazyc.mcl import ast as A
from lazyc.protocol import CallRequest, replay_entry
from lazyc.wrap import (LazyParams, from_lzc, load_lzc, rewrite_function, save_lzc, to_lzc,
                        wrap_contract)

from cases import TEMPLATES, preservation_pair, rand_case
from helpers import contract, lazy, template

VAULT = """
contract Vault {
    uint n;
    uint seen;
    function bump(uint x) {
        n += x;
        seen = block.number;
    }
}
"""
FRONT = """
contract Front {
    uint calls;
    function go(uint x) {
        calls += 1;
        Vault.bump(x);
    }
}
"""


def nodes(f):
    return list(A.walk(f))


class TestRewriteFunction:
    def test_start_gets_prologue_and_index(self):
        f = template("example").contract.function("start")
        g = rewrite_function(f)
        assert g.name == "L_start" and g.private and g.lazy
        assert [(p.name, p.type) for p in g.params] == [("k", "uint"), ("a", "uint")]
        p1, p2 = g.body[:2]
        assert p1 == A.Assign(A.LBalance(A.SelfAddr()), "+=", A.Snapshot(A.MSG_VALUE))
        assert p2 == A.Assign(A.LBalance(A.Snapshot(A.MSG_SENDER)), "-=",
                              A.Snapshot(A.MSG_VALUE))
        req = g.body[2]
        assert isinstance(req, A.Require)
        assert req.cond.left == A.Snapshot(A.MSG_SENDER)

    def test_get_reward_transfer_becomes_two_updates_inside_branch(self):
        g = rewrite_function(template("example").contract.function("getReward"))
        branch = g.body[2]
        assert isinstance(branch, A.If) and branch.orelse == ()
        (bt,) = branch.then
        assert isinstance(bt, A.BankTransfer)
        assert bt.amount == A.LBalance(A.SelfAddr())
        assert "b[recipient] += b[this];\n" in lazy().source()
        assert "b[this] -= b[this];" in lazy().source()

    def test_empty_body_only_gains_index(self):
        f = contract("contract E { function f(bool z) { } }").contract.function("f")
        g = rewrite_function(f)
        assert g.body == () and [p.name for p in g.params] == ["k", "z"]

    def test_index_name_avoids_params(self):
        f = contract("contract E { uint s; function f(uint k) { s = k; } }").contract.function("f")
        g = rewrite_function(f)
        assert [p.name for p in g.params] == ["k1", "k"]

    def test_rewriting_twice_is_rejected(self):
        g = rewrite_function(template("example").contract.function("cancel"))
        with pytest.raises(AlreadyRewritten):
            rewrite_function(g)

    @pytest.mark.parametrize("name", TEMPLATES)
    def test_no_raw_balance_transfer_or_globals_left(self, name):
        lc = lazy([name])
        for q, g in lc.rewritten_functions.items():
            bad = [n for n in nodes(g) if isinstance(n, (A.Global, A.BalanceOf, A.Transfer,
                                                         A.Call))]
            assert bad == []
            reads = {n.name for n in nodes(g) if isinstance(n, A.Snapshot)}
            assert reads <= lc.globals_usage[q]


class TestWrap:
    def test_example_bundle(self):
        lc = lazy(deposit=100_000, window=100)
        assert set(lc.rewritten_functions) == {"Example.start", "Example.getReward",
                                               "Example.cancel"}
        assert all(f.private for f in lc.rewritten_functions.values())
        assert lc.params.window == 100 and lc.params.deposit == 100_000
        assert lc.qualify("cancel") == "Example.cancel"

    def test_cross_contract_call_becomes_internal(self):
        lc = lazy([contract(VAULT), contract(FRONT)])
        go = lc.rewritten_functions["Front.go"]
        (call,) = [n for n in nodes(go) if isinstance(n, A.InternalCall)]
        assert (call.contract, call.fname) == ("Vault", "bump")
        # the callee reads block.number, so the caller's request records it
        assert A.BLOCK_NUMBER in lc.snapshot_globals["Front.go"]
        assert A.BLOCK_NUMBER not in lc.globals_usage["Front.go"]

    def test_cross_contract_replay_updates_callee(self):
        lc = lazy([contract(VAULT), contract(FRONT)])
        e = CallRequest(1, "Alice", "Front.go", 10**6, (7,), 0,
                        {A.BLOCK_NUMBER: 55, A.MSG_SENDER: "Alice"}, 55)
        step = replay_entry(lc, lc.lazy_program(), lc.initial_storage(), {}, e)
        assert step.outcome == "Success"
        assert step.storage == {"Vault": {"n": 7, "seen": 55}, "Front": {"calls": 1}}

    def test_call_outside_wrapped_set(self):
        with pytest.raises(ExternalCallError):
            lazy([contract(FRONT)])

    def test_call_to_missing_function(self):
        other = contract("contract Vault { function nope() { } }")
        with pytest.raises(ExternalCallError):
            lazy([other, contract(FRONT)])

    def test_duplicate_contract_names(self):
        with pytest.raises(NameCollision):
            lazy(["counter", "counter"])

    def test_rewritten_name_clash(self):
        c = contract("contract E { function f() { } function L_f() { } }")
        with pytest.raises(NameCollision):
            lazy([c])

    def test_empty_list(self):
        with pytest.raises(ValueError):
            wrap_contract([], LazyParams(1, 1))

    def test_deterministic(self):
        assert lazy(["escrow", "example"]) == lazy(["escrow", "example"])


class TestParams:
    @pytest.mark.parametrize("kw", [dict(deposit=0, window=1), dict(deposit=1, window=0),
                                    dict(deposit=1, window=1, max_gas_per_call=30_000_001),
                                    dict(deposit=1, window=1, checkpoint_interval=0),
                                    dict(deposit=1, window=1, max_call_count=-2)])
    def test_rejected(self, kw):
        with pytest.raises(ValueError):
            LazyParams(**kw)

    def test_dict_round_trip(self):
        p = LazyParams(5, 6, max_gas_per_call=7, checkpoint_interval=8)
        assert LazyParams.from_dict(p.as_dict()) == p


class TestLzc:
    def test_byte_stable(self):
        a = to_lzc(lazy(["escrow", "example"], checkpoint_interval=4))
        b = to_lzc(lazy(["escrow", "example"], checkpoint_interval=4))
        assert a == b and a.endswith("\n")

    def test_round_trip(self, tmp_path):
        lc = lazy(["escrow", "example"], max_gas_per_call=2_000_000)
        path = tmp_path / "out.lzc"
        save_lzc(lc, path)
        back = load_lzc(path)
        assert back == lc
        assert to_lzc(back) == path.read_text()

    def test_tampered_rewrite_detected(self):
        text = to_lzc(lazy())
        with pytest.raises(ValueError):
            from_lzc(text.replace('"L_cancel"', '"L_cancelled"'))

    def test_wrong_format(self):
        with pytest.raises(ValueError):
            from_lzc('{"format": "other"}')


# --- semantic preservation -------------------------------------------------------


@pytest.mark.parametrize("name", TEMPLATES)
def test_preservation_per_template(name):
    rng = random.Random(name)
    for _ in range(60):
        eager, lz = preservation_pair(rand_case(rng, name))
        assert eager == lz


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_preservation_property(seed):
    eager, lz = preservation_pair(rand_case(random.Random(seed)))
    assert eager == lz
