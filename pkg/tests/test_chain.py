"""Layer-1 chain: mempool, blocks, fees, conservation."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lazyc.chain import (OVER_CAP, REJECTED, TARGET_UNKNOWN, ChainState, Transaction,
                         parse_genesis)
from lazyc.errors import MalformedTransaction
from lazyc.gas import DEFAULT_SCHEDULE, intrinsic_gas

from helpers import contract, template

# runs exactly `n` cheap local steps; used to pin gas_used precisely
BURN = """
contract Burn {
    function burn(uint n) {
        uint i = 0;
        while (i < n) {
            i = i + 1;
        }
    }
}
"""


def burn_gas(n, tx):
    """VM gas of Burn.burn(n) plus intrinsic gas of ``tx``."""
    s = DEFAULT_SCHEDULE
    decl = s.local_read + s.local_write
    check = s.loop_iteration_overhead + 2 * s.local_read + s.compare_op
    body = 2 * s.local_read + s.arith_op + s.local_write
    return intrinsic_gas(tx.payload_bytes()) + decl + (n + 1) * check + n * body


def burn_chain():
    ch = ChainState()
    ch.mint("Alice", 1_000_000)
    ch.deploy_eager([contract(BURN)])
    return ch


def test_ids_are_fifo():
    ch = ChainState()
    assert ch.submit_tx(Transaction("A", "X", "f")) == 0
    assert ch.submit_tx(Transaction("A", "X", "f")) == 1


def test_malformed_rejected_at_submit():
    ch = ChainState()
    with pytest.raises(MalformedTransaction):
        ch.submit_tx(Transaction("", "X", "f"))
    with pytest.raises(MalformedTransaction):
        ch.submit_tx(Transaction("A", "X", "f", value=-1))
    with pytest.raises(MalformedTransaction):
        ch.submit_tx(Transaction("A", "X", "f", args=(object(),)))


def test_unknown_target_fails_at_mining():
    ch = ChainState()
    ch.mint("A", 10**7)
    ch.submit_tx(Transaction("A", "Nowhere", "f"))
    (r,) = ch.mine_block().txs
    assert r.outcome == TARGET_UNKNOWN
    assert ch.conservation_violations() == []


def test_empty_block_advances_height():
    ch = ChainState(height=41)
    br = ch.mine_block()
    assert br.txs == [] and ch.height == 42 == br.height


def test_over_cap_is_flagged_and_dropped():
    ch = ChainState()
    ch.mint("A", 10**9)
    ch.submit_tx(Transaction("A", "L", "join", gas_limit=31_000_000))
    br = ch.mine_block()
    assert [t.outcome for t in br.txs] == [OVER_CAP]
    assert ch.mempool == []
    assert ch.account_balance("A") == 10**9


def test_deferral_respects_remaining_cap():
    ch = ChainState(block_gas_cap=100_000)
    ch.mint("A", 10**9)
    ch.deploy_eager([contract(BURN)])
    for _ in range(3):
        ch.submit_tx(Transaction("A", "Burn", "burn", (1,), gas_limit=60_000))
    # the cap shrinks by gas actually used, so two fit and the third waits
    b1 = ch.mine_block()
    assert [t.id for t in b1.txs] == [0, 1]
    assert b1.deferred == [2] and len(ch.mempool) == 1
    b2 = ch.mine_block()
    assert [t.id for t in b2.txs] == [2]


def test_rejected_when_deposit_unaffordable():
    ch = burn_chain()
    ch.submit_tx(Transaction("Bob", "Burn", "burn", (1,), gas_limit=30_000, gas_price=2))
    (r,) = ch.mine_block().txs
    assert r.outcome == REJECTED and r.fee == 0


def test_fee_matches_metered_gas():
    ch = burn_chain()
    tx = Transaction("Alice", "Burn", "burn", (150,), gas_limit=30_000, gas_price=2)
    before = ch.account_balance("Alice")
    ch.submit_tx(tx)
    (r,) = ch.mine_block().txs
    assert r.outcome == "Success"
    assert r.gas_used == burn_gas(150, tx) < 30_000
    assert r.fee == r.gas_used * 2
    assert before - ch.account_balance("Alice") == r.fee
    assert ch.fee_sink == r.fee
    assert ch.conservation_violations() == []


def test_fee_example_exact_numbers():
    # g = 25,000, g_m = 30,000, pi = 2: net debit 50,000, refund 10,000
    sched = DEFAULT_SCHEDULE.with_overrides(flat_tx_gas=25_000)
    from lazyc.wrap import LazyParams, wrap_contract
    ch = ChainState(schedule=sched)
    ch.mint("Alice", 1_000_000)
    ch.deploy_lazy(wrap_contract([template("counter")], LazyParams(deposit=10, window=5)))
    ch.submit_tx(Transaction("Alice", "L", "join", (), 10, gas_limit=30_000, gas_price=2))
    (r,) = ch.mine_block().txs
    assert r.outcome == "Success" and r.gas_used == 25_000
    assert r.fee == 50_000
    deposit_taken = 30_000 * 2
    assert deposit_taken - r.fee == 10_000  # refunded
    assert ch.account_balance("Alice") == 1_000_000 - 50_000 - 10
    assert ch.fee_sink == 50_000


def test_out_of_gas_keeps_whole_deposit():
    ch = burn_chain()
    ch.submit_tx(Transaction("Alice", "Burn", "burn", (10**6,), gas_limit=40_000, gas_price=3))
    (r,) = ch.mine_block().txs
    assert r.outcome == "OutOfGas" and r.gas_used == 40_000 and r.fee == 120_000
    assert ch.account_balance("Alice") == 1_000_000 - 120_000


def test_revert_charges_used_gas_only():
    ch = ChainState()
    ch.mint("Alice", 10**6)
    ch.deploy_eager([template("example")])
    ch.submit_tx(Transaction("Alice", "Example", "cancel", gas_limit=100_000))
    (r,) = ch.mine_block().txs
    assert r.outcome == "Revert" and 0 < r.gas_used < 100_000
    assert ch.account_balance("Alice") == 10**6 - r.gas_used


def test_account_balance_reads():
    ch = ChainState()
    assert ch.account_balance("ghost") == 0
    ch.mint("Bob", 1_000_000)
    assert ch.account_balance("Bob") == 1_000_000


def test_genesis_parse():
    assert parse_genesis("# g\nBob 1_000\nAlice 5 # x\n") == [("Bob", 1000), ("Alice", 5)]
    with pytest.raises(ValueError):
        parse_genesis("Bob -3")


def test_receipts_json_fields():
    import json
    ch = burn_chain()
    ch.submit_tx(Transaction("Alice", "Burn", "burn", (1,)))
    ch.mine_block()
    rec = json.loads(ch.receipts_json())[0]
    assert set(rec) == {"height", "txs"}
    assert set(rec["txs"][0]) == {"id", "origin", "entry", "outcome", "gas_used", "fee"}


def _random_run(seed):
    rng = random.Random(seed)
    ch = ChainState(block_gas_cap=3_000_000)
    for p in ("A", "B", "C"):
        ch.mint(p, 10**8)
    ch.deploy_eager([template("escrow")])
    hashes = []
    for _ in range(8):
        for _ in range(rng.randrange(0, 5)):
            f = rng.choice(["fund", "refund", "tip", "claim"])
            args = {"fund": (), "refund": (rng.randrange(0, 20),),
                    "tip": (rng.choice("ABC"), rng.randrange(0, 5)),
                    "claim": (rng.randrange(0, 9),)}[f]
            value = rng.randrange(1, 50) if f == "fund" else 0
            ch.submit_tx(Transaction(rng.choice("ABC"), "Escrow", f, args, value,
                                     rng.choice([25_000, 200_000, 2_000_000]),
                                     rng.randrange(1, 4)))
        ch.mine_block()
        hashes.append(ch.state_hash())
        assert ch.conservation_violations() == []
    return hashes


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_conservation_and_determinism(seed):
    assert _random_run(seed) == _random_run(seed)
