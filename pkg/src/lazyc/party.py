"""Off-chain parties: eager replicas, fraud detection, and strategies.

Each party keeps a ``Replica`` of C's storage and every L-balance, applying
ledger entries as they appear with the same semantics as the on-chain
replay (metered against each request's g_m, because that decides the
outcome, but paying nothing).  A ``Strategy`` turns what the party saw at
the end of the previous block into transactions for the next one.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from lazyc.chain import Transaction
from lazyc.errors import GapInLedger, ReplicaBehind
from lazyc.gas import DEFAULT_SCHEDULE, GasSchedule
from lazyc.hashing import get_hasher, state_digest
from lazyc.mcl import ast as A
from lazyc.protocol import (CallRequest, Checkpoint, Deposit, LazyContractState,
                            WithdrawRequest, replay_entry)
from lazyc.vm import CallEnv, Outcome, execute_call

DEFAULT_TX_GAS = 1_000_000


# --- replicas ------------------------------------------------------------------


@dataclass
class Replica:
    owner: str
    lc: object
    storage_view: dict
    balances_view: dict
    next_index: int = 1
    schedule: GasSchedule = DEFAULT_SCHEDULE
    hasher_name: str = "sha3_256"
    # index -> digest of the state a checkpoint at that index should carry
    digest_at: dict = field(default_factory=dict)
    # index -> (storage, b) preimage for checkpoints
    preimages: dict = field(default_factory=dict)
    program: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.program is None:
            self.program = self.lc.lazy_program()
        self.hasher = get_hasher(self.hasher_name)

    @classmethod
    def fresh(cls, owner: str, lc, schedule: GasSchedule = DEFAULT_SCHEDULE,
              hasher: str = "sha3_256") -> "Replica":
        return cls(owner, lc, lc.initial_storage(), {}, 1, schedule, hasher)

    def digest(self) -> int:
        return state_digest(self.storage_view, self.balances_view, self.hasher)

    def balance(self, party: str) -> int:
        return self.balances_view.get(party, 0)

    def fingerprint(self) -> tuple:
        return (self.next_index, self.digest())


def apply_entry(replica: Replica, entry) -> Replica:
    """Apply ``entry`` to ``replica`` in place and return it."""
    if entry.index != replica.next_index:
        raise GapInLedger(f"{replica.owner}: expected entry {replica.next_index}, "
                          f"got {entry.index}")
    if isinstance(entry, Checkpoint):
        replica.digest_at[entry.index] = replica.digest()
        replica.preimages[entry.index] = (copy.deepcopy(replica.storage_view),
                                          dict(replica.balances_view))
    step = replay_entry(replica.lc, replica.program, replica.storage_view,
                        replica.balances_view, entry, replica.schedule, replica.hasher)
    replica.storage_view, replica.balances_view = step.storage, step.b
    replica.next_index += 1
    return replica


def sync(replica: Replica, ledger) -> Replica:
    while replica.next_index <= len(ledger):
        apply_entry(replica, ledger[replica.next_index - 1])
    return replica


def detect_fraud(replica: Replica, w: WithdrawRequest) -> bool:
    """True when ``w`` asks for more than its requester's L-balance."""
    if replica.next_index != w.index:
        raise ReplicaBehind(f"replica must stand at entry {w.index}, is at {replica.next_index}")
    return replica.balance(w.party) < w.amount


def checkpoint_is_fraud(replica: Replica, c: Checkpoint) -> bool:
    if c.index not in replica.digest_at:
        raise ReplicaBehind(f"replica has not reached checkpoint {c.index}")
    return replica.digest_at[c.index] != c.state_hash


class EagerOracle:
    """Executes the ledger's calls directly on the unwrapped contracts.

    Currency lives in plain balances (what was deposited into L), calls run
    under the original functions with real ``msg``/``block`` values.  An
    all-honest ledger must leave it in the same state as any replica.
    """

    def __init__(self, lc, schedule: GasSchedule = DEFAULT_SCHEDULE,
                 hasher: str = "sha3_256", gas_limit: int = 10**12):
        self.lc = lc
        self.program = lc.eager_program()
        self.storage = lc.initial_storage()
        self.balances: dict = {}
        self.schedule = schedule
        self.hasher = hasher
        self.gas_limit = gas_limit

    def apply(self, e) -> None:
        if isinstance(e, Deposit):
            self.balances[e.party] = self.balances.get(e.party, 0) + e.amount
        elif isinstance(e, CallRequest):
            cname, fname = e.fname.split(".", 1)
            f = self.lc.contract(cname).function(fname)
            env = CallEnv(e.party, e.payment, e.snapshot.get(A.BLOCK_NUMBER, e.block),
                          self.gas_limit)
            r = execute_call(self.storage, f, list(e.args), env, self.balances,
                             schedule=self.schedule, this=cname, program=self.program,
                             hasher=self.hasher)
            if r.outcome is Outcome.SUCCESS:
                self.storage = r.storage_after
                self.balances = {k: v for k, v in r.balances_after.items() if v}
        elif isinstance(e, WithdrawRequest):
            have = self.balances.get(e.party, 0)
            if have >= e.amount:
                self.balances[e.party] = have - e.amount
                if not self.balances[e.party]:
                    del self.balances[e.party]

    def run(self, ledger) -> "EagerOracle":
        for e in ledger:
            self.apply(e)
        return self


# --- strategies ----------------------------------------------------------------


@dataclass
class Observation:
    """What a party sees after a block is mined."""

    block: int  # the block its transactions will land in
    state: LazyContractState
    account: int


@dataclass
class Strategy:
    kind: str = "Honest"
    excess: int = 0
    target: Optional[str] = None
    miss_after: Optional[int] = None
    react: bool = True
    bid_price: Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        """``Honest``, ``Passive``, ``OverWithdrawer:1``, ``FalseChallenger:Alice``,
        ``SleepyInitiator:2``."""
        name, _, arg = text.partition(":")
        if name == "Honest":
            return cls("Honest")
        if name == "Passive":
            return cls("Passive", react=False)
        if name == "OverWithdrawer":
            return cls("OverWithdrawer", excess=int(arg or 1))
        if name == "FalseChallenger":
            return cls("FalseChallenger", target=arg or None)
        if name == "SleepyInitiator":
            return cls("SleepyInitiator", miss_after=int(arg or 0), bid_price=1)
        raise ValueError(f"unknown strategy {text!r}")

    @property
    def deviant(self) -> bool:
        return self.kind in ("OverWithdrawer", "FalseChallenger", "SleepyInitiator")


class Party:
    """A participant: identity, strategy, replica and per-party memo."""

    def __init__(self, name: str, strategy: Strategy, lc, schedule: GasSchedule,
                 hasher: str = "sha3_256", gas_price: int = 1, target: str = "L",
                 tx_gas: int = DEFAULT_TX_GAS):
        self.name = name
        self.strategy = strategy
        self.replica = Replica.fresh(name, lc, schedule, hasher)
        self.gas_price = gas_price
        self.target = target
        self.tx_gas = tx_gas
        self.judged: set = set()  # entry indices already checked for fraud
        self.challenged: set = set()
        self.bids: set = set()  # (dispute, round)
        self.steps: dict = {}  # dispute -> simulate steps sent by me
        self.timeouts: set = set()
        self.finalized: set = set()
        self.slept = False  # a sleepy initiator only sleeps through one dispute
        self.fraud_seen: list = []

    # -- tx helpers ---------------------------------------------------------

    def tx(self, entry: str, *args, value: int = 0, gas: Optional[int] = None) -> Transaction:
        return Transaction(self.name, self.target, entry, tuple(args), value,
                           gas or self.tx_gas, self.gas_price)

    def observe(self, obs: Observation) -> None:
        """Bring the replica up to the ledger head, judging new entries."""
        ledger = obs.state.ledger
        r = self.replica
        while r.next_index <= len(ledger):
            e = ledger[r.next_index - 1]
            if isinstance(e, WithdrawRequest) and e.index not in self.judged:
                self.judged.add(e.index)
                if detect_fraud(r, e):
                    self.fraud_seen.append(e.index)
            apply_entry(r, e)
            if isinstance(e, Checkpoint) and e.index not in self.judged:
                self.judged.add(e.index)
                if checkpoint_is_fraud(r, e):
                    self.fraud_seen.append(e.index)

    # -- directives -----------------------------------------------------------

    def directive(self, action: str, args: list, obs: Observation, pending: list) -> list:
        """Transactions for a scripted action; ``pending`` are this block's earlier ones."""
        st = obs.state
        me = self.name
        if action == "join":
            value = args[0] if args else st.params.deposit - st.deposit_remaining.get(me, 0)
            return [self.tx("join", value=value)]
        if action in ("deposit", "depositEther"):
            return [self.tx("depositEther", value=args[0])]
        if action in ("call", "requestCall"):
            fname, g_m, payment, call_args = args[0], args[1], args[2], list(args[3:])
            out = []
            k = st.params.checkpoint_interval
            pending_calls = sum(1 for t in pending if t.entry == "requestCall")
            if (k and self.strategy.react
                    and (st.call_count + pending_calls + 1) % k == 0):
                out.append(self.tx("checkpoint", self._predicted_digest(pending)))
            gas = max(self.tx_gas, 4 * st.intrinsic("requestCall", [fname, g_m, payment, call_args]))
            out.append(self.tx("requestCall", fname, g_m, payment, call_args, gas=gas))
            return out
        if action in ("withdraw", "requestWithdraw"):
            have = self.replica.balance(me)
            if self.strategy.kind == "OverWithdrawer":
                amount = have + self.strategy.excess
            elif self.strategy.kind == "Passive":
                amount = args[0]
            else:
                amount = min(args[0], have) if args else have
                if amount <= 0:
                    return []
            return [self.tx("requestWithdraw", amount)]
        if action == "finalize":
            return [self.tx("withdraw", args[0])]
        if action == "checkpoint":
            h = args[0] if args else self._predicted_digest(pending)
            return [self.tx("checkpoint", h)]
        if action == "simulate":
            k = args[0]
            gas = self._sim_gas(st, k)
            if len(args) > 1 and args[1] == "preimage":
                storage, b = self.replica.preimages[k]
                return [self.tx("simulate", k, {"storage": storage, "b": b}, gas=gas)]
            return [self.tx("simulate", k, gas=gas)]
        if action == "timeout":
            return [self.tx("reportTimeout", args[0])]
        if action == "claim":
            return [self.tx("getGasPayment")]
        mapping = {"challenge": "challenge", "bid": "bid", "leave": "leave",
                   "closeAuction": "closeAuction", "reportTimeout": "reportTimeout",
                   "getGasPayment": "getGasPayment"}
        if action in mapping:
            return [self.tx(mapping[action], *args)]
        raise ValueError(f"unknown action {action!r}")

    def _predicted_digest(self, pending: list) -> int:
        """Digest of the replica head plus this party's own not-yet-mined appends."""
        r = self.replica
        storage, b = r.storage_view, r.balances_view
        idx = r.next_index
        for t in pending:
            e = None
            if t.entry == "depositEther":
                e = Deposit(idx, self.name, t.value, 0)
            elif t.entry == "requestWithdraw":
                e = WithdrawRequest(idx, self.name, t.args[0], 0)
            elif t.entry == "requestCall":
                q = r.lc.qualify(t.args[0])
                snap = {g: {A.BLOCK_NUMBER: 0, A.MSG_SENDER: self.name,
                            A.MSG_VALUE: t.args[2]}[g] for g in r.lc.snapshot_globals[q]}
                e = CallRequest(idx, self.name, q, t.args[1], tuple(t.args[3]), t.args[2], snap, 0)
            if e is not None:
                step = replay_entry(r.lc, r.program, storage, b, e, r.schedule, r.hasher)
                storage, b = step.storage, step.b
                idx += 1
        return state_digest(storage, b, r.hasher)

    def _sim_gas(self, st: LazyContractState, k: int) -> int:
        e = st.entry(k)
        extra = e.g_m if isinstance(e, CallRequest) else 0
        return max(self.tx_gas, extra + self.tx_gas)

    # -- reactive behaviour ---------------------------------------------------

    def step(self, obs: Observation) -> list:
        return step(self.strategy, self, obs)


def step(strategy: Strategy, party: Party, obs: Observation) -> list:
    """Reactive transactions of ``party`` for block ``obs.block``."""
    if not strategy.react:
        return []
    st = obs.state
    me = party.name
    n = obs.block
    out = []
    member = me in st.members

    # challenges
    if member:
        for j in list(party.fraud_seen):
            e = st.entry(j)
            if e.party == me or e.challenged or j in party.challenged:
                party.fraud_seen.remove(j)
                continue
            if n > st.window_end(e):
                party.fraud_seen.remove(j)
                continue
            if strategy.kind == "FalseChallenger":
                party.fraud_seen.remove(j)
                continue
            out.append(party.tx("challenge", j))
            party.challenged.add(j)
            party.fraud_seen.remove(j)
        if strategy.kind == "FalseChallenger":
            for e in st.ledger:
                if (isinstance(e, WithdrawRequest) and e.party != me
                        and (strategy.target is None or e.party == strategy.target)
                        and not e.challenged and not e.paid and e.index not in party.challenged
                        and n <= st.window_end(e)):
                    out.append(party.tx("challenge", e.index))
                    party.challenged.add(e.index)
                    break

    active = st.active_dispute()
    for j, d in sorted(st.disputes.items()):
        if d.resolved:
            continue
        a = d.auction
        rnd = len(d.timed_out)
        if (member and me not in (d.requester, d.challenger) and a.winner is None
                and n <= a.open_until and (j, rnd) not in party.bids):
            price = party.gas_price if party.slept else (strategy.bid_price or party.gas_price)
            out.append(party.tx("bid", j, price))
            party.bids.add((j, rnd))

    if active is not None:
        d = active
        a = d.auction
        best = a.best_bid()
        winner = a.winner or (best.party if best and n > a.open_until else None)
        if winner == me:
            sent = party.steps.get(d.index, 0)
            sleepy = (strategy.kind == "SleepyInitiator" and strategy.miss_after is not None
                      and not party.slept)
            if sleepy and sent >= strategy.miss_after:
                pass  # goes silent
            else:
                tx = _next_simulation(party, st, d, n)
                if tx is not None:
                    out.append(tx)
                    party.steps[d.index] = sent + 1
        elif winner is not None:
            deadline = a.deadline_next_sim
            if deadline is None:
                base = a.open_until if d.activated_block is None else max(a.open_until, d.activated_block)
                deadline = base + st.params.window
            key = (d.index, len(d.timed_out))
            if n > deadline and key not in party.timeouts:
                out.append(party.tx("reportTimeout", d.index))
                party.timeouts.add(key)

    if strategy.kind == "SleepyInitiator" and any(me in d.timed_out for d in st.disputes.values()):
        party.slept = True

    # own withdrawals and claims
    for e in st.ledger:
        if (isinstance(e, WithdrawRequest) and e.party == me and not e.paid
                and not e.challenged and n > st.window_end(e) and e.index not in party.finalized):
            out.append(party.tx("withdraw", e.index))
            party.finalized.add(e.index)
    if st.claims.get(me, 0) > 0:
        out.append(party.tx("getGasPayment"))
    return out


def _next_simulation(party: Party, st: LazyContractState, d, n: int):
    j = d.index
    k = st.sim_cursor + 1
    # jump over the longest standing-checkpoint prefix we can prove
    best = None
    for c in range(j - 1, st.sim_cursor, -1):
        e = st.entry(c)
        if st.standing_checkpoint(e, n) and c in party.replica.preimages:
            best = c
            break
    if best is not None:
        storage, b = party.replica.preimages[best]
        preimage = {"storage": storage, "b": b}
        gas = party.tx_gas + 4 * st.intrinsic("simulate", [best, preimage])
        return party.tx("simulate", best, preimage, gas=gas)
    if k > j:
        return None
    return party.tx("simulate", k, gas=party._sim_gas(st, k))
