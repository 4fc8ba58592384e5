"""On-chain runtime of a lazy contract L.

``LazyContractState`` holds L's storage (ledger, deposits, blacklist, the
on-chain copy of C's storage and of the virtual balances ``b``, dispute and
auction state, gas claims).  Every protocol entry point is a method taking a
``TxContext``; the chain calls it while mining.  Entry points first check
their preconditions and charge all gas, and only then mutate, so a failure
(ProtocolError or OutOfGas) leaves the state untouched.

The replay of a single ledger entry (``replay_entry``) is shared between the
on-chain ``simulate`` and the parties' off-chain replicas.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass, field
from typing import Optional

from lazyc import errors as E
from lazyc.encoding import payload_size, word_count
from lazyc.gas import DEFAULT_SCHEDULE, GasMeter, GasSchedule, intrinsic_gas
from lazyc.hashing import get_hasher, state_digest
from lazyc.mcl import ast as A
from lazyc.vm import CallEnv, Outcome, execute_call, value_has_type
from lazyc.wrap import LazyContract

ENTRY_POINTS = (
    "join", "depositEther", "requestCall", "requestWithdraw", "withdraw", "challenge",
    "bid", "closeAuction", "simulate", "reportTimeout", "leave", "checkpoint",
    "getGasPayment",
)
VALUE_ENTRIES = ("join", "depositEther")
DIGEST_MAX = 2**256 - 1

# storage words per appended record header
_DEPOSIT_WORDS = 3
_CALL_HEADER_WORDS = 5
_WITHDRAW_WORDS = 5
_CHECKPOINT_WORDS = 4
_BID_WORDS = 3


# --- ledger entries ------------------------------------------------------------


@dataclass
class Deposit:
    index: int
    party: str
    amount: int
    block: int
    kind = "Deposit"


@dataclass
class CallRequest:
    index: int
    party: str
    fname: str  # qualified Contract.f
    g_m: int
    args: tuple
    payment: int
    snapshot: dict
    block: int
    kind = "CallRequest"


@dataclass
class WithdrawRequest:
    index: int
    party: str
    amount: int
    request_block: int
    challenged: bool = False
    paid: bool = False
    challenger: Optional[str] = None
    challenge_block: Optional[int] = None
    voided: bool = False
    payout: int = 0
    kind = "WithdrawRequest"


@dataclass
class Checkpoint:
    index: int
    party: str
    state_hash: int
    block: int
    challenged: bool = False
    challenger: Optional[str] = None
    challenge_block: Optional[int] = None
    invalid: bool = False
    kind = "Checkpoint"


def entry_record(e) -> dict:
    """Plain-dict view of an entry for traces."""
    d = {"kind": e.kind}
    d.update({k: v for k, v in e.__dict__.items()})
    if "args" in d:
        d["args"] = list(d["args"])
    if "snapshot" in d:
        d["snapshot"] = dict(sorted(d["snapshot"].items()))
    return d


# --- disputes ------------------------------------------------------------------


@dataclass
class Bid:
    party: str
    price: int
    block: int
    tx_id: int


@dataclass
class AuctionState:
    dispute_index: int
    open_until: int
    bids: list = field(default_factory=list)
    winner: Optional[str] = None
    winner_price: int = 0
    deadline_next_sim: Optional[int] = None

    def best_bid(self) -> Optional[Bid]:
        if not self.bids:
            return None
        return min(self.bids, key=lambda b: (b.price, b.block, b.tx_id))


@dataclass
class Dispute:
    index: int
    kind: str
    requester: str
    challenger: str
    auction: AuctionState
    activated_block: Optional[int] = None
    gamma: dict = field(default_factory=dict)  # initiator -> gas units
    price: dict = field(default_factory=dict)  # initiator -> bid price
    timed_out: list = field(default_factory=list)
    resolved: bool = False
    dishonest: Optional[str] = None
    charged: int = 0
    resolved_block: Optional[int] = None


@dataclass
class TxContext:
    sender: str
    value: int
    block: int
    meter: GasMeter
    gas_price: int = 1
    tx_id: int = 0


@dataclass
class Step:
    storage: dict
    b: dict
    gas: int
    outcome: str
    would_pay: Optional[bool] = None


def replay_entry(lc: LazyContract, program, storage: dict, b: dict, e,
                 schedule: GasSchedule = DEFAULT_SCHEDULE, hasher=None) -> Step:
    """Apply one ledger entry to ``(storage, b)`` and return the new state.

    Pure: the inputs are not modified.  ``gas`` is what the on-chain replay
    of this entry costs (excluding transaction overheads).
    """
    s = schedule
    if isinstance(e, Deposit):
        nb = dict(b)
        cur = nb.get(e.party, 0)
        nb[e.party] = cur + e.amount
        gas = s.storage_read + (s.storage_write_new if not cur else s.storage_write_update)
        return Step(storage, nb, gas, "Applied")
    if isinstance(e, CallRequest):
        if e.payment > b.get(e.party, 0):
            return Step(storage, b, s.storage_read, "Ignored")
        cname = e.fname.split(".", 1)[0]
        f = lc.rewritten_functions[e.fname]
        flat = s.flat_tx_gas
        if flat and flat > e.g_m:
            return Step(storage, b, e.g_m, "OutOfGas")
        # under the flat stub a call costs exactly ``flat``, whatever its body
        limit = 2**63 if flat else e.g_m
        env = CallEnv(msg_sender=e.party, msg_value=0,
                      block_number=e.snapshot.get(A.BLOCK_NUMBER, e.block), gas_limit=limit)
        r = execute_call(storage, f, [e.index, *e.args], env, b, schedule=schedule,
                         this=cname, program=program, snapshot=e.snapshot, hasher=hasher)
        used = flat or r.gas_used
        if r.outcome is Outcome.SUCCESS:
            nb = {k: v for k, v in r.balances_after.items() if v}
            return Step(r.storage_after, nb, used, str(r.outcome))
        return Step(storage, b, used, str(r.outcome))
    if isinstance(e, WithdrawRequest):
        have = b.get(e.party, 0)
        if have >= e.amount:
            nb = dict(b)
            if have == e.amount:
                del nb[e.party]
            else:
                nb[e.party] = have - e.amount
            return Step(storage, nb, s.storage_read + s.storage_write_update, "Debited", True)
        return Step(storage, b, s.storage_read, "Ignored", False)
    if isinstance(e, Checkpoint):
        return Step(storage, b, 0, "Noted")
    raise E.InternalInvariantViolation(f"unknown ledger entry {e!r}")


class _FlatMeter(GasMeter):
    """Meters every transaction at exactly ``flat`` units."""

    __slots__ = ()

    def __init__(self, limit, schedule, flat):
        super().__init__(limit, schedule)
        if flat > limit:
            self.used = limit
            raise E.OutOfGas()
        self.used = flat

    def charge(self, amount):
        pass


def make_meter(limit: int, schedule: GasSchedule) -> GasMeter:
    if schedule.flat_tx_gas:
        return _FlatMeter(limit, schedule, schedule.flat_tx_gas)
    return GasMeter(limit, schedule)


class LazyContractState:
    def __init__(self, lc: LazyContract, address: str = "L",
                 schedule: GasSchedule = DEFAULT_SCHEDULE, hasher: str = "sha3_256"):
        self.lc = lc
        self.params = lc.params
        self.address = address
        self.schedule = schedule
        self.hasher_name = hasher
        self.hasher = get_hasher(hasher)
        self.program = lc.lazy_program()
        self.ledger: list = []
        self.deposit_remaining: dict = {}
        self.members: set = set()
        self.blacklist: set = set()
        self.b: dict = {}
        self.storage: dict = lc.initial_storage()
        self.sim_cursor = 0
        self.disputes: dict = {}
        self.claims: dict = {}
        self.gas_spent_per_user: dict = {}
        self.call_count = 0
        self.forfeit_pool = 0
        self.total_in = 0
        self.total_out = 0
        self.would_pay: dict = {}
        self.debited_through_cursor = 0
        self.deposited_through_cursor = 0
        self.events: list = []

    # -- queries ----------------------------------------------------------

    @property
    def gamma(self) -> dict:
        """Gas fronted per initiator across all disputes."""
        out: dict = {}
        for d in self.disputes.values():
            for p, g in d.gamma.items():
                out[p] = out.get(p, 0) + g
        return out

    @property
    def auctions(self) -> dict:
        return {j: d.auction for j, d in self.disputes.items()}

    def entry(self, j: int):
        if not isinstance(j, int) or isinstance(j, bool) or not 1 <= j <= len(self.ledger):
            return None
        return self.ledger[j - 1]

    def active_dispute(self) -> Optional[Dispute]:
        open_ = [j for j, d in self.disputes.items() if not d.resolved]
        return self.disputes[min(open_)] if open_ else None

    def window_end(self, e) -> int:
        start = e.request_block if isinstance(e, WithdrawRequest) else e.block
        return start + self.params.window

    def has_active_withdraw(self, party: str, block: int) -> bool:
        for e in self.ledger:
            if isinstance(e, WithdrawRequest) and e.party == party and not e.paid:
                if e.challenged or block <= self.window_end(e):
                    return True
        return False

    def in_dispute(self, party: str) -> bool:
        for d in self.disputes.values():
            if not d.resolved and party in (d.requester, d.challenger, d.auction.winner):
                return True
        return False

    def standing_checkpoint(self, e, block: int) -> bool:
        return (isinstance(e, Checkpoint) and not e.challenged and not e.invalid
                and block > self.window_end(e))

    def custody(self) -> int:
        """Currency L must hold, by the stock identity."""
        deposits = sum(e.amount for e in self.ledger if isinstance(e, Deposit))
        paid = sum(e.payout for e in self.ledger if isinstance(e, WithdrawRequest))
        return (sum(self.deposit_remaining.values()) + sum(self.claims.values())
                + self.forfeit_pool + deposits - paid)

    def audit(self, held: int) -> list:
        """Custody violations given L's actual on-chain holdings."""
        out = []
        stock = self.custody()
        if held != stock:
            out.append(f"custody: L holds {held} but owes {stock}")
        if held != self.total_in - self.total_out:
            out.append(f"custody flow: L holds {held}, in-out = {self.total_in - self.total_out}")
        bsum = sum(self.b.values())
        expected = self.deposited_through_cursor - self.debited_through_cursor
        if bsum != expected:
            out.append(f"b-sum at cursor {self.sim_cursor}: {bsum} != {expected}")
        if any(v < 0 for v in self.b.values()):
            out.append("negative L-balance")
        if any(v < 0 for v in self.deposit_remaining.values()):
            out.append("negative deposit")
        if not 0 <= self.sim_cursor <= len(self.ledger):
            out.append("sim_cursor out of range")
        return out

    def digest(self) -> int:
        return state_digest(self.storage, self.b, self.hasher)

    # -- dispatch ---------------------------------------------------------

    def intrinsic(self, entry: str, args) -> int:
        return intrinsic_gas(payload_size(entry, args), self.schedule)

    def execute(self, ctx: TxContext, entry: str, args) -> int:
        """Run entry point ``entry``; returns the payout owed to the sender."""
        if entry not in ENTRY_POINTS:
            raise E.UnknownFunction(f"L has no entry point {entry!r}")
        ctx.meter.charge(self.intrinsic(entry, args))
        if ctx.value and entry not in VALUE_ENTRIES:
            raise E.BadArguments(f"{entry} does not accept value")
        handler = getattr(self, "_op_" + entry)
        try:
            inspect.signature(handler).bind(ctx, *args)
        except TypeError as exc:
            raise E.BadArguments(f"{entry}: {exc}") from None
        return handler(ctx, *args) or 0

    # -- common checks ----------------------------------------------------

    def _member(self, ctx) -> None:
        ctx.meter.reads(2)
        if ctx.sender in self.blacklist:
            raise E.Blacklisted(f"{ctx.sender} is blacklisted")
        if ctx.sender not in self.members:
            raise E.NotMember(f"{ctx.sender} is not a member")

    def _payable(self, amount: int) -> None:
        """L can only send what it actually holds."""
        if amount > self.total_in - self.total_out:
            raise E.InsufficientFunds(
                f"L holds {self.total_in - self.total_out}, cannot pay {amount}")

    @staticmethod
    def _uint(v) -> bool:
        return isinstance(v, int) and not isinstance(v, bool) and v >= 0

    # -- membership -------------------------------------------------------

    def _op_join(self, ctx):
        p = ctx.sender
        ctx.meter.reads(2)
        if p in self.members:
            raise E.AlreadyMember(f"{p} is already a member")
        need = self.params.deposit - self.deposit_remaining.get(p, 0)
        if ctx.value < need:
            raise E.InsufficientDeposit(f"join needs {need}, got {ctx.value}")
        if ctx.value > need:
            raise E.ExcessDeposit(f"join needs exactly {need}, got {ctx.value}")
        ctx.meter.write(p not in self.deposit_remaining)
        ctx.meter.write(True)
        self.total_in += ctx.value
        self.deposit_remaining[p] = self.params.deposit
        self.members.add(p)
        self.blacklist.discard(p)
        return 0

    def _op_leave(self, ctx):
        p = ctx.sender
        self._member(ctx)
        ctx.meter.reads(2)
        if self.has_active_withdraw(p, ctx.block) or self.in_dispute(p):
            raise E.ActiveRequest(f"{p} has an active withdrawal or dispute")
        refund = self.deposit_remaining.get(p, 0)
        self._payable(refund)
        ctx.meter.writes_update(2)
        ctx.meter.charge(self.schedule.transfer_op)
        self.deposit_remaining[p] = 0
        self.members.discard(p)
        self.total_out += refund
        return refund

    # -- ledger appends ---------------------------------------------------

    def _op_depositEther(self, ctx):
        self._member(ctx)
        if ctx.value <= 0:
            raise E.ZeroAmount("deposit amount must be > 0")
        ctx.meter.writes_new(_DEPOSIT_WORDS)
        self.total_in += ctx.value
        self.ledger.append(Deposit(len(self.ledger) + 1, ctx.sender, ctx.value, ctx.block))
        return 0

    def _op_requestCall(self, ctx, fname, g_m, payment, args=()):
        p = ctx.sender
        self._member(ctx)
        q = self.lc.qualify(fname) if isinstance(fname, str) else None
        if q is None:
            raise E.UnknownFunction(f"no wrapped function {fname!r}")
        orig = self.lc.original_function(q)
        args = tuple(args)
        if not self._uint(g_m) or g_m == 0 or not self._uint(payment):
            raise E.BadArguments("g_m must be > 0 and payment >= 0")
        if len(args) != len(orig.params) or not all(
                value_has_type(a, prm.type) for a, prm in zip(args, orig.params)):
            raise E.BadArguments(f"arguments do not match {q}{orig.param_types}")
        if payment and not orig.payable:
            raise E.BadArguments(f"{q} is not payable")
        prm = self.params
        ctx.meter.reads(2)
        cap = prm.max_gas_per_call if prm.max_gas_per_call is not None else prm.block_gas_cap
        if g_m > cap:
            raise E.LimitExceeded(f"g_m {g_m} exceeds the per-call limit {cap}")
        spent = self.gas_spent_per_user.get(p, 0)
        if prm.max_total_gas_per_user is not None and spent + g_m > prm.max_total_gas_per_user:
            raise E.LimitExceeded(f"{p} would exceed the total gas limit")
        if prm.max_call_count is not None and self.call_count >= prm.max_call_count:
            raise E.LimitExceeded("maximum number of calls reached")
        k = prm.checkpoint_interval
        if k and (self.call_count + 1) % k == 0:
            ctx.meter.reads(1)
            if not self.ledger or not isinstance(self.ledger[-1], Checkpoint):
                raise E.CheckpointRequired(
                    f"call {self.call_count + 1} must directly follow a checkpoint")
        snapshot = {}
        for g in sorted(self.lc.snapshot_globals[q]):
            snapshot[g] = {A.BLOCK_NUMBER: ctx.block, A.MSG_SENDER: p, A.MSG_VALUE: payment}[g]
        ctx.meter.writes_new(_CALL_HEADER_WORDS + word_count(list(args)) + len(snapshot))
        ctx.meter.write(spent == 0)
        ctx.meter.write(self.call_count == 0)
        self.gas_spent_per_user[p] = spent + g_m
        self.call_count += 1
        self.ledger.append(CallRequest(len(self.ledger) + 1, p, q, g_m, args, payment,
                                       snapshot, ctx.block))
        return 0

    def _op_requestWithdraw(self, ctx, amount):
        p = ctx.sender
        self._member(ctx)
        if not self._uint(amount):
            raise E.BadArguments("withdraw amount must be a uint")
        if amount == 0:
            raise E.ZeroAmount("withdraw amount must be > 0")
        ctx.meter.reads(1)
        if self.has_active_withdraw(p, ctx.block):
            raise E.ActiveRequestExists(f"{p} already has an active withdrawal")
        ctx.meter.writes_new(_WITHDRAW_WORDS)
        ctx.meter.write(True)
        self.ledger.append(WithdrawRequest(len(self.ledger) + 1, p, amount, ctx.block))
        return 0

    def _op_checkpoint(self, ctx, state_hash):
        self._member(ctx)
        if not self._uint(state_hash) or state_hash > DIGEST_MAX:
            raise E.MalformedDigest("checkpoint hash must be a 256-bit digest")
        ctx.meter.writes_new(_CHECKPOINT_WORDS)
        self.ledger.append(Checkpoint(len(self.ledger) + 1, ctx.sender, state_hash, ctx.block))
        return 0

    # -- withdrawal -------------------------------------------------------

    def _op_withdraw(self, ctx, j):
        e = self.entry(j)
        ctx.meter.reads(3)
        if not isinstance(e, WithdrawRequest):
            raise E.BadArguments(f"entry {j} is not a withdrawal request")
        if e.party != ctx.sender:
            raise E.NotOwnerOfRequest(f"entry {j} belongs to {e.party}")
        if e.paid:
            raise E.AlreadyPaid(f"withdrawal {j} already settled")
        if e.challenged:
            raise E.Challenged(f"withdrawal {j} is under challenge")
        if ctx.block <= self.window_end(e):
            raise E.WindowOpen(f"withdrawal {j} is challengeable until {self.window_end(e)}")
        self._payable(e.amount)
        ctx.meter.writes_update(1)
        ctx.meter.charge(self.schedule.transfer_op)
        e.paid = True
        e.payout = e.amount
        self.total_out += e.amount
        return e.amount

    # -- disputes ---------------------------------------------------------

    def _op_challenge(self, ctx, j):
        p = ctx.sender
        self._member(ctx)
        e = self.entry(j)
        ctx.meter.reads(2)
        if not isinstance(e, (WithdrawRequest, Checkpoint)):
            raise E.NotChallengeable(f"entry {j} cannot be challenged")
        if e.party == p:
            raise E.SelfChallenge("a party cannot challenge its own entry")
        if e.challenged or getattr(e, "voided", False) or getattr(e, "invalid", False):
            raise E.AlreadyChallenged(f"entry {j} was already challenged")
        if isinstance(e, WithdrawRequest) and e.paid:
            raise E.AlreadyPaid(f"withdrawal {j} already paid")
        if ctx.block > self.window_end(e):
            raise E.WindowClosed(f"challenge window of entry {j} closed at {self.window_end(e)}")
        ctx.meter.writes_update(1)
        ctx.meter.writes_new(2)
        if j <= self.sim_cursor:
            # the replay already passed j: settle from the recorded outcome
            honest = self._recorded_outcome(e)
            ctx.meter.writes_update(3)
            e.challenged, e.challenger, e.challenge_block = True, p, ctx.block
            d = Dispute(j, e.kind, e.party, p, AuctionState(j, ctx.block), ctx.block)
            self.disputes[j] = d
            self._resolve(d, p if honest else e.party, ctx.block)
            return 0
        ctx.meter.writes_new(2)
        e.challenged, e.challenger, e.challenge_block = True, p, ctx.block
        prev = self.active_dispute()
        d = Dispute(j, e.kind, e.party, p, AuctionState(j, ctx.block + self.params.window))
        self.disputes[j] = d
        if prev is None or j < prev.index:
            d.activated_block = ctx.block
        self._event("challenge", j, ctx.block, challenger=p)
        return 0

    def _recorded_outcome(self, e) -> bool:
        """True when the requester of an already-replayed entry was honest."""
        if isinstance(e, WithdrawRequest):
            return bool(self.would_pay.get(e.index, False))
        return self.would_pay.get(e.index) is True

    def _dispute(self, j) -> Dispute:
        d = self.disputes.get(j) if isinstance(j, int) else None
        if d is None or d.resolved:
            raise E.NoDispute(f"no open dispute on entry {j}")
        return d

    def _op_bid(self, ctx, j, price):
        p = ctx.sender
        d = self._dispute(j)
        self._member(ctx)
        ctx.meter.reads(2)
        if p in (d.requester, d.challenger):
            raise E.PartyToDispute(f"{p} is a party to dispute {j}")
        a = d.auction
        if a.winner is not None or ctx.block > a.open_until:
            raise E.AuctionClosed(f"auction for {j} closed at {a.open_until}")
        if not self._uint(price) or price == 0:
            raise E.BadArguments("bid price must be > 0")
        ctx.meter.writes_new(_BID_WORDS)
        a.bids.append(Bid(p, price, ctx.block, ctx.tx_id))
        return 0

    def _close(self, d: Dispute, block: int, explicit: bool) -> None:
        a = d.auction
        best = a.best_bid()
        if best is None:
            raise E.NoBids(f"auction for {d.index} received no bids")
        base = block if explicit else a.open_until
        if d.activated_block is not None:
            base = max(base, d.activated_block)
        a.winner, a.winner_price = best.party, best.price
        a.deadline_next_sim = base + self.params.window
        d.price[best.party] = best.price
        self._event("auction_closed", d.index, block, winner=best.party, price=best.price)

    def _op_closeAuction(self, ctx, j):
        d = self._dispute(j)
        ctx.meter.reads(2 + len(d.auction.bids))
        if d.auction.winner is not None:
            raise E.AuctionClosed(f"auction for {j} already closed")
        if ctx.block <= d.auction.open_until:
            raise E.StillOpen(f"auction for {j} open until {d.auction.open_until}")
        if not d.auction.bids:
            raise E.NoBids(f"auction for {j} received no bids")
        ctx.meter.writes_new(2)
        self._close(d, ctx.block, explicit=True)
        return 0

    def _winner_for_step(self, d: Dispute, ctx) -> None:
        a = d.auction
        ctx.meter.reads(2 + (len(a.bids) if a.winner is None else 0))
        if a.winner is None:
            if ctx.block <= a.open_until:
                raise E.StillOpen(f"auction for {d.index} open until {a.open_until}")
            if not a.bids:
                raise E.NoBids(f"auction for {d.index} received no bids")

    def _op_simulate(self, ctx, k, preimage=None):
        d = self.active_dispute()
        if d is None:
            raise E.NoDispute("no dispute is awaiting simulation")
        self._winner_for_step(d, ctx)
        a = d.auction
        if a.winner is None:
            best = a.best_bid()
            winner, price = best.party, best.price
            base = a.open_until if d.activated_block is None else max(a.open_until, d.activated_block)
            deadline = base + self.params.window
        else:
            winner, price, deadline = a.winner, a.winner_price, a.deadline_next_sim
        if ctx.sender != winner:
            raise E.NotWinner(f"{ctx.sender} is not the initiator of dispute {d.index}")
        if ctx.block > deadline:
            raise E.PastDeadline(f"simulation step was due by block {deadline}")
        j = d.index
        if not isinstance(k, int) or isinstance(k, bool):
            raise E.BadArguments("simulate index must be an integer")
        s = self.schedule
        ctx.meter.reads(2)
        if preimage is not None:
            e = self.entry(k)
            if not (self.sim_cursor < k < j) or not self.standing_checkpoint(e, ctx.block):
                raise E.OutOfOrder(f"entry {k} is not a standing checkpoint after the cursor")
            if not isinstance(preimage, dict) or set(preimage) != {"storage", "b"}:
                raise E.BadPreimage("preimage must carry 'storage' and 'b'")
            try:
                digest = state_digest(preimage["storage"], preimage["b"], self.hasher)
            except (TypeError, ValueError, AttributeError):
                raise E.BadPreimage("preimage is not an encodable state") from None
            if digest != e.state_hash:
                raise E.BadPreimage(f"preimage does not hash to checkpoint {k}")
            ctx.meter.writes_new(word_count(preimage["storage"]) + word_count(preimage["b"]))
            ctx.meter.charge(s.hash_op)
            step = Step(_copy_storage(preimage["storage"]),
                        {a_: v for a_, v in preimage["b"].items() if v}, 0, "Loaded")
        else:
            if k != self.sim_cursor + 1 or k > j:
                raise E.OutOfOrder(f"next entry to simulate is {self.sim_cursor + 1}")
            e = self.entry(k)
            step = replay_entry(self.lc, self.program, self.storage, self.b, e, s, self.hasher)
            ctx.meter.charge(step.gas)
        verdict = None
        if preimage is None and k == j:
            if isinstance(e, WithdrawRequest):
                honest = step.would_pay
            else:
                ctx.meter.charge(s.hash_op)
                honest = state_digest(step.storage, step.b, self.hasher) == e.state_hash
            verdict = d.challenger if honest else d.requester
            # verdict bookkeeping: flags, deposit, blacklist and one claim per initiator
            ctx.meter.writes_update(3)
            ctx.meter.writes_new(len(set(d.gamma) | {winner}))
        ctx.meter.writes_update(2)
        ctx.meter.write(winner not in d.gamma)
        # all gas is charged; mutate
        if a.winner is None:
            self._close(d, ctx.block, explicit=False)
        if preimage is not None:
            self._skip_to(k, step)
        else:
            self._advance(e, step)
        d.gamma[winner] = d.gamma.get(winner, 0) + ctx.meter.used
        a.deadline_next_sim = ctx.block + self.params.window
        self._event("simulate", j, ctx.block, k=k, initiator=winner, gas=ctx.meter.used,
                    outcome=step.outcome)
        if verdict is not None:
            self._resolve(d, verdict, ctx.block)
        return 0

    def _advance(self, e, step: Step) -> None:
        if isinstance(e, Deposit):
            self.deposited_through_cursor += e.amount
        elif isinstance(e, WithdrawRequest):
            self.would_pay[e.index] = step.would_pay
            if step.would_pay:
                self.debited_through_cursor += e.amount
        elif isinstance(e, Checkpoint):
            # kept so a late challenge of an already-replayed checkpoint can settle
            self.would_pay[e.index] = (
                state_digest(step.storage, step.b, self.hasher) == e.state_hash)
        self.storage, self.b = step.storage, step.b
        self.sim_cursor = e.index

    def _skip_to(self, k: int, step: Step) -> None:
        deposits = sum(x.amount for x in self.ledger[:k] if isinstance(x, Deposit))
        self.deposited_through_cursor = deposits
        self.debited_through_cursor = deposits - sum(step.b.values())
        self.storage, self.b = step.storage, step.b
        self.sim_cursor = k

    def _op_reportTimeout(self, ctx, j):
        d = self._dispute(j)
        active = self.active_dispute()
        self._winner_for_step(d, ctx)
        a = d.auction
        if a.winner is None:
            best = a.best_bid()
            winner = best.party
            base = a.open_until if d.activated_block is None else max(a.open_until, d.activated_block)
            deadline = base + self.params.window
        else:
            winner, deadline = a.winner, a.deadline_next_sim
        if active is not d or ctx.block <= deadline:
            raise E.NotTimedOut(f"initiator of dispute {j} is not late")
        ctx.meter.writes_update(3)
        ctx.meter.writes_new(2)
        if a.winner is None:
            self._close(d, ctx.block, explicit=False)
        lost = self.deposit_remaining.get(winner, 0)
        self.deposit_remaining[winner] = 0
        self.forfeit_pool += lost
        self.members.discard(winner)
        self.blacklist.add(winner)
        d.timed_out.append(winner)
        d.auction = AuctionState(j, ctx.block + self.params.window)
        d.activated_block = ctx.block
        self._event("timeout", j, ctx.block, initiator=winner, forfeited=lost)
        return 0

    def _resolve(self, d: Dispute, dishonest: str, block: int) -> None:
        owed = {p: g * d.price.get(p, 0) for p, g in sorted(d.gamma.items())}
        total = sum(owed.values())
        have = self.deposit_remaining.get(dishonest, 0)
        if total <= have:
            shares = owed
        else:
            # shortfall: pay pro rata, rounding down
            shares = {p: v * have // total for p, v in owed.items()}
        charged = sum(shares.values())
        self.deposit_remaining[dishonest] = have - charged
        for p, v in shares.items():
            if v:
                self.claims[p] = self.claims.get(p, 0) + v
        self.members.discard(dishonest)
        self.blacklist.add(dishonest)
        e = self.entry(d.index)
        honest_requester = dishonest != d.requester
        if isinstance(e, WithdrawRequest):
            if honest_requester:
                e.challenged = False
            else:
                e.voided, e.paid = True, True
        else:
            if honest_requester:
                e.challenged = False
            else:
                e.invalid = True
        d.resolved, d.dishonest, d.charged, d.resolved_block = True, dishonest, charged, block
        self._event("verdict", d.index, block, dishonest=dishonest, charged=charged,
                    gamma=dict(sorted(d.gamma.items())))
        nxt = self.active_dispute()
        if nxt is not None:
            nxt.activated_block = block
            if nxt.auction.winner is not None:
                nxt.auction.deadline_next_sim = max(nxt.auction.deadline_next_sim, block + self.params.window)

    def _op_getGasPayment(self, ctx):
        p = ctx.sender
        ctx.meter.reads(1)
        owed = self.claims.get(p, 0)
        if owed <= 0:
            raise E.NoClaim(f"{p} has no gas claim")
        self._payable(owed)
        ctx.meter.writes_update(1)
        ctx.meter.charge(self.schedule.transfer_op)
        del self.claims[p]
        self.total_out += owed
        return owed

    # -- trace ------------------------------------------------------------

    def _event(self, kind: str, j: int, block: int, **info) -> None:
        self.events.append({"event": kind, "dispute": j, "block": block, **info})

    # -- testing aid --------------------------------------------------------

    def replay_through(self, n: int) -> None:
        """Replay entries up to ``n`` on-chain state, outside any dispute.

        Used by tests to force a full simulation; it touches only the
        on-chain copy of C's storage and ``b``, never deposits or claims.
        """
        while self.sim_cursor < n:
            e = self.ledger[self.sim_cursor]
            step = replay_entry(self.lc, self.program, self.storage, self.b, e,
                                self.schedule, self.hasher)
            self._advance(e, step)


def _copy_storage(storage: dict) -> dict:
    return {c: {k: dict(v) if isinstance(v, dict) else v for k, v in vs.items()}
            for c, vs in storage.items()}
