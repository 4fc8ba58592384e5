"""A single deterministic layer-1 chain.

Accounts hold currency, a FIFO mempool feeds blocks that respect a gas cap,
and every included transaction pays ``gas_used * gas_price`` to the fee sink
under the three-case rule: on success or revert the unused part of the
``g_m * gas_price`` deposit is refunded; on out-of-gas the whole deposit is
kept.  Deployed targets are lazy wrappers (``LazyContractState``) or plainly
deployed contracts executed directly by the interpreter.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from lazyc.encoding import payload_size
from lazyc.errors import ArgumentMismatch, MalformedTransaction, OutOfGas, ProtocolError
from lazyc.gas import DEFAULT_SCHEDULE, GasSchedule, intrinsic_gas
from lazyc.hashing import hash_value
from lazyc.protocol import LazyContractState, TxContext, entry_record, make_meter
from lazyc.vm import CallEnv, Outcome, Program, execute_call, initial_storage

BLOCK_GAS_CAP = 30_000_000

SUCCESS = "Success"
REVERT = "Revert"
OUT_OF_GAS = "OutOfGas"
OVER_CAP = "OverCap"
REJECTED = "Rejected"
TARGET_UNKNOWN = "TargetUnknown"


@dataclass(frozen=True)
class Transaction:
    origin: str
    target: str
    entry: str
    args: tuple = ()
    value: int = 0
    gas_limit: int = 1_000_000
    gas_price: int = 1

    def payload_bytes(self) -> int:
        return payload_size(self.entry, self.args)


@dataclass
class TxReceipt:
    id: int
    origin: str
    target: str
    entry: str
    outcome: str
    gas_used: int = 0
    fee: int = 0
    gas_price: int = 0
    value: int = 0
    payout: int = 0
    error: Optional[str] = None
    args: tuple = ()

    @property
    def ok(self) -> bool:
        return self.outcome == SUCCESS

    def record(self) -> dict:
        return {"id": self.id, "origin": self.origin, "entry": self.entry,
                "outcome": self.outcome, "gas_used": self.gas_used, "fee": self.fee}


@dataclass
class BlockReceipt:
    height: int
    txs: list = field(default_factory=list)
    gas_used: int = 0
    deferred: list = field(default_factory=list)

    def record(self) -> dict:
        return {"height": self.height, "txs": [t.record() for t in self.txs]}


def _is_uint(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


class EagerDeployment:
    """Contracts deployed as-is; calls execute immediately on-chain."""

    def __init__(self, contracts, schedule: GasSchedule = DEFAULT_SCHEDULE,
                 hasher: str = "sha3_256"):
        contracts = [getattr(c, "contract", c) for c in contracts]
        self.program = Program(contracts).link()
        self.storage = {c.name: initial_storage(c) for c in contracts}
        self.schedule = schedule
        self.hasher = hasher

    def run(self, chain: "ChainState", tx: Transaction, tx_id: int, block: int):
        """Returns ``(outcome, gas_used, error)``; mutates chain accounts on success."""
        base = intrinsic_gas(tx.payload_bytes(), self.schedule)
        if base > tx.gas_limit:
            return OUT_OF_GAS, tx.gas_limit, "out of gas"
        fns = self.program.table[tx.target][1]
        f = fns.get(tx.entry)
        if f is None:
            return REVERT, base, f"{tx.target} has no function {tx.entry!r}"
        env = CallEnv(tx.origin, tx.value, block, tx.gas_limit - base, tx.gas_price)
        try:
            r = execute_call(self.storage, f, tx.args, env, chain.accounts,
                             schedule=self.schedule, this=tx.target, program=self.program,
                             hasher=self.hasher)
        except ArgumentMismatch as exc:
            return REVERT, base, str(exc)
        if r.outcome is Outcome.OUT_OF_GAS:
            return OUT_OF_GAS, tx.gas_limit, r.error
        if r.outcome is Outcome.SUCCESS:
            self.storage = r.storage_after
            chain.accounts = r.balances_after
        return str(r.outcome), base + r.gas_used, r.error


class ChainState:
    def __init__(self, block_gas_cap: int = BLOCK_GAS_CAP,
                 schedule: GasSchedule = DEFAULT_SCHEDULE, height: int = 0):
        self.block_gas_cap = block_gas_cap
        self.schedule = schedule
        self.height = height
        self.accounts: dict = {}
        self.deployed: dict = {}
        self.mempool: list = []  # (id, tx)
        self.fee_sink = 0
        self.minted = 0
        self.receipts: list = []
        self._next_id = 0

    # -- setup ------------------------------------------------------------

    def mint(self, addr: str, amount: int) -> None:
        if not _is_uint(amount):
            raise ValueError("mint amount must be a non-negative integer")
        self.accounts[addr] = self.accounts.get(addr, 0) + amount
        self.minted += amount

    def deploy_lazy(self, lc, address: str = "L", hasher: str = "sha3_256") -> LazyContractState:
        if address in self.deployed:
            raise ValueError(f"address {address} already in use")
        st = LazyContractState(lc, address, self.schedule, hasher)
        self.deployed[address] = st
        return st

    def deploy_eager(self, contracts, hasher: str = "sha3_256") -> EagerDeployment:
        dep = EagerDeployment(contracts, self.schedule, hasher)
        for name in dep.program.table:
            if name in self.deployed:
                raise ValueError(f"address {name} already in use")
            self.deployed[name] = dep
        return dep

    # -- queries ----------------------------------------------------------

    def account_balance(self, addr: str) -> int:
        return self.accounts.get(addr, 0)

    def total_currency(self) -> int:
        return sum(self.accounts.values()) + self.fee_sink

    def conservation_violations(self) -> list:
        out = []
        if self.total_currency() != self.minted:
            out.append(f"currency: accounts+fees = {self.total_currency()}, minted {self.minted}")
        if any(v < 0 for v in self.accounts.values()):
            out.append("negative account balance")
        for addr, st in self.deployed.items():
            if isinstance(st, LazyContractState):
                out.extend(f"{addr}: {v}" for v in st.audit(self.account_balance(addr)))
        return out

    def state_hash(self) -> int:
        doc = {"height": self.height, "fee_sink": self.fee_sink,
               "accounts": {k: v for k, v in self.accounts.items() if v},
               "mempool": [[i, _tx_obj(t)] for i, t in self.mempool]}
        for addr, st in sorted(self.deployed.items()):
            if isinstance(st, LazyContractState):
                doc["L:" + addr] = {
                    "ledger": [entry_record(e) for e in st.ledger],
                    "deposits": st.deposit_remaining, "members": sorted(st.members),
                    "blacklist": sorted(st.blacklist), "claims": st.claims,
                    "cursor": st.sim_cursor, "digest": st.digest(),
                    "forfeit": st.forfeit_pool,
                }
            else:
                doc["C:" + addr] = st.storage[addr]
        return hash_value(doc)

    # -- transactions -------------------------------------------------------

    def submit_tx(self, tx: Transaction) -> int:
        if not isinstance(tx, Transaction):
            raise MalformedTransaction("not a Transaction")
        if not isinstance(tx.origin, str) or not tx.origin:
            raise MalformedTransaction("origin must be a non-empty address")
        if not isinstance(tx.target, str) or not isinstance(tx.entry, str) or not tx.entry:
            raise MalformedTransaction("target and entry must be strings")
        if not (_is_uint(tx.value) and _is_uint(tx.gas_limit) and _is_uint(tx.gas_price)):
            raise MalformedTransaction("value, gas_limit and gas_price must be non-negative ints")
        try:
            tx.payload_bytes()
        except (TypeError, ValueError) as exc:
            raise MalformedTransaction(f"arguments not encodable: {exc}") from None
        tid = self._next_id
        self._next_id += 1
        self.mempool.append((tid, tx))
        return tid

    def mine_block(self) -> BlockReceipt:
        block = self.height + 1
        receipt = BlockReceipt(block)
        remaining = self.block_gas_cap
        keep = []
        for tid, tx in self.mempool:
            if tx.gas_limit > self.block_gas_cap:
                receipt.txs.append(TxReceipt(tid, tx.origin, tx.target, tx.entry, OVER_CAP,
                                             gas_price=tx.gas_price, value=tx.value,
                                             error="gas limit exceeds block gas cap",
                                             args=tx.args))
                continue
            if tx.gas_limit > remaining:
                keep.append((tid, tx))
                receipt.deferred.append(tid)
                continue
            r = self._apply(tid, tx, block)
            remaining -= r.gas_used
            receipt.gas_used += r.gas_used
            receipt.txs.append(r)
        self.mempool = keep
        self.height = block
        self.receipts.append(receipt)
        return receipt

    def _apply(self, tid: int, tx: Transaction, block: int) -> TxReceipt:
        deposit = tx.gas_limit * tx.gas_price
        rec = TxReceipt(tid, tx.origin, tx.target, tx.entry, REJECTED, gas_price=tx.gas_price,
                        value=tx.value, args=tx.args)
        if self.account_balance(tx.origin) < tx.value + deposit:
            rec.error = "origin cannot cover value + g_m * gas_price"
            return rec
        self.accounts[tx.origin] -= deposit
        target = self.deployed.get(tx.target)
        if target is None:
            outcome, gas, err = TARGET_UNKNOWN, min(intrinsic_gas(tx.payload_bytes(), self.schedule),
                                                    tx.gas_limit), f"no contract at {tx.target}"
        elif isinstance(target, LazyContractState):
            outcome, gas, err, payout = self._run_lazy(target, tid, tx, block)
            rec.payout = payout
        else:
            outcome, gas, err = target.run(self, tx, tid, block)
        fee = gas * tx.gas_price
        self.fee_sink += fee
        self.accounts[tx.origin] = self.account_balance(tx.origin) + deposit - fee
        rec.outcome, rec.gas_used, rec.fee, rec.error = outcome, gas, fee, err
        return rec

    def _run_lazy(self, st: LazyContractState, tid: int, tx: Transaction, block: int):
        try:
            meter = make_meter(tx.gas_limit, self.schedule)
        except OutOfGas:
            return OUT_OF_GAS, tx.gas_limit, "out of gas", 0
        ctx = TxContext(tx.origin, tx.value, block, meter, tx.gas_price, tid)
        self.accounts[tx.origin] -= tx.value
        self.accounts[st.address] = self.account_balance(st.address) + tx.value
        try:
            payout = st.execute(ctx, tx.entry, tx.args)
        except OutOfGas:
            self._refund_value(st, tx)
            return OUT_OF_GAS, tx.gas_limit, "out of gas", 0
        except ProtocolError as exc:
            self._refund_value(st, tx)
            return REVERT, meter.used, exc.code, 0
        if payout:
            self.accounts[st.address] -= payout
            self.accounts[tx.origin] += payout
        return SUCCESS, meter.used, None, payout

    def _refund_value(self, st, tx) -> None:
        self.accounts[st.address] -= tx.value
        self.accounts[tx.origin] += tx.value

    # -- export -------------------------------------------------------------

    def receipts_json(self) -> str:
        return json.dumps([r.record() for r in self.receipts], sort_keys=False, indent=1)


def _tx_obj(tx: Transaction) -> dict:
    d = asdict(tx)
    d["args"] = list(tx.args)
    return d


def parse_genesis(text: str) -> list:
    """``address amount`` lines; ``#`` starts a comment."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"genesis line {lineno}: expected 'address amount'")
        try:
            amount = int(parts[1].replace("_", ""))
        except ValueError:
            raise ValueError(f"genesis line {lineno}: bad amount {parts[1]!r}") from None
        if amount < 0:
            raise ValueError(f"genesis line {lineno}: negative amount")
        out.append((parts[0], amount))
    return out


def load_genesis(chain: ChainState, path) -> None:
    for addr, amount in parse_genesis(Path(path).read_text(encoding="utf-8")):
        chain.mint(addr, amount)
