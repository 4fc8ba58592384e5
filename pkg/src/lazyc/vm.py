"""Gas-metered execution of MCL function calls.

The interpreter kernel comes in two builds with identical behaviour: a
Cython extension (``lazyc._vmcore_c``) and the pure-Python module it is
compiled from (``lazyc._vmcore``).  The compiled one is used when present;
set ``LAZYC_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum

from lazyc import _vmcore
from lazyc.errors import ArgumentMismatch, ExternalCallError
from lazyc.gas import DEFAULT_SCHEDULE, GasSchedule
from lazyc.hashing import DEFAULT_HASHER, get_hasher
from lazyc.mcl import ast as A
from lazyc.mcl.checker import expr_type

if os.environ.get("LAZYC_PURE") == "1":
    _kernel = _vmcore
else:
    try:
        from lazyc import _vmcore_c as _kernel
    except ImportError:
        _kernel = _vmcore

BACKEND = "cython" if _kernel is not _vmcore else "python"
UINT_MAX = _vmcore.UINT_MAX


def kernel(name: str | None = None):
    """Return a kernel module: ``"python"``, ``"cython"`` or the active one."""
    if name is None:
        return _kernel
    if name == "python":
        return _vmcore
    if name == "cython":
        from lazyc import _vmcore_c

        return _vmcore_c
    raise ValueError(f"unknown backend {name!r}")


class Outcome(str, Enum):
    SUCCESS = "Success"
    REVERT = "Revert"
    OUT_OF_GAS = "OutOfGas"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class CallEnv:
    msg_sender: str
    msg_value: int = 0
    block_number: int = 0
    gas_limit: int = 1_000_000
    gas_price: int = 1

    def __post_init__(self):
        if self.gas_limit < 0:
            raise ValueError("gas_limit must be >= 0")
        if self.msg_value < 0 or self.block_number < 0 or self.gas_price < 0:
            raise ValueError("msg_value, block_number and gas_price must be >= 0")


@dataclass(frozen=True)
class ExecutionResult:
    outcome: Outcome
    gas_used: int
    storage_after: dict
    balance_deltas: dict
    balances_after: dict = field(default_factory=dict, compare=False)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.outcome is Outcome.SUCCESS


def cost_tuple(schedule: GasSchedule) -> tuple:
    return tuple(getattr(schedule, name) for name in _vmcore.COST_FIELDS)


def initial_storage(contract: A.ContractDef) -> dict:
    """Fresh storage for a deployed contract (declared initialisers applied)."""
    out = {}
    for v in contract.state_vars:
        if v.init is not None:
            out[v.name] = v.init.label if isinstance(v.init, A.AddrLit) else v.init.value
        else:
            out[v.name] = A.default_value(v.type)
    return out


class Program:
    """A linked set of contracts: ``{name: (address, {fname: FunctionDef})}``.

    A contract's address is its name.  ``link`` checks that every call site
    names a contract and function in the set with matching arity and types.
    """

    def __init__(self, contracts=(), functions: dict | None = None):
        self.contracts: dict[str, A.ContractDef] = {}
        self.table: dict[str, tuple] = {}
        for c in contracts:
            self.add(c, functions.get(c.name) if functions else None)

    def add(self, contract: A.ContractDef, functions: dict | None = None) -> None:
        fns = functions if functions is not None else {f.name: f for f in contract.functions}
        self.contracts[contract.name] = contract
        self.table[contract.name] = (contract.name, dict(fns))

    def link(self) -> "Program":
        for cname, (_, fns) in self.table.items():
            contract = self.contracts[cname]
            for f in fns.values():
                for node in A.walk(f):
                    if isinstance(node, (A.Call, A.InternalCall)):
                        self._check_call(contract, f, node)
        return self

    def _check_call(self, contract, f, node) -> None:
        if node.contract not in self.table:
            raise ExternalCallError(
                f"{contract.name}.{f.name} calls {node.contract}.{node.fname}, "
                f"which is outside the linked contract set")
        callee = self.table[node.contract][1].get(node.fname)
        if callee is None:
            raise ExternalCallError(f"{node.contract} has no function {node.fname!r}")
        params = callee.params[1:] if isinstance(node, A.InternalCall) else callee.params
        if len(params) != len(node.args):
            raise ArgumentMismatch(
                f"{node.contract}.{node.fname} takes {len(params)} argument(s), "
                f"got {len(node.args)}")
        if not f.lazy:
            # rewritten bodies derive from checked originals
            for p, a in zip(params, node.args):
                t = expr_type(contract, f, a)
                if t != p.type:
                    raise ArgumentMismatch(
                        f"argument {p.name} of {node.contract}.{node.fname} expects "
                        f"{p.type}, got {t}")

    def function(self, contract: str, fname: str) -> A.FunctionDef:
        return self.table[contract][1][fname]


def check_args(f: A.FunctionDef, args) -> None:
    if len(args) != len(f.params):
        raise ArgumentMismatch(f"{f.name} takes {len(f.params)} argument(s), got {len(args)}")
    for p, a in zip(f.params, args):
        if not value_has_type(a, p.type):
            raise ArgumentMismatch(f"argument {p.name} of {f.name} expects {p.type}, got {a!r}")


def value_has_type(v, typ: str) -> bool:
    if typ == A.UINT:
        return isinstance(v, int) and not isinstance(v, bool) and 0 <= v <= UINT_MAX
    if typ == A.BOOL:
        return isinstance(v, bool)
    if typ == A.ADDRESS:
        return isinstance(v, str)
    return False


def execute_call(contract_storage: dict, f: A.FunctionDef, args, env: CallEnv,
                 balances: dict, *, schedule: GasSchedule = DEFAULT_SCHEDULE,
                 this: str = "C", program: Program | None = None,
                 snapshot: dict | None = None, hasher=None,
                 backend: str | None = None) -> ExecutionResult:
    """Run ``f(*args)`` under ``env`` and return the three-case outcome.

    Without ``program``, ``contract_storage`` is one contract's ``{var: value}``
    and ``f`` runs at address ``this``; with a program it is the
    ``{contract: {var: value}}`` map of every linked contract.  ``snapshot``
    supplies the recorded globals read by rewritten code.
    """
    args = list(args)
    check_args(f, args)
    if env.msg_value and not f.payable:
        raise ArgumentMismatch(f"{f.name} is not payable but msg.value = {env.msg_value}")
    single = program is None
    if single:
        table = {this: (this, {f.name: f})}
        storage = {this: contract_storage}
    else:
        table = program.table
        storage = contract_storage
    if isinstance(hasher, str) or hasher is None:
        hasher = get_hasher(hasher or DEFAULT_HASHER)
    k = kernel(backend)
    outcome, used, st, bal, deltas, err = k.run_call(
        table, storage, balances, cost_tuple(schedule), env.gas_limit, hasher,
        this, f, args, env.msg_sender, env.msg_value, env.block_number, snapshot)
    if single:
        st = st[this]
    return ExecutionResult(Outcome(outcome), used, st, deltas, bal, err)
