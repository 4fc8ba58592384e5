"""The C to L transformer.

Each function of the wrapped contracts is rewritten so that it runs against
the wrapper's virtual balances and the globals recorded with a call request:

* ``balance(e)`` becomes ``b[e]`` and ``this.balance`` becomes ``b[this]``
* ``transfer(p, x)`` becomes ``b[p] += x; b[this] -= x``
* each ``block.number``/``msg.sender``/``msg.value`` becomes a snapshot read
  ``get_v(k)`` at the ledger index ``k`` of the request
* payable functions gain ``b[this] += get_msg_value(k); b[get_msg_sender(k)] -= get_msg_value(k)``
* the result is private and takes ``k`` as its first parameter

The protocol machinery itself (ledger, auctions, replay) is runtime code in
``lazyc.protocol``; only the contract functions are source-rewritten.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from lazyc import vm
from lazyc.errors import (AlreadyRewritten, ExternalCallError, NameCollision,
                          UnsupportedConstruct)
from lazyc.mcl import ast as A
from lazyc.mcl.checker import ValidatedContract, analyze_globals, validate
from lazyc.mcl.printer import format_function

BLOCK_GAS_CAP = 30_000_000
LZC_FORMAT = "lzc/1"


@dataclass(frozen=True)
class LazyParams:
    deposit: int
    window: int
    max_total_gas_per_user: Optional[int] = None
    max_gas_per_call: Optional[int] = None
    max_call_count: Optional[int] = None
    checkpoint_interval: Optional[int] = None
    block_gas_cap: int = BLOCK_GAS_CAP

    def __post_init__(self):
        if self.deposit <= 0:
            raise ValueError("deposit d must be > 0")
        if self.window <= 0:
            raise ValueError("challenge window t must be > 0")
        if self.max_gas_per_call is not None and self.max_gas_per_call > self.block_gas_cap:
            raise ValueError("max_gas_per_call must not exceed the block gas cap")
        for name in ("max_total_gas_per_user", "max_gas_per_call", "max_call_count",
                     "checkpoint_interval"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be > 0 when set")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LazyParams":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


# --- rewriting ---------------------------------------------------------------


_REWRITTEN_NODES = (A.LBalance, A.SelfAddr, A.Snapshot, A.BankTransfer, A.InternalCall)


def _index_param_name(f: A.FunctionDef) -> str:
    taken = {p.name for p in f.params}
    taken.update(n.name for n in A.walk(f) if isinstance(n, A.LocalDecl))
    if "k" not in taken:
        return "k"
    i = 1
    while f"k{i}" in taken:
        i += 1
    return f"k{i}"


class _Rewriter:
    def __init__(self, usage: frozenset):
        self.usage = usage

    def expr(self, e):
        if isinstance(e, (A.IntLit, A.BoolLit, A.AddrLit, A.Local, A.StateVar)):
            return e
        if isinstance(e, A.Name):
            raise UnsupportedConstruct(f"unresolved identifier {e.name!r}; validate first")
        if isinstance(e, A.Index):
            return replace(e, key=self.expr(e.key))
        if isinstance(e, A.Global):
            if e.name == A.THIS_BALANCE:
                return A.LBalance(A.SelfAddr(pos=e.pos), pos=e.pos)
            if e.name not in self.usage:
                raise UnsupportedConstruct(f"global {e.name} missing from usage annotation")
            return A.Snapshot(e.name, pos=e.pos)
        if isinstance(e, A.BinOp):
            return replace(e, left=self.expr(e.left), right=self.expr(e.right))
        if isinstance(e, A.Not):
            return replace(e, operand=self.expr(e.operand))
        if isinstance(e, A.Hash):
            return replace(e, arg=self.expr(e.arg))
        if isinstance(e, A.BalanceOf):
            return A.LBalance(self.expr(e.addr), pos=e.pos)
        if isinstance(e, _REWRITTEN_NODES):
            raise AlreadyRewritten("function body already contains rewritten nodes")
        raise UnsupportedConstruct(f"cannot rewrite expression {type(e).__name__}")

    def stmt(self, s):
        if isinstance(s, A.LocalDecl):
            return replace(s, init=None if s.init is None else self.expr(s.init))
        if isinstance(s, A.Assign):
            return replace(s, target=self.expr(s.target), value=self.expr(s.value))
        if isinstance(s, A.If):
            return replace(s, cond=self.expr(s.cond), then=self.block(s.then),
                           orelse=self.block(s.orelse))
        if isinstance(s, A.While):
            return replace(s, cond=self.expr(s.cond), body=self.block(s.body))
        if isinstance(s, A.Require):
            return replace(s, cond=self.expr(s.cond))
        if isinstance(s, A.Transfer):
            return A.BankTransfer(self.expr(s.to), self.expr(s.amount), pos=s.pos)
        if isinstance(s, A.Call):
            return A.InternalCall(s.contract, s.fname, tuple(self.expr(a) for a in s.args),
                                  pos=s.pos)
        if isinstance(s, _REWRITTEN_NODES):
            raise AlreadyRewritten("function body already contains rewritten nodes")
        raise UnsupportedConstruct(f"cannot rewrite statement {type(s).__name__}")

    def block(self, stmts) -> tuple:
        return tuple(self.stmt(s) for s in stmts)


def payable_prologue() -> tuple:
    value = A.Snapshot(A.MSG_VALUE)
    return (
        A.Assign(A.LBalance(A.SelfAddr()), "+=", value),
        A.Assign(A.LBalance(A.Snapshot(A.MSG_SENDER)), "-=", value),
    )


def rewrite_function(f: A.FunctionDef, usage: frozenset | None = None) -> A.FunctionDef:
    """Rewrite one validated function into its private lazy form ``L_f``."""
    if f.lazy:
        raise AlreadyRewritten(f"{f.name} is already a rewritten function")
    if usage is None:
        usage = analyze_globals(f)
    body = _Rewriter(frozenset(usage)).block(f.body)
    if f.payable:
        if not {A.MSG_VALUE, A.MSG_SENDER} <= set(usage):
            raise UnsupportedConstruct(f"payable {f.name} needs msg.value and msg.sender usage")
        body = payable_prologue() + body
    k = A.Param(_index_param_name(f), A.UINT)
    return A.FunctionDef("L_" + f.name, (k,) + tuple(f.params), f.payable, body,
                         private=True, lazy=True, pos=f.pos)


# --- wrapping ------------------------------------------------------------------


@dataclass(frozen=True)
class LazyContract:
    """Every wrapped contract's rewritten functions plus the protocol parameters.

    Function keys are qualified ``Contract.f``.  ``snapshot_globals`` is the
    set recorded with a request: the function's own usage, plus
    ``block.number`` when a transitively called function reads it (callee
    frames inherit the caller's block number).
    """

    originals: tuple
    rewritten_functions: dict
    globals_usage: dict
    params: LazyParams
    snapshot_globals: dict = field(compare=False)

    @property
    def original(self) -> ValidatedContract:
        return self.originals[0]

    @property
    def contract_names(self) -> tuple:
        return tuple(vc.name for vc in self.originals)

    def contract(self, name: str) -> A.ContractDef:
        for vc in self.originals:
            if vc.name == name:
                return vc.contract
        raise KeyError(name)

    def qualify(self, fname: str) -> Optional[str]:
        """``Contract.f`` for a qualified or unambiguous bare function name."""
        if fname in self.rewritten_functions:
            return fname
        hits = [q for q in self.rewritten_functions if q.split(".", 1)[1] == fname]
        return hits[0] if len(hits) == 1 else None

    def original_function(self, qname: str) -> A.FunctionDef:
        cname, fname = qname.split(".", 1)
        return self.contract(cname).function(fname)

    def initial_storage(self) -> dict:
        return {vc.name: vm.initial_storage(vc.contract) for vc in self.originals}

    def eager_program(self) -> vm.Program:
        return vm.Program([vc.contract for vc in self.originals]).link()

    def lazy_program(self) -> vm.Program:
        fns = {}
        for q, f in self.rewritten_functions.items():
            cname, fname = q.split(".", 1)
            fns.setdefault(cname, {})[fname] = f
        return vm.Program([vc.contract for vc in self.originals], fns).link()

    def source(self) -> str:
        """Human-readable listing of the rewritten functions."""
        parts = []
        for vc in self.originals:
            parts.append(f"contract {vc.name} {{")
            for f in vc.contract.functions:
                parts.append(format_function(self.rewritten_functions[f"{vc.name}.{f.name}"]))
            parts.append("}")
        return "\n".join(parts) + "\n"


def _callees(f: A.FunctionDef):
    return [(n.contract, n.fname) for n in A.walk(f) if isinstance(n, A.Call)]


def wrap_contract(contracts, params: LazyParams) -> LazyContract:
    """Rewrite every function of ``contracts`` and bundle them with ``params``."""
    if isinstance(contracts, ValidatedContract):
        contracts = [contracts]
    contracts = list(contracts)
    if not contracts:
        raise ValueError("wrap_contract needs at least one contract")
    names = [vc.name for vc in contracts]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise NameCollision(f"contract name(s) wrapped twice: {', '.join(dup)}")
    by_name = {vc.name: vc for vc in contracts}
    for vc in contracts:
        fnames = {f.name for f in vc.contract.functions}
        for f in vc.contract.functions:
            if "L_" + f.name in fnames:
                raise NameCollision(f"{vc.name}.L_{f.name} clashes with a rewritten name")
            for cname, fname in _callees(f):
                if cname not in by_name:
                    raise ExternalCallError(
                        f"{vc.name}.{f.name} calls {cname}.{fname}, outside the wrapped set")
                if by_name[cname].function(fname) is None:
                    raise ExternalCallError(f"{cname} has no function {fname!r}")

    rewritten, usage = {}, {}
    for vc in contracts:
        for f in vc.contract.functions:
            q = f"{vc.name}.{f.name}"
            usage[q] = frozenset(vc.usage.get(f.name, analyze_globals(f)))
            rewritten[q] = rewrite_function(f, usage[q])

    snapshot = {}
    for q in rewritten:
        seen, stack, needs_block = set(), [q], False
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            if cur != q and A.BLOCK_NUMBER in usage[cur]:
                needs_block = True
            cname, fname = cur.split(".", 1)
            stack.extend(f"{c}.{g}" for c, g in _callees(by_name[cname].function(fname)))
        snapshot[q] = usage[q] | ({A.BLOCK_NUMBER} if needs_block else set())
    lc = LazyContract(tuple(contracts), rewritten, usage, params, snapshot)
    # catches arity/type errors at cross-contract call sites
    lc.eager_program()
    return lc


# --- .lzc serialisation ------------------------------------------------------


def to_lzc(lc: LazyContract) -> str:
    doc = {
        "format": LZC_FORMAT,
        "params": lc.params.as_dict(),
        "contracts": [A.to_obj(vc.contract) for vc in lc.originals],
        "rewritten": {q: A.to_obj(f) for q, f in sorted(lc.rewritten_functions.items())},
        "usage": {q: sorted(u) for q, u in sorted(lc.globals_usage.items())},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save_lzc(lc: LazyContract, path) -> None:
    Path(path).write_text(to_lzc(lc), encoding="utf-8")


def from_lzc(text: str) -> LazyContract:
    """Load a ``.lzc`` document; the stored rewrite must match a fresh one."""
    doc = json.loads(text)
    if doc.get("format") != LZC_FORMAT:
        raise ValueError(f"not an {LZC_FORMAT} document")
    originals = [validate(A.from_obj(c)) for c in doc["contracts"]]
    lc = wrap_contract(originals, LazyParams.from_dict(doc["params"]))
    stored = {q: A.from_obj(f) for q, f in doc["rewritten"].items()}
    if stored != lc.rewritten_functions:
        raise ValueError("rewritten functions in .lzc do not match their originals")
    return lc


def load_lzc(path) -> LazyContract:
    return from_lzc(Path(path).read_text(encoding="utf-8"))
