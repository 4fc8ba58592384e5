"""MCL abstract syntax tree.

Nodes are frozen dataclasses.  Source positions ride along in ``pos`` but
are excluded from equality, so two trees compare equal iff they are
structurally identical.  Every node class carries an integer ``tag`` that
the interpreter dispatches on.

Nodes below the ``rewritten`` marker never come out of the parser; they
are produced by the lazy wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import ClassVar, Optional, Union

UINT = "uint"
ADDRESS = "address"
BOOL = "bool"
MAP = "map"
SCALAR_TYPES = (UINT, ADDRESS, BOOL)

BLOCK_NUMBER = "block.number"
MSG_SENDER = "msg.sender"
MSG_VALUE = "msg.value"
THIS_BALANCE = "this.balance"
GLOBALS = (BLOCK_NUMBER, MSG_SENDER, MSG_VALUE, THIS_BALANCE)
# globals that are snapshotted into a call request
SNAPSHOT_GLOBALS = (BLOCK_NUMBER, MSG_SENDER, MSG_VALUE)
GLOBAL_TYPES = {BLOCK_NUMBER: UINT, MSG_SENDER: ADDRESS, MSG_VALUE: UINT, THIS_BALANCE: UINT}

ARITH_OPS = ("+", "-", "*", "/", "%")
COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
LOGIC_OPS = ("&&", "||")


def _pos():
    return field(default=(0, 0), compare=False, repr=False, kw_only=True)


class Node:
    tag: ClassVar[int] = 0
    __slots__ = ()


# --- expressions -----------------------------------------------------------


@dataclass(frozen=True)
class IntLit(Node):
    tag: ClassVar[int] = 1
    value: int
    pos: tuple = _pos()


@dataclass(frozen=True)
class BoolLit(Node):
    tag: ClassVar[int] = 2
    value: bool
    pos: tuple = _pos()


@dataclass(frozen=True)
class AddrLit(Node):
    tag: ClassVar[int] = 3
    label: str
    pos: tuple = _pos()


@dataclass(frozen=True)
class Name(Node):
    """Unresolved identifier; only exists between parsing and resolution."""

    tag: ClassVar[int] = 4
    name: str
    pos: tuple = _pos()


@dataclass(frozen=True)
class Local(Node):
    tag: ClassVar[int] = 5
    name: str
    pos: tuple = _pos()


@dataclass(frozen=True)
class StateVar(Node):
    tag: ClassVar[int] = 6
    name: str
    pos: tuple = _pos()


@dataclass(frozen=True)
class Index(Node):
    tag: ClassVar[int] = 7
    map: str
    key: "Expr"
    pos: tuple = _pos()


@dataclass(frozen=True)
class Global(Node):
    tag: ClassVar[int] = 8
    name: str
    pos: tuple = _pos()


@dataclass(frozen=True)
class BinOp(Node):
    tag: ClassVar[int] = 9
    op: str
    left: "Expr"
    right: "Expr"
    pos: tuple = _pos()


@dataclass(frozen=True)
class Not(Node):
    tag: ClassVar[int] = 10
    operand: "Expr"
    pos: tuple = _pos()


@dataclass(frozen=True)
class Hash(Node):
    tag: ClassVar[int] = 11
    arg: "Expr"
    pos: tuple = _pos()


@dataclass(frozen=True)
class BalanceOf(Node):
    tag: ClassVar[int] = 12
    addr: "Expr"
    pos: tuple = _pos()


# rewritten --------------------------------------------------------------


@dataclass(frozen=True)
class LBalance(Node):
    """``b[addr]``: the wrapper's virtual balance of an address."""

    tag: ClassVar[int] = 13
    addr: "Expr"
    pos: tuple = _pos()


@dataclass(frozen=True)
class SelfAddr(Node):
    """Address of the contract whose function is executing (``this``)."""

    tag: ClassVar[int] = 14
    pos: tuple = _pos()


@dataclass(frozen=True)
class Snapshot(Node):
    """``get_<global>(k)``: a global as recorded in ledger entry ``k``."""

    tag: ClassVar[int] = 15
    name: str
    pos: tuple = _pos()


Expr = Union[IntLit, BoolLit, AddrLit, Name, Local, StateVar, Index, Global, BinOp,
             Not, Hash, BalanceOf, LBalance, SelfAddr, Snapshot]


# --- statements ------------------------------------------------------------


@dataclass(frozen=True)
class LocalDecl(Node):
    tag: ClassVar[int] = 20
    type: str
    name: str
    init: Optional["Expr"]
    pos: tuple = _pos()


@dataclass(frozen=True)
class Assign(Node):
    tag: ClassVar[int] = 21
    target: "Expr"  # Name/Local/StateVar/Index/LBalance
    op: str  # "=", "+=", "-="
    value: "Expr"
    pos: tuple = _pos()


@dataclass(frozen=True)
class If(Node):
    tag: ClassVar[int] = 22
    cond: "Expr"
    then: tuple
    orelse: tuple = ()
    pos: tuple = _pos()


@dataclass(frozen=True)
class While(Node):
    tag: ClassVar[int] = 23
    cond: "Expr"
    body: tuple
    pos: tuple = _pos()


@dataclass(frozen=True)
class Require(Node):
    tag: ClassVar[int] = 24
    cond: "Expr"
    pos: tuple = _pos()


@dataclass(frozen=True)
class Transfer(Node):
    tag: ClassVar[int] = 25
    to: "Expr"
    amount: "Expr"
    pos: tuple = _pos()


@dataclass(frozen=True)
class Call(Node):
    """``Contract.fn(args);`` -- a call into another contract."""

    tag: ClassVar[int] = 26
    contract: str
    fname: str
    args: tuple
    pos: tuple = _pos()


# rewritten --------------------------------------------------------------


@dataclass(frozen=True)
class BankTransfer(Node):
    """``b[to] += x; b[this] -= x;`` with ``x`` evaluated once."""

    tag: ClassVar[int] = 27
    to: "Expr"
    amount: "Expr"
    pos: tuple = _pos()


@dataclass(frozen=True)
class InternalCall(Node):
    """Qualified call to a wrapped contract's private ``L_`` function."""

    tag: ClassVar[int] = 28
    contract: str
    fname: str
    args: tuple
    pos: tuple = _pos()


Stmt = Union[LocalDecl, Assign, If, While, Require, Transfer, Call, BankTransfer, InternalCall]


# --- declarations ----------------------------------------------------------


@dataclass(frozen=True)
class Param:
    name: str
    type: str
    pos: tuple = _pos()


@dataclass(frozen=True)
class StateVarDecl:
    name: str
    type: str
    init: Optional["Expr"] = None
    pos: tuple = _pos()


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple
    payable: bool
    body: tuple
    private: bool = False
    lazy: bool = False
    pos: tuple = _pos()

    @property
    def param_types(self) -> tuple:
        return tuple(p.type for p in self.params)


@dataclass(frozen=True)
class ContractDef:
    name: str
    state_vars: tuple = ()
    functions: tuple = ()
    pos: tuple = _pos()

    def function(self, name: str) -> Optional[FunctionDef]:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def state_var(self, name: str) -> Optional[StateVarDecl]:
        for v in self.state_vars:
            if v.name == name:
                return v
        return None


NODE_CLASSES = {cls.__name__: cls for cls in (
    IntLit, BoolLit, AddrLit, Name, Local, StateVar, Index, Global, BinOp, Not, Hash,
    BalanceOf, LBalance, SelfAddr, Snapshot, LocalDecl, Assign, If, While, Require,
    Transfer, Call, BankTransfer, InternalCall, Param, StateVarDecl, FunctionDef,
    ContractDef,
)}


def default_value(typ: str):
    if typ == UINT:
        return 0
    if typ == BOOL:
        return False
    if typ == ADDRESS:
        return ""
    if typ == MAP:
        return {}
    raise ValueError(f"no default for type {typ!r}")


def children(node) -> list:
    """Direct sub-nodes of ``node`` (expressions and statements)."""
    out = []
    for f in fields(node):
        if f.name == "pos":
            continue
        v = getattr(node, f.name)
        if isinstance(v, tuple):
            out.extend(x for x in v if isinstance(x, (Node, Param, StateVarDecl, FunctionDef)))
        elif isinstance(v, (Node, FunctionDef, StateVarDecl, Param)):
            out.append(v)
    return out


def walk(node):
    """Pre-order traversal over ``node`` and all its descendants."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


# --- canonical object form (for .lzc files and hashing) --------------------


def to_obj(node):
    if isinstance(node, tuple):
        return [to_obj(x) for x in node]
    if isinstance(node, (Node, Param, StateVarDecl, FunctionDef, ContractDef)):
        d = {"node": type(node).__name__}
        for f in fields(node):
            if f.name == "pos":
                continue
            d[f.name] = to_obj(getattr(node, f.name))
        return d
    return node


def from_obj(obj):
    if isinstance(obj, list):
        return tuple(from_obj(x) for x in obj)
    if isinstance(obj, dict) and "node" in obj:
        cls = NODE_CLASSES[obj["node"]]
        kwargs = {k: from_obj(v) for k, v in obj.items() if k != "node"}
        return cls(**kwargs)
    return obj
