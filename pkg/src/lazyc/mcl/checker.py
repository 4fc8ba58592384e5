"""Name resolution, type checking and static analyses for MCL."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from lazyc.errors import MCLNameError, MCLTypeError, PayabilityError
from lazyc.mcl import ast as A

UINT_MAX = 2**256 - 1

GlobalsUsage = frozenset


class _Scope:
    def __init__(self, contract: A.ContractDef):
        self.state = {v.name: v.type for v in contract.state_vars}
        self.frames: list[dict] = []

    def lookup_local(self, name):
        for frame in reversed(self.frames):
            if name in frame:
                return frame[name]
        return None

    def declare(self, name, typ, pos):
        if self.lookup_local(name) is not None or name in self.state:
            raise MCLNameError(f"duplicate declaration of {name!r}", *pos)
        self.frames[-1][name] = typ


class _Resolver:
    def __init__(self, contract: A.ContractDef):
        self.contract = contract
        self.scope = _Scope(contract)

    def run(self) -> A.ContractDef:
        c = self.contract
        seen = set()
        for v in c.state_vars:
            if v.name in seen:
                raise MCLNameError(f"duplicate state variable {v.name!r}", *v.pos)
            seen.add(v.name)
        fseen = set()
        for f in c.functions:
            if f.name in fseen:
                raise MCLNameError(f"duplicate function {f.name!r}", *f.pos)
            fseen.add(f.name)
        svars = tuple(self.state_var(v) for v in c.state_vars)
        funcs = tuple(self.function(f) for f in c.functions)
        return replace(c, state_vars=svars, functions=funcs)

    def state_var(self, v: A.StateVarDecl) -> A.StateVarDecl:
        if v.init is None:
            return v
        if v.type == A.MAP:
            raise MCLTypeError(f"map {v.name!r} cannot have an initializer", *v.pos)
        if not isinstance(v.init, (A.IntLit, A.BoolLit, A.AddrLit)):
            raise MCLTypeError(f"initializer of {v.name!r} must be a literal", *v.pos)
        init, typ = self.expr(v.init)
        if typ != v.type:
            raise MCLTypeError(f"cannot initialize {v.type} {v.name!r} with {typ}", *v.pos)
        return replace(v, init=init)

    def function(self, f: A.FunctionDef) -> A.FunctionDef:
        self.scope.frames = [{}]
        for p in f.params:
            self.scope.declare(p.name, p.type, p.pos)
        body = self.block(f.body, new_scope=False)
        self.scope.frames = []
        return replace(f, body=body)

    def block(self, stmts, new_scope=True) -> tuple:
        if new_scope:
            self.scope.frames.append({})
        out = tuple(self.stmt(s) for s in stmts)
        if new_scope:
            self.scope.frames.pop()
        return out

    # -- statements ---------------------------------------------------

    def cond(self, e):
        e2, t = self.expr(e)
        if t != A.BOOL:
            raise MCLTypeError(f"condition must be bool, got {t}", *e.pos)
        return e2

    def stmt(self, s):
        if isinstance(s, A.LocalDecl):
            init = None
            if s.init is not None:
                init, t = self.expr(s.init)
                if t != s.type:
                    raise MCLTypeError(f"cannot initialize {s.type} {s.name!r} with {t}", *s.pos)
            self.scope.declare(s.name, s.type, s.pos)
            return replace(s, init=init)
        if isinstance(s, A.Assign):
            target, ttype = self.lvalue(s.target)
            value, vtype = self.expr(s.value)
            if ttype != vtype:
                raise MCLTypeError(f"cannot assign {vtype} to {ttype}", *s.pos)
            if s.op != "=" and ttype != A.UINT:
                raise MCLTypeError(f"{s.op} requires uint operands", *s.pos)
            return replace(s, target=target, value=value)
        if isinstance(s, A.If):
            return replace(s, cond=self.cond(s.cond), then=self.block(s.then),
                           orelse=self.block(s.orelse))
        if isinstance(s, A.While):
            return replace(s, cond=self.cond(s.cond), body=self.block(s.body))
        if isinstance(s, A.Require):
            return replace(s, cond=self.cond(s.cond))
        if isinstance(s, A.Transfer):
            to, tt = self.expr(s.to)
            amount, at = self.expr(s.amount)
            if tt != A.ADDRESS:
                raise MCLTypeError(f"transfer recipient must be address, got {tt}", *s.to.pos)
            if at != A.UINT:
                raise MCLTypeError(f"transfer amount must be uint, got {at}", *s.amount.pos)
            return replace(s, to=to, amount=amount)
        if isinstance(s, A.Call):
            # the callee's signature is checked when contracts are linked
            return replace(s, args=tuple(self.expr(a)[0] for a in s.args))
        raise MCLTypeError(f"unsupported statement {type(s).__name__}", *getattr(s, "pos", (0, 0)))

    def lvalue(self, t):
        if isinstance(t, (A.Local, A.StateVar)):
            t = A.Name(t.name, pos=t.pos)
        if isinstance(t, A.Name):
            lt = self.scope.lookup_local(t.name)
            if lt is not None:
                return A.Local(t.name, pos=t.pos), lt
            st = self.scope.state.get(t.name)
            if st is None:
                raise MCLNameError(f"unresolved identifier {t.name!r}", *t.pos)
            if st == A.MAP:
                raise MCLTypeError(f"cannot assign to map {t.name!r} as a whole", *t.pos)
            return A.StateVar(t.name, pos=t.pos), st
        if isinstance(t, A.Index):
            return self.expr(t)
        raise MCLTypeError("invalid assignment target", *t.pos)

    # -- expressions --------------------------------------------------

    def expr(self, e):
        if isinstance(e, A.IntLit):
            if not 0 <= e.value <= UINT_MAX:
                raise MCLTypeError("integer literal out of uint range", *e.pos)
            return e, A.UINT
        if isinstance(e, A.BoolLit):
            return e, A.BOOL
        if isinstance(e, A.AddrLit):
            return e, A.ADDRESS
        if isinstance(e, A.Name):
            lt = self.scope.lookup_local(e.name)
            if lt is not None:
                return A.Local(e.name, pos=e.pos), lt
            st = self.scope.state.get(e.name)
            if st is None:
                raise MCLNameError(f"unresolved identifier {e.name!r}", *e.pos)
            if st == A.MAP:
                raise MCLTypeError(f"map {e.name!r} must be indexed", *e.pos)
            return A.StateVar(e.name, pos=e.pos), st
        if isinstance(e, (A.Local, A.StateVar)):
            return self.expr(A.Name(e.name, pos=e.pos))
        if isinstance(e, A.Index):
            st = self.scope.state.get(e.map)
            if st is None:
                if self.scope.lookup_local(e.map) is not None:
                    raise MCLTypeError(f"{e.map!r} is not a map", *e.pos)
                raise MCLNameError(f"unresolved identifier {e.map!r}", *e.pos)
            if st != A.MAP:
                raise MCLTypeError(f"{e.map!r} is not a map", *e.pos)
            key, kt = self.expr(e.key)
            if kt != A.ADDRESS:
                raise MCLTypeError(f"map key must be address, got {kt}", *e.key.pos)
            return replace(e, key=key), A.UINT
        if isinstance(e, A.Global):
            return e, A.GLOBAL_TYPES[e.name]
        if isinstance(e, A.BinOp):
            left, lt = self.expr(e.left)
            right, rt = self.expr(e.right)
            op = e.op
            if op in A.ARITH_OPS:
                if lt != A.UINT or rt != A.UINT:
                    raise MCLTypeError(f"operator {op} needs uint operands, got {lt} {op} {rt}", *e.pos)
                out = A.UINT
            elif op in ("==", "!="):
                if lt != rt:
                    raise MCLTypeError(f"cannot compare {lt} with {rt}", *e.pos)
                out = A.BOOL
            elif op in A.COMPARE_OPS:
                if lt != A.UINT or rt != A.UINT:
                    raise MCLTypeError(f"operator {op} needs uint operands", *e.pos)
                out = A.BOOL
            else:
                if lt != A.BOOL or rt != A.BOOL:
                    raise MCLTypeError(f"operator {op} needs bool operands", *e.pos)
                out = A.BOOL
            return replace(e, left=left, right=right), out
        if isinstance(e, A.Not):
            operand, t = self.expr(e.operand)
            if t != A.BOOL:
                raise MCLTypeError(f"! needs a bool operand, got {t}", *e.pos)
            return replace(e, operand=operand), A.BOOL
        if isinstance(e, A.Hash):
            arg, _ = self.expr(e.arg)
            return replace(e, arg=arg), A.UINT
        if isinstance(e, A.BalanceOf):
            addr, t = self.expr(e.addr)
            if t != A.ADDRESS:
                raise MCLTypeError(f"balance() needs an address, got {t}", *e.pos)
            return replace(e, addr=addr), A.UINT
        raise MCLTypeError(f"unsupported expression {type(e).__name__}", *getattr(e, "pos", (0, 0)))


def resolve(contract: A.ContractDef) -> A.ContractDef:
    """Resolve identifiers and type-check; raises MCLNameError/MCLTypeError."""
    return _Resolver(contract).run()


def expr_type(contract: A.ContractDef, func: A.FunctionDef, e) -> str:
    """Static type of a resolved expression inside ``func``."""
    r = _Resolver(contract)
    r.scope.frames = [{p.name: p.type for p in func.params}]
    for node in A.walk(func):
        if isinstance(node, A.LocalDecl):
            r.scope.frames[0][node.name] = node.type
    return r.expr(e)[1]


# --- analyses ------------------------------------------------------------


def syntactic_globals(f: A.FunctionDef) -> frozenset:
    return frozenset(n.name for n in A.walk(f) if isinstance(n, A.Global)
                     and n.name in A.SNAPSHOT_GLOBALS)


def analyze_globals(f: A.FunctionDef) -> GlobalsUsage:
    """Snapshot globals that ``f`` needs recorded when it is requested lazily.

    Every ``block.number``/``msg.sender``/``msg.value`` occurring in the body,
    plus ``msg.value`` and ``msg.sender`` for payable functions (the lazy
    prologue moves ``msg.value`` out of the sender's virtual balance).
    """
    usage = set(syntactic_globals(f))
    if f.payable:
        usage.update((A.MSG_VALUE, A.MSG_SENDER))
    return frozenset(usage)


@dataclass(frozen=True)
class ValidatedContract:
    contract: A.ContractDef
    usage: dict = field(compare=False)

    @property
    def name(self) -> str:
        return self.contract.name

    def function(self, name):
        return self.contract.function(name)


def validate(c: A.ContractDef) -> ValidatedContract:
    """Type-check ``c``, enforce the payability rule, and annotate globals usage."""
    resolved = resolve(c)
    for f in resolved.functions:
        if not f.payable:
            for n in A.walk(f):
                if isinstance(n, A.Global) and n.name == A.MSG_VALUE:
                    raise PayabilityError(
                        f"non-payable function {f.name!r} reads msg.value", *n.pos)
    usage = {f.name: analyze_globals(f) for f in resolved.functions}
    return ValidatedContract(resolved, usage)
