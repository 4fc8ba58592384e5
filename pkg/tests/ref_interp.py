"""A deliberately naive reference interpreter, used as a test oracle.

It walks the resolved tree recursively, deep-copies state up front instead
of using write overlays, and records every charge in a trace.  It supports
single-contract original code only (no calls, no rewritten nodes).  The
per-construct prices live in ``RefVM.pay`` and follow the gas table in the
README.
"""

from __future__ import annotations

import copy

from lazyc.encoding import encode
from lazyc.hashing import get_hasher
from lazyc.mcl import ast as A

MAX = 2**256 - 1


class _Stop(Exception):
    def __init__(self, kind):
        self.kind = kind


class RefVM:
    def __init__(self, schedule, limit):
        self.s = schedule
        self.limit = limit
        self.trace = []
        self.hasher = get_hasher()

    @property
    def used(self):
        return sum(c for _, c in self.trace)

    def pay(self, what):
        cost = {
            "lit": self.s.local_read, "local": self.s.local_read, "global": self.s.local_read,
            "sload": self.s.storage_read, "bal": self.s.balance_read,
            "arith": self.s.arith_op, "cmp": self.s.compare_op, "hash": self.s.hash_op,
            "decl": self.s.local_write, "lstore": self.s.local_write,
            "snew": self.s.storage_write_new, "supd": self.s.storage_write_update,
            "require": self.s.require_op, "transfer": self.s.transfer_op,
            "loop": self.s.loop_iteration_overhead,
        }[what]
        if self.used + cost > self.limit:
            raise _Stop("OutOfGas")
        self.trace.append((what, cost))

    # expressions
    def ev(self, e):
        if isinstance(e, (A.IntLit, A.BoolLit)):
            self.pay("lit")
            return e.value
        if isinstance(e, A.AddrLit):
            self.pay("lit")
            return e.label
        if isinstance(e, A.Local):
            self.pay("local")
            return self.locals[e.name]
        if isinstance(e, A.StateVar):
            self.pay("sload")
            return self.storage[e.name]
        if isinstance(e, A.Index):
            key = self.ev(e.key)
            self.pay("sload")
            return self.storage[e.map].get(key, 0)
        if isinstance(e, A.Global):
            if e.name == A.THIS_BALANCE:
                self.pay("bal")
                return self.bal.get(self.me, 0)
            self.pay("global")
            return {A.BLOCK_NUMBER: self.block, A.MSG_SENDER: self.sender,
                    A.MSG_VALUE: self.value}[e.name]
        if isinstance(e, A.Not):
            v = self.ev(e.operand)
            self.pay("cmp")
            return not v
        if isinstance(e, A.Hash):
            v = self.ev(e.arg)
            self.pay("hash")
            return self.hasher(encode(v))
        if isinstance(e, A.BalanceOf):
            a = self.ev(e.addr)
            self.pay("bal")
            return self.bal.get(a, 0)
        if isinstance(e, A.BinOp):
            if e.op in ("&&", "||"):
                left = self.ev(e.left)
                self.pay("cmp")
                if (e.op == "&&") != bool(left):
                    return bool(left)
                return self.ev(e.right)
            a, b = self.ev(e.left), self.ev(e.right)
            if e.op in A.ARITH_OPS:
                self.pay("arith")
                return self.arith(e.op, a, b)
            self.pay("cmp")
            return {"==": a == b, "!=": a != b, "<": a < b, "<=": a <= b,
                    ">": a > b, ">=": a >= b}[e.op]
        raise NotImplementedError(type(e).__name__)

    @staticmethod
    def arith(op, a, b):
        if op in ("/", "%") and b == 0:
            raise _Stop("Revert")
        r = {"+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
             "/": lambda: a // b, "%": lambda: a % b}[op]()
        if not 0 <= r <= MAX:
            raise _Stop("Revert")
        return r

    # statements
    def run(self, stmts):
        for s in stmts:
            self.exec(s)

    def exec(self, s):
        if isinstance(s, A.LocalDecl):
            v = self.ev(s.init) if s.init is not None else A.default_value(s.type)
            self.pay("decl")
            self.locals[s.name] = v
        elif isinstance(s, A.Assign):
            self.assign(s)
        elif isinstance(s, A.If):
            if self.ev(s.cond):
                self.run(s.then)
            else:
                self.run(s.orelse)
        elif isinstance(s, A.While):
            while True:
                self.pay("loop")
                if not self.ev(s.cond):
                    break
                self.run(s.body)
        elif isinstance(s, A.Require):
            v = self.ev(s.cond)
            self.pay("require")
            if not v:
                raise _Stop("Revert")
        elif isinstance(s, A.Transfer):
            to, amt = self.ev(s.to), self.ev(s.amount)
            self.pay("transfer")
            if self.bal.get(self.me, 0) < amt:
                raise _Stop("Revert")
            self.bal[self.me] = self.bal.get(self.me, 0) - amt
            self.bal[to] = self.bal.get(to, 0) + amt
        else:
            raise NotImplementedError(type(s).__name__)

    def assign(self, s):
        t = s.target
        compound = s.op != "="
        if isinstance(t, A.Local):
            if compound:
                self.pay("local")
                cur = self.locals[t.name]
                v = self.arith(s.op[0], cur, self._rhs_after_arith(s.value))
            else:
                v = self.ev(s.value)
            self.pay("lstore")
            self.locals[t.name] = v
            return
        if isinstance(t, A.StateVar):
            get = lambda: self.storage[t.name]
            def put(v):
                self.storage[t.name] = v
        else:
            key = self.ev(t.key)
            get = lambda: self.storage[t.map].get(key, 0)
            def put(v):
                if v:
                    self.storage[t.map][key] = v
                else:
                    self.storage[t.map].pop(key, None)
        if compound:
            self.pay("sload")
            cur = get()
            v = self.arith(s.op[0], cur, self._rhs_after_arith(s.value))
        else:
            v = self.ev(s.value)
        self.pay("snew" if not get() else "supd")
        put(v)

    def _rhs_after_arith(self, e):
        v = self.ev(e)
        self.pay("arith")
        return v


def run_ref(f, args, storage, balances, sender, value, block, limit, schedule, me="C"):
    """Returns ``(outcome, gas_used, storage_after, balances_after, trace)``."""
    vm = RefVM(schedule, limit)
    vm.storage = copy.deepcopy(storage)
    vm.bal = dict(balances)
    vm.me, vm.sender, vm.value, vm.block = me, sender, value, block
    vm.locals = {p.name: a for p, a in zip(f.params, args)}
    try:
        if value:
            if vm.bal.get(sender, 0) < value:
                raise _Stop("Revert")
            vm.bal[sender] -= value
            vm.bal[me] = vm.bal.get(me, 0) + value
        vm.run(f.body)
    except _Stop as stop:
        used = limit if stop.kind == "OutOfGas" else vm.used
        return stop.kind, used, storage, balances, vm.trace
    bal = {k: v for k, v in vm.bal.items() if v}
    return "Success", vm.used, vm.storage, bal, vm.trace
