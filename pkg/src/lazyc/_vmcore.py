"""Gas-metered MCL interpreter kernel.

This file is importable as plain Python and is also compiled verbatim by
Cython into ``lazyc._vmcore_c`` (see ``_vmcore_c.pyx``).  ``lazyc.vm``
picks whichever is available.  Keep it free of closures, generators and
relative imports so both builds behave identically.

Storage layout handed to the kernel: ``{contract: {var: value}}`` where a
map variable's value is a ``{address: uint}`` dict.  Balances are a flat
``{address: uint}`` dict (real balances for original code, the wrapper's
virtual ``b[...]`` for rewritten code).  Nothing passed in is mutated;
writes go to overlays that ``commit`` folds into fresh dicts.
"""

from lazyc.encoding import encode
from lazyc.errors import InternalInvariantViolation, OutOfGas, Revert

UINT_MAX = 2**256 - 1
MAX_CALL_DEPTH = 32

# node tags, mirrored from lazyc.mcl.ast
T_INT = 1
T_BOOL = 2
T_ADDR = 3
T_LOCAL = 5
T_STATE = 6
T_INDEX = 7
T_GLOBAL = 8
T_BINOP = 9
T_NOT = 10
T_HASH = 11
T_BALANCE = 12
T_LBALANCE = 13
T_SELF = 14
T_SNAPSHOT = 15
T_DECL = 20
T_ASSIGN = 21
T_IF = 22
T_WHILE = 23
T_REQUIRE = 24
T_TRANSFER = 25
T_CALL = 26
T_BANK = 27
T_ICALL = 28

# order of the cost tuple built by lazyc.vm.cost_tuple
COST_FIELDS = (
    "arith_op", "compare_op", "local_read", "local_write", "storage_read",
    "storage_write_new", "storage_write_update", "hash_op", "balance_read",
    "transfer_op", "require_op", "loop_iteration_overhead", "call_op",
)


class Frame:
    __slots__ = ("address", "locals", "sender", "value", "block", "snapshot", "depth", "k")

    def __init__(self, address, locals_, sender, value, block, snapshot, depth, k):
        self.address = address
        self.locals = locals_
        self.sender = sender
        self.value = value
        self.block = block
        self.snapshot = snapshot
        self.depth = depth
        # ledger index of a rewritten call, forwarded to lazy callees
        self.k = k


class Machine:
    __slots__ = (
        "c_arith", "c_compare", "c_lread", "c_lwrite", "c_sread", "c_snew", "c_supd",
        "c_hash", "c_bal", "c_transfer", "c_require", "c_loop", "c_call",
        "program", "base", "writes", "mwrites", "bal_base", "bal_writes",
        "used", "limit", "hasher",
    )

    def __init__(self, program, storage, balances, costs, limit, hasher):
        (self.c_arith, self.c_compare, self.c_lread, self.c_lwrite, self.c_sread,
         self.c_snew, self.c_supd, self.c_hash, self.c_bal, self.c_transfer,
         self.c_require, self.c_loop, self.c_call) = costs
        self.program = program
        self.base = storage
        self.writes = {}
        self.mwrites = {}
        self.bal_base = balances
        self.bal_writes = {}
        self.used = 0
        self.limit = limit
        self.hasher = hasher

    # -- metering ---------------------------------------------------------

    def charge(self, cost):
        u = self.used + cost
        if u > self.limit:
            self.used = self.limit
            raise OutOfGas()
        self.used = u

    # -- state access -----------------------------------------------------

    def sload(self, contract, var):
        key = (contract, var)
        if key in self.writes:
            return self.writes[key]
        return self.base[contract][var]

    def mload(self, contract, var, k):
        key = (contract, var, k)
        if key in self.mwrites:
            return self.mwrites[key]
        return self.base[contract][var].get(k, 0)

    def bload(self, addr):
        if addr in self.bal_writes:
            return self.bal_writes[addr]
        return self.bal_base.get(addr, 0)

    def bstore(self, addr, value):
        # storage-priced write of a virtual balance
        self.charge(self.c_snew if not self.bload(addr) else self.c_supd)
        self.bal_writes[addr] = value

    # -- expressions ------------------------------------------------------

    def eval(self, e, fr):
        tag = e.tag
        if tag == T_LOCAL:
            self.charge(self.c_lread)
            return fr.locals[e.name]
        if tag == T_INT:
            self.charge(self.c_lread)
            return e.value
        if tag == T_BINOP:
            return self.binop(e, fr)
        if tag == T_STATE:
            self.charge(self.c_sread)
            return self.sload(fr.address, e.name)
        if tag == T_INDEX:
            k = self.eval(e.key, fr)
            self.charge(self.c_sread)
            return self.mload(fr.address, e.map, k)
        if tag == T_BOOL:
            self.charge(self.c_lread)
            return e.value
        if tag == T_ADDR:
            self.charge(self.c_lread)
            return e.label
        if tag == T_NOT:
            v = self.eval(e.operand, fr)
            self.charge(self.c_compare)
            return not v
        if tag == T_GLOBAL:
            name = e.name
            if name == "this.balance":
                self.charge(self.c_bal)
                return self.bload(fr.address)
            self.charge(self.c_lread)
            if name == "block.number":
                return fr.block
            if name == "msg.sender":
                return fr.sender
            return fr.value
        if tag == T_SNAPSHOT:
            self.charge(self.c_sread)
            snap = fr.snapshot
            if snap is None or e.name not in snap:
                raise InternalInvariantViolation("global %s missing from snapshot" % e.name)
            return snap[e.name]
        if tag == T_LBALANCE:
            a = self.eval(e.addr, fr)
            self.charge(self.c_sread)
            return self.bload(a)
        if tag == T_SELF:
            self.charge(self.c_lread)
            return fr.address
        if tag == T_HASH:
            v = self.eval(e.arg, fr)
            self.charge(self.c_hash)
            return self.hasher(encode(v))
        if tag == T_BALANCE:
            a = self.eval(e.addr, fr)
            self.charge(self.c_bal)
            return self.bload(a)
        raise InternalInvariantViolation("cannot evaluate node %r" % (e,))

    def binop(self, e, fr):
        op = e.op
        if op == "&&":
            left = self.eval(e.left, fr)
            self.charge(self.c_compare)
            if not left:
                return False
            return self.eval(e.right, fr)
        if op == "||":
            left = self.eval(e.left, fr)
            self.charge(self.c_compare)
            if left:
                return True
            return self.eval(e.right, fr)
        a = self.eval(e.left, fr)
        b = self.eval(e.right, fr)
        if op == "+":
            self.charge(self.c_arith)
            r = a + b
            if r > UINT_MAX:
                raise Revert("overflow")
            return r
        if op == "-":
            self.charge(self.c_arith)
            if b > a:
                raise Revert("underflow")
            return a - b
        if op == "*":
            self.charge(self.c_arith)
            r = a * b
            if r > UINT_MAX:
                raise Revert("overflow")
            return r
        if op == "/":
            self.charge(self.c_arith)
            if b == 0:
                raise Revert("division by zero")
            return a // b
        if op == "%":
            self.charge(self.c_arith)
            if b == 0:
                raise Revert("modulo by zero")
            return a % b
        self.charge(self.c_compare)
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        raise InternalInvariantViolation("unknown operator %r" % op)

    def arith(self, op, cur, rhs):
        self.charge(self.c_arith)
        if op == "+=":
            r = cur + rhs
            if r > UINT_MAX:
                raise Revert("overflow")
            return r
        if rhs > cur:
            raise Revert("underflow")
        return cur - rhs

    # -- statements -------------------------------------------------------

    def run_block(self, stmts, fr):
        for s in stmts:
            tag = s.tag
            if tag == T_ASSIGN:
                self.assign(s, fr)
            elif tag == T_WHILE:
                cond = s.cond
                body = s.body
                while True:
                    self.charge(self.c_loop)
                    if not self.eval(cond, fr):
                        break
                    self.run_block(body, fr)
            elif tag == T_IF:
                if self.eval(s.cond, fr):
                    self.run_block(s.then, fr)
                elif s.orelse:
                    self.run_block(s.orelse, fr)
            elif tag == T_DECL:
                if s.init is not None:
                    v = self.eval(s.init, fr)
                elif s.type == "uint":
                    v = 0
                elif s.type == "bool":
                    v = False
                else:
                    v = ""
                self.charge(self.c_lwrite)
                fr.locals[s.name] = v
            elif tag == T_REQUIRE:
                v = self.eval(s.cond, fr)
                self.charge(self.c_require)
                if not v:
                    raise Revert("require failed")
            elif tag == T_TRANSFER:
                to = self.eval(s.to, fr)
                amount = self.eval(s.amount, fr)
                self.charge(self.c_transfer)
                have = self.bload(fr.address)
                if amount > have:
                    raise Revert("insufficient balance for transfer")
                self.bal_writes[fr.address] = have - amount
                self.bal_writes[to] = self.bload(to) + amount
            elif tag == T_BANK:
                to = self.eval(s.to, fr)
                amount = self.eval(s.amount, fr)
                self.charge(self.c_sread)
                self.bstore(to, self.arith("+=", self.bload(to), amount))
                self.charge(self.c_sread)
                self.bstore(fr.address, self.arith("-=", self.bload(fr.address), amount))
            elif tag == T_CALL or tag == T_ICALL:
                self.call(s, fr, tag == T_ICALL)
            else:
                raise InternalInvariantViolation("cannot execute node %r" % (s,))

    def assign(self, s, fr):
        t = s.target
        tt = t.tag
        op = s.op
        if tt == T_LOCAL:
            if op == "=":
                v = self.eval(s.value, fr)
            else:
                self.charge(self.c_lread)
                cur = fr.locals[t.name]
                v = self.arith(op, cur, self.eval(s.value, fr))
            self.charge(self.c_lwrite)
            fr.locals[t.name] = v
        elif tt == T_STATE:
            addr = fr.address
            if op == "=":
                v = self.eval(s.value, fr)
            else:
                self.charge(self.c_sread)
                v = self.arith(op, self.sload(addr, t.name), self.eval(s.value, fr))
            self.charge(self.c_snew if not self.sload(addr, t.name) else self.c_supd)
            self.writes[(addr, t.name)] = v
        elif tt == T_INDEX:
            addr = fr.address
            k = self.eval(t.key, fr)
            if op == "=":
                v = self.eval(s.value, fr)
            else:
                self.charge(self.c_sread)
                v = self.arith(op, self.mload(addr, t.map, k), self.eval(s.value, fr))
            self.charge(self.c_snew if not self.mload(addr, t.map, k) else self.c_supd)
            self.mwrites[(addr, t.map, k)] = v
        elif tt == T_LBALANCE:
            a = self.eval(t.addr, fr)
            if op == "=":
                v = self.eval(s.value, fr)
            else:
                self.charge(self.c_sread)
                v = self.arith(op, self.bload(a), self.eval(s.value, fr))
            self.bstore(a, v)
        else:
            raise InternalInvariantViolation("bad assignment target %r" % (t,))

    def call(self, s, fr, lazy):
        args = [self.eval(a, fr) for a in s.args]
        self.charge(self.c_call)
        if fr.depth + 1 > MAX_CALL_DEPTH:
            raise Revert("call depth exceeded")
        try:
            callee = self.program[s.contract]
            f = callee[1][s.fname]
        except KeyError:
            raise InternalInvariantViolation("unlinked call %s.%s" % (s.contract, s.fname))
        if lazy:
            snap = {"msg.sender": fr.address, "msg.value": 0}
            if fr.snapshot is not None and "block.number" in fr.snapshot:
                snap["block.number"] = fr.snapshot["block.number"]
            args.insert(0, fr.k)
            self.invoke(callee[0], f, args, fr.address, 0, fr.block, snap, fr.depth + 1)
        else:
            self.invoke(callee[0], f, args, fr.address, 0, fr.block, None, fr.depth + 1)

    def invoke(self, address, f, args, sender, value, block, snapshot, depth):
        params = f.params
        locals_ = {}
        for i in range(len(params)):
            locals_[params[i].name] = args[i]
        # rewritten functions take the ledger index as their first parameter
        k = args[0] if f.lazy else 0
        fr = Frame(address, locals_, sender, value, block, snapshot, depth, k)
        self.run_block(f.body, fr)

    # -- results ----------------------------------------------------------

    def commit(self):
        """Fold overlays into fresh ``(storage, balances)`` dicts."""
        storage = dict(self.base)
        copied = set()
        for key, v in self.writes.items():
            c = key[0]
            if c not in copied:
                storage[c] = dict(storage[c])
                copied.add(c)
            storage[c][key[1]] = v
        copied_maps = set()
        for key, v in self.mwrites.items():
            c = key[0]
            if c not in copied:
                storage[c] = dict(storage[c])
                copied.add(c)
            mk = (c, key[1])
            if mk not in copied_maps:
                storage[c][key[1]] = dict(storage[c][key[1]])
                copied_maps.add(mk)
            if v:
                storage[c][key[1]][key[2]] = v
            else:
                storage[c][key[1]].pop(key[2], None)
        balances = dict(self.bal_base)
        deltas = {}
        for addr, v in self.bal_writes.items():
            d = v - self.bal_base.get(addr, 0)
            if d:
                deltas[addr] = d
            if v:
                balances[addr] = v
            else:
                balances.pop(addr, None)
        return storage, balances, deltas


def run_call(program, storage, balances, costs, limit, hasher,
             address, f, args, sender, value, block, snapshot):
    """Execute one top-level call.

    Returns ``(outcome, gas_used, storage, balances, deltas, error)`` where
    outcome is "Success", "Revert" or "OutOfGas".  On failure the input
    storage and balances are returned unchanged.
    """
    m = Machine(program, storage, balances, costs, limit, hasher)
    try:
        if value:
            have = m.bload(sender)
            if value > have:
                raise Revert("insufficient balance for msg.value")
            m.bal_writes[sender] = have - value
            m.bal_writes[address] = m.bload(address) + value
        m.invoke(address, f, args, sender, value, block, snapshot, 0)
    except OutOfGas:
        return "OutOfGas", limit, storage, balances, {}, "out of gas"
    except Revert as exc:
        return "Revert", m.used, storage, balances, {}, str(exc) or "revert"
    new_storage, new_balances, deltas = m.commit()
    return "Success", m.used, new_storage, new_balances, deltas, None
