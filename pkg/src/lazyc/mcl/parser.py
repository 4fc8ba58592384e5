"""Recursive-descent parser for MCL.

``parse_syntax`` builds a tree in which identifiers are still unresolved
``Name`` nodes; ``parse`` additionally runs name resolution and type
checking (see :mod:`lazyc.mcl.checker`).
"""

from __future__ import annotations

from lazyc.errors import MCLSyntaxError
from lazyc.mcl import ast as A
from lazyc.mcl.lexer import Token, tokenize

_GLOBAL_HEADS = {"block": ("number",), "msg": ("sender", "value"), "this": ("balance",)}
_SCALAR_KW = ("uint", "address", "bool")


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    # -- token helpers --------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "kw") and t.text in texts

    def fail(self, *expected: str):
        t = self.tok
        found = t.text if t.kind != "eof" else "end of input"
        raise MCLSyntaxError(f"unexpected {found!r}", t.line, t.col, expected)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.fail("identifier")
        t = self.tok
        self.i += 1
        return t

    # -- declarations ---------------------------------------------------

    def contract(self) -> A.ContractDef:
        start = self.expect("contract")
        name = self.ident().text
        self.expect("{")
        svars, funcs = [], []
        while not self.at("}"):
            if self.at("function"):
                funcs.append(self.function())
            elif self.at(*_SCALAR_KW, "map"):
                svars.append(self.state_var())
            else:
                self.fail("'function'", "state variable declaration", "'}'")
        self.expect("}")
        if self.tok.kind != "eof":
            self.fail("end of input")
        return A.ContractDef(name, tuple(svars), tuple(funcs), pos=(start.line, start.col))

    def type_name(self, allow_map: bool) -> str:
        if self.at(*_SCALAR_KW):
            t = self.tok.text
            self.i += 1
            return t
        if allow_map and self.at("map"):
            self.i += 1
            self.expect("(")
            self.expect("address")
            self.expect("=>")
            self.expect("uint")
            self.expect(")")
            return A.MAP
        self.fail("type")

    def state_var(self) -> A.StateVarDecl:
        t = self.tok
        typ = self.type_name(allow_map=True)
        name = self.ident().text
        init = None
        if self.at("="):
            self.i += 1
            init = self.expr()
        self.expect(";")
        return A.StateVarDecl(name, typ, init, pos=(t.line, t.col))

    def function(self) -> A.FunctionDef:
        t = self.expect("function")
        name = self.ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pt = self.tok
                typ = self.type_name(allow_map=False)
                params.append(A.Param(self.ident().text, typ, pos=(pt.line, pt.col)))
                if not self.at(","):
                    break
                self.i += 1
        self.expect(")")
        payable = False
        if self.at("payable"):
            self.i += 1
            payable = True
        body = self.block()
        return A.FunctionDef(name, tuple(params), payable, body, pos=(t.line, t.col))

    # -- statements -----------------------------------------------------

    def block(self) -> tuple:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail("'}'")
            stmts.append(self.statement())
        self.expect("}")
        return tuple(stmts)

    def statement(self):
        t = self.tok
        pos = (t.line, t.col)
        if self.at(*_SCALAR_KW):
            typ = self.type_name(allow_map=False)
            name = self.ident().text
            init = None
            if self.at("="):
                self.i += 1
                init = self.expr()
            self.expect(";")
            return A.LocalDecl(typ, name, init, pos=pos)
        if self.at("if"):
            return self.if_stmt()
        if self.at("while"):
            self.i += 1
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return A.While(cond, self.block(), pos=pos)
        if self.at("require"):
            self.i += 1
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.expect(";")
            return A.Require(cond, pos=pos)
        if self.at("transfer"):
            self.i += 1
            self.expect("(")
            to = self.expr()
            self.expect(",")
            amount = self.expr()
            self.expect(")")
            self.expect(";")
            return A.Transfer(to, amount, pos=pos)
        if t.kind == "ident":
            if self.peek().text == "." and self.peek().kind == "punct":
                contract = self.ident().text
                self.expect(".")
                fname = self.ident().text
                args = self.call_args()
                self.expect(";")
                return A.Call(contract, fname, args, pos=pos)
            name = self.ident().text
            target = A.Name(name, pos=pos)
            if self.at("["):
                self.i += 1
                key = self.expr()
                self.expect("]")
                target = A.Index(name, key, pos=pos)
            if not self.at("=", "+=", "-="):
                self.fail("'='", "'+='", "'-='")
            op = self.tok.text
            self.i += 1
            value = self.expr()
            self.expect(";")
            return A.Assign(target, op, value, pos=pos)
        self.fail("statement")

    def if_stmt(self) -> A.If:
        t = self.expect("if")
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        then = self.block()
        orelse = ()
        if self.at("else"):
            self.i += 1
            orelse = (self.if_stmt(),) if self.at("if") else self.block()
        return A.If(cond, then, orelse, pos=(t.line, t.col))

    def call_args(self) -> tuple:
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.expr())
                if not self.at(","):
                    break
                self.i += 1
        self.expect(")")
        return tuple(args)

    # -- expressions ----------------------------------------------------

    def expr(self):
        return self.or_expr()

    def _left_assoc(self, sub, ops):
        left = sub()
        while self.at(*ops):
            t = self.tok
            self.i += 1
            left = A.BinOp(t.text, left, sub(), pos=(t.line, t.col))
        return left

    def or_expr(self):
        return self._left_assoc(self.and_expr, ("||",))

    def and_expr(self):
        return self._left_assoc(self.cmp_expr, ("&&",))

    def cmp_expr(self):
        left = self.add_expr()
        if self.at(*A.COMPARE_OPS):
            t = self.tok
            self.i += 1
            left = A.BinOp(t.text, left, self.add_expr(), pos=(t.line, t.col))
            if self.at(*A.COMPARE_OPS):
                self.fail("operator other than a comparison (comparisons do not chain)")
        return left

    def add_expr(self):
        return self._left_assoc(self.mul_expr, ("+", "-"))

    def mul_expr(self):
        return self._left_assoc(self.unary, ("*", "/", "%"))

    def unary(self):
        if self.at("!"):
            t = self.tok
            self.i += 1
            return A.Not(self.unary(), pos=(t.line, t.col))
        return self.primary()

    def primary(self):
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "int":
            self.i += 1
            return A.IntLit(t.value, pos=pos)
        if self.at("true", "false"):
            self.i += 1
            return A.BoolLit(t.text == "true", pos=pos)
        if self.at("@"):
            self.i += 1
            return A.AddrLit(self.ident().text, pos=pos)
        if self.at("("):
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        if self.at("hash", "balance"):
            self.i += 1
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return A.Hash(arg, pos=pos) if t.text == "hash" else A.BalanceOf(arg, pos=pos)
        if t.kind == "kw" and t.text in _GLOBAL_HEADS:
            self.i += 1
            self.expect(".")
            member = self.tok
            if member.text not in _GLOBAL_HEADS[t.text]:
                self.fail(*(repr(m) for m in _GLOBAL_HEADS[t.text]))
            self.i += 1
            return A.Global(f"{t.text}.{member.text}", pos=pos)
        if t.kind == "ident":
            self.i += 1
            if self.at("["):
                self.i += 1
                key = self.expr()
                self.expect("]")
                return A.Index(t.text, key, pos=pos)
            return A.Name(t.text, pos=pos)
        self.fail("expression")


def parse_syntax(source: str) -> A.ContractDef:
    """Parse MCL source into an unresolved tree (identifiers as ``Name``)."""
    return Parser(source).contract()


def parse(source: str) -> A.ContractDef:
    """Parse, resolve names and type-check one MCL contract."""
    from lazyc.mcl.checker import resolve

    return resolve(parse_syntax(source))
