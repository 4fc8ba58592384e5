"""Pretty-printer for MCL trees.

Nested binary operations are always parenthesized, so reparsing the output
yields a structurally identical tree.  Rewritten (lazy) nodes are rendered
in the wrapper's notation (``b[...]``, ``get_msg_sender(k)``); that output
is for display and is not MCL source.
"""

from __future__ import annotations

from lazyc.mcl import ast as A

INDENT = "    "


def format_expr(e, k: str = "k") -> str:
    if isinstance(e, A.IntLit):
        return str(e.value)
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.AddrLit):
        return "@" + e.label
    if isinstance(e, (A.Name, A.Local, A.StateVar)):
        return e.name
    if isinstance(e, A.Index):
        return f"{e.map}[{format_expr(e.key, k)}]"
    if isinstance(e, A.Global):
        return e.name
    if isinstance(e, A.BinOp):
        return f"{_operand(e.left, k)} {e.op} {_operand(e.right, k)}"
    if isinstance(e, A.Not):
        return "!" + _operand(e.operand, k)
    if isinstance(e, A.Hash):
        return f"hash({format_expr(e.arg, k)})"
    if isinstance(e, A.BalanceOf):
        return f"balance({format_expr(e.addr, k)})"
    if isinstance(e, A.LBalance):
        return f"b[{format_expr(e.addr, k)}]"
    if isinstance(e, A.SelfAddr):
        return "this"
    if isinstance(e, A.Snapshot):
        return f"get_{e.name.replace('.', '_')}({k})"
    raise TypeError(f"cannot format {type(e).__name__}")


def _operand(e, k):
    s = format_expr(e, k)
    if isinstance(e, (A.BinOp, A.Not)):
        return f"({s})"
    return s


def format_stmt(s, depth: int = 1, k: str = "k") -> list[str]:
    pad = INDENT * depth
    if isinstance(s, A.LocalDecl):
        init = f" = {format_expr(s.init, k)}" if s.init is not None else ""
        return [f"{pad}{s.type} {s.name}{init};"]
    if isinstance(s, A.Assign):
        return [f"{pad}{format_expr(s.target, k)} {s.op} {format_expr(s.value, k)};"]
    if isinstance(s, A.If):
        lines = [f"{pad}if ({format_expr(s.cond, k)}) {{"]
        lines += format_block(s.then, depth + 1, k)
        if s.orelse:
            lines.append(f"{pad}}} else {{")
            lines += format_block(s.orelse, depth + 1, k)
        lines.append(pad + "}")
        return lines
    if isinstance(s, A.While):
        lines = [f"{pad}while ({format_expr(s.cond, k)}) {{"]
        lines += format_block(s.body, depth + 1, k)
        lines.append(pad + "}")
        return lines
    if isinstance(s, A.Require):
        return [f"{pad}require({format_expr(s.cond, k)});"]
    if isinstance(s, A.Transfer):
        return [f"{pad}transfer({format_expr(s.to, k)}, {format_expr(s.amount, k)});"]
    if isinstance(s, A.Call):
        args = ", ".join(format_expr(a, k) for a in s.args)
        return [f"{pad}{s.contract}.{s.fname}({args});"]
    if isinstance(s, A.BankTransfer):
        amt = format_expr(s.amount, k)
        return [f"{pad}b[{format_expr(s.to, k)}] += {amt};", f"{pad}b[this] -= {amt};"]
    if isinstance(s, A.InternalCall):
        args = ", ".join([k] + [format_expr(a, k) for a in s.args])
        return [f"{pad}{s.contract}.L_{s.fname}({args});"]
    raise TypeError(f"cannot format {type(s).__name__}")


def format_block(stmts, depth: int, k: str = "k") -> list[str]:
    out = []
    for s in stmts:
        out.extend(format_stmt(s, depth, k))
    return out


def format_function(f: A.FunctionDef, depth: int = 1) -> str:
    pad = INDENT * depth
    k = f.params[0].name if f.lazy and f.params else "k"
    params = ", ".join(f"{p.type} {p.name}" for p in f.params)
    mods = ""
    if f.payable and not f.lazy:
        mods += " payable"
    if f.private:
        mods += " private"
    lines = [f"{pad}function {f.name}({params}){mods} {{"]
    lines += format_block(f.body, depth + 1, k)
    lines.append(pad + "}")
    return "\n".join(lines)


def format_contract(c: A.ContractDef) -> str:
    lines = [f"contract {c.name} {{"]
    for v in c.state_vars:
        typ = "map(address => uint)" if v.type == A.MAP else v.type
        init = f" = {format_expr(v.init)}" if v.init is not None else ""
        lines.append(f"{INDENT}{typ} {v.name}{init};")
    for f in c.functions:
        if len(lines) > 1:
            lines.append("")
        lines.append(format_function(f))
    lines.append("}")
    return "\n".join(lines) + "\n"
