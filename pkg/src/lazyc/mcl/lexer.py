from __future__ import annotations

from dataclasses import dataclass

from lazyc.errors import MCLSyntaxError

KEYWORDS = frozenset({
    "contract", "function", "payable", "uint", "address", "bool", "map", "if", "else",
    "while", "require", "transfer", "true", "false", "hash", "balance", "block", "msg",
    "this",
})

# longest first so that '<=' wins over '<'
PUNCT = ("=>", "==", "!=", "<=", ">=", "&&", "||", "+=", "-=",
         "{", "}", "(", ")", "[", "]", ";", ",", ".", "=", "<", ">", "+", "-", "*", "/",
         "%", "!", "@")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "int", "kw", "punct", "eof"
    text: str
    line: int
    col: int

    @property
    def value(self) -> int:
        return int(self.text, 0)


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(source)
    line, line_start = 1, 0
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            i += 1
            line_start = i
            continue
        if c in " \t\r":
            i += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        col = i - line_start + 1
        if c.isdigit():
            j = i
            if source.startswith(("0x", "0X"), i):
                j = i + 2
                while j < n and source[j] in "0123456789abcdefABCDEF":
                    j += 1
                if j == i + 2:
                    raise MCLSyntaxError("malformed hex literal", line, col)
            else:
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and (source[j].isalnum() or source[j] == "_"):
                raise MCLSyntaxError(f"malformed number {source[i:j + 1]!r}", line, col)
            toks.append(Token("int", source[i:j], line, col))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            toks.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
            i = j
            continue
        for p in PUNCT:
            if source.startswith(p, i):
                toks.append(Token("punct", p, line, col))
                i += len(p)
                break
        else:
            raise MCLSyntaxError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, i - line_start + 1))
    return toks
