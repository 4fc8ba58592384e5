"""The MCL mini-contract language: lexer, parser, checker, printer."""

from lazyc.mcl.checker import GlobalsUsage, ValidatedContract, analyze_globals, resolve, validate
from lazyc.mcl.parser import parse, parse_syntax
from lazyc.mcl.printer import format_contract, format_function

__all__ = [
    "GlobalsUsage",
    "ValidatedContract",
    "analyze_globals",
    "format_contract",
    "format_function",
    "parse",
    "parse_file",
    "parse_syntax",
    "resolve",
    "validate",
]


def parse_file(path) -> "ValidatedContract":
    with open(path, encoding="utf-8") as fh:
        return validate(parse(fh.read()))
