"""Results of the acceptance criteria, printed in the terminal summary."""

from __future__ import annotations

RESULTS: dict = {}  # criterion number -> (passed, title, detail)


def record(n: int, passed: bool, title: str, detail: str) -> None:
    RESULTS[n] = (passed, title, detail)


def lines() -> list:
    return [f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]"
            for n, (ok, title, detail) in sorted(RESULTS.items())]
