"""Gas schedule: per-construct costs and the flat per-transaction charge."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class GasSchedule:
    arith_op: int = 3
    compare_op: int = 3
    local_read: int = 3
    local_write: int = 3
    storage_read: int = 200
    storage_write_new: int = 20_000
    storage_write_update: int = 5_000
    hash_op: int = 30
    balance_read: int = 400
    transfer_op: int = 9_000
    require_op: int = 10
    loop_iteration_overhead: int = 1
    call_op: int = 700
    call_base: int = 21_000
    per_byte: int = 16
    # when > 0 every protocol transaction is metered at exactly this many
    # units, whatever it does; a stub for walkthrough-style examples
    flat_tx_gas: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValueError(f"gas cost {f.name} must be an integer")
            if f.name in ("per_byte", "flat_tx_gas"):
                if v < 0:
                    raise ValueError(f"gas cost {f.name} must be >= 0")
            elif v <= 0:
                raise ValueError(f"gas cost {f.name} must be > 0")
        if self.storage_read <= self.local_read:
            raise ValueError("storage_read must exceed local_read")
        if min(self.storage_write_new, self.storage_write_update) <= self.local_write:
            raise ValueError("storage writes must exceed local_write")

    def with_overrides(self, **kw) -> "GasSchedule":
        unknown = set(kw) - {f.name for f in fields(self)}
        if unknown:
            raise ValueError(f"unknown gas schedule keys: {', '.join(sorted(unknown))}")
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_SCHEDULE = GasSchedule()


def intrinsic_gas(payload_bytes: int, schedule: GasSchedule = DEFAULT_SCHEDULE) -> int:
    """Flat cost charged to a transaction before anything executes."""
    if payload_bytes < 0:
        raise ValueError("payload size must be >= 0")
    return schedule.call_base + schedule.per_byte * payload_bytes


def parse_schedule(text: str, base: GasSchedule = DEFAULT_SCHEDULE) -> GasSchedule:
    """Parse ``key = integer`` lines (``#`` starts a comment)."""
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ValueError(f"line {lineno}: expected 'key = integer'")
        try:
            overrides[key] = int(value.replace("_", ""))
        except ValueError:
            raise ValueError(f"line {lineno}: {value!r} is not an integer") from None
    return base.with_overrides(**overrides)


def load_schedule(path) -> GasSchedule:
    return parse_schedule(Path(path).read_text(encoding="utf-8"))


class GasMeter:
    """Meters a protocol transaction.  ``charge`` raises OutOfGas past the limit."""

    __slots__ = ("limit", "used", "schedule")

    def __init__(self, limit: int, schedule: GasSchedule = DEFAULT_SCHEDULE):
        self.limit = limit
        self.used = 0
        self.schedule = schedule

    @property
    def remaining(self) -> int:
        return self.limit - self.used

    def charge(self, amount: int) -> None:
        from lazyc.errors import OutOfGas

        if self.used + amount > self.limit:
            self.used = self.limit
            raise OutOfGas()
        self.used += amount

    def reads(self, n: int = 1) -> None:
        self.charge(n * self.schedule.storage_read)

    def writes_new(self, n: int = 1) -> None:
        self.charge(n * self.schedule.storage_write_new)

    def writes_update(self, n: int = 1) -> None:
        self.charge(n * self.schedule.storage_write_update)

    def write(self, was_empty: bool) -> None:
        self.charge(self.schedule.storage_write_new if was_empty
                    else self.schedule.storage_write_update)
