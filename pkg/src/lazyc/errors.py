"""Exception hierarchy shared by every layer of the simulator.

The VM kernel imports its control-flow exceptions from here so that the
compiled and pure-Python kernels raise the very same classes.
"""

from __future__ import annotations


class LazycError(Exception):
    """Base class for all simulator errors."""


# --- MCL front end -------------------------------------------------------


class MCLError(LazycError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)


class MCLSyntaxError(MCLError):
    def __init__(self, message: str, line: int = 0, col: int = 0, expected=()):
        self.expected = tuple(expected)
        if self.expected:
            message = f"{message} (expected {', '.join(self.expected)})"
        super().__init__(message, line, col)


class MCLNameError(MCLError):
    pass


class MCLTypeError(MCLError):
    pass


class PayabilityError(MCLError):
    pass


# --- VM ------------------------------------------------------------------


class ExecutionHalt(Exception):
    """Internal control flow of the interpreter; never escapes execute_call."""


class Revert(ExecutionHalt):
    pass


class OutOfGas(ExecutionHalt):
    pass


class ArgumentMismatch(LazycError):
    pass


class InternalInvariantViolation(LazycError):
    pass


# --- wrapping ------------------------------------------------------------


class UnsupportedConstruct(LazycError):
    pass


class AlreadyRewritten(UnsupportedConstruct):
    pass


class ExternalCallError(LazycError):
    pass


class NameCollision(LazycError):
    pass


# --- protocol ------------------------------------------------------------


class ProtocolError(LazycError):
    """A protocol entry point rejected its call; the transaction reverts."""

    @property
    def code(self) -> str:
        return type(self).__name__


class AlreadyMember(ProtocolError): pass
class InsufficientDeposit(ProtocolError): pass
class ExcessDeposit(ProtocolError): pass
class NotMember(ProtocolError): pass
class Blacklisted(ProtocolError): pass
class ZeroAmount(ProtocolError): pass
class LimitExceeded(ProtocolError): pass
class UnknownFunction(ProtocolError): pass
class CheckpointRequired(ProtocolError): pass
class ActiveRequestExists(ProtocolError): pass
class WindowOpen(ProtocolError): pass
class WindowClosed(ProtocolError): pass
class Challenged(ProtocolError): pass
class AlreadyChallenged(ProtocolError): pass
class AlreadyPaid(ProtocolError): pass
class NotOwnerOfRequest(ProtocolError): pass
class SelfChallenge(ProtocolError): pass
class NotChallengeable(ProtocolError): pass
class AuctionClosed(ProtocolError): pass
class PartyToDispute(ProtocolError): pass
class StillOpen(ProtocolError): pass
class NoBids(ProtocolError): pass
class NoDispute(ProtocolError): pass
class NotWinner(ProtocolError): pass
class OutOfOrder(ProtocolError): pass
class PastDeadline(ProtocolError): pass
class NotTimedOut(ProtocolError): pass
class ActiveRequest(ProtocolError): pass
class MalformedDigest(ProtocolError): pass
class BadPreimage(ProtocolError): pass
class NoClaim(ProtocolError): pass
class InsufficientFunds(ProtocolError): pass
class BadArguments(ProtocolError): pass


# --- chain / harness -----------------------------------------------------


class MalformedTransaction(LazycError):
    pass


class ReplicaError(LazycError):
    pass


class GapInLedger(ReplicaError):
    pass


class ReplicaBehind(ReplicaError):
    pass


class ScenarioParseError(LazycError):
    pass


class InvariantViolation(LazycError):
    pass
