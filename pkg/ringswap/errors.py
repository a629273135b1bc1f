"""
Exception hierarchy for ringswap.
"""

from typing import Iterable, Optional


class RingSwapError(Exception):
    """Base class for every error raised by ringswap."""


class DecodeError(RingSwapError):
    """Malformed, non-canonical or off-group encoding."""


class ConfigError(RingSwapError):
    """Run configuration or profile could not be loaded."""


# ============================================================
# SIGNATURES
# ============================================================

class NonceReuse(RingSwapError):
    """A nonce pair was presented for a second signature."""


class InvalidStatement(RingSwapError):
    """Statement proof-of-knowledge did not verify."""


class ZeroWitness(RingSwapError):
    """Adaptor witness y is zero and has no inverse."""


# ============================================================
# ACCUMULATOR
# ============================================================

class NotMember(RingSwapError):
    """Element is absent from the multiset (or has too low multiplicity)."""


class IsMember(RingSwapError):
    """Element is present, so no non-membership witness exists."""


# ============================================================
# SWAP PROTOCOL
# ============================================================

class ProtocolError(RingSwapError):
    """A swap session step was refused."""


class DuplicateParty(ProtocolError):
    pass


class EmptySession(ProtocolError):
    pass


class UnknownParty(ProtocolError):
    pass


class WrongPhase(ProtocolError):
    pass


class NotInitiator(ProtocolError):
    pass


class MissingPredecessor(ProtocolError):
    """Bundle lacks a pre-signature for an earlier ring position."""

    def __init__(self, missing: Iterable[str]):
        self.missing = tuple(missing)
        super().__init__(f"missing pre-signatures from: {', '.join(self.missing)}")


class BadPreSignature(ProtocolError):
    pass


class ChallengeMismatch(ProtocolError):
    pass


class IncompleteBundle(ProtocolError):
    def __init__(self, missing: Iterable[str]):
        self.missing = tuple(missing)
        super().__init__(f"bundle incomplete, missing: {', '.join(self.missing)}")


class SecretMismatch(ProtocolError):
    pass


class UnknownPreSignature(ProtocolError):
    pass


# ============================================================
# CHAIN SIMULATOR
# ============================================================

class ChainError(RingSwapError):
    pass


class AlreadyLocked(ChainError):
    pass


class UnknownLock(ChainError):
    pass


class InsufficientFunds(ChainError):
    pass


# ============================================================
# TRANSCRIPTS
# ============================================================

class TranscriptError(RingSwapError):
    """Transcript failed to parse or re-verify at a given record."""

    def __init__(self, message: str, index: Optional[int] = None, parse: bool = False):
        self.index = index
        self.parse = parse
        where = f"record {index}: " if index is not None else ""
        super().__init__(where + message)
