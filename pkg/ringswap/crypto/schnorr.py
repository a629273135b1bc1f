"""
Schnorr-style adaptor signatures with one universal adaptor secret.

Every party uses the same rule:

    pre-sign        s_i' = r_i + c_i·a_i          check  s_i'·G == R_i + c_i·A_i
    adapt           s_i  = s_i' + t
    chain verify    s_i·G == R_i + T + c_i·A_i
    extract         t = s_i - s_i'
"""

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Set, Tuple, Union

from ..errors import DecodeError, NonceReuse
from .group import (
    Group,
    GroupElement,
    Scalar,
    as_seed,
    decode_element,
    decode_scalar,
    hash_to_scalar,
    point_mul,
    scalar_random,
)

CHALLENGE_TAG = "swap/challenge/v1"


class ChallengeMode(Enum):
    """RING hashes the accumulator digests; PAIR is the direct two-party form."""
    RING = "ring"
    PAIR = "pair"


@dataclass(frozen=True)
class KeyPair:
    sk: Scalar
    pk: GroupElement

    @classmethod
    def generate(cls, group: Group, seed: Union[str, bytes]) -> "KeyPair":
        sk = scalar_random(group, b"key/" + as_seed(seed))
        return cls(sk, point_mul(sk, group.generator))


@dataclass(frozen=True)
class NoncePair:
    r: Scalar
    R: GroupElement

    @classmethod
    def generate(cls, group: Group, seed: Union[str, bytes]) -> "NoncePair":
        r = scalar_random(group, b"nonce/" + as_seed(seed))
        return cls(r, point_mul(r, group.generator))


@dataclass(frozen=True)
class AdaptorSecret:
    t: Scalar
    T: GroupElement

    @classmethod
    def generate(cls, group: Group, seed: Union[str, bytes]) -> "AdaptorSecret":
        t = scalar_random(group, b"adaptor/" + as_seed(seed))
        return cls(t, point_mul(t, group.generator))


def _pack(party_id: str, *values) -> bytes:
    name = party_id.encode("utf-8")
    out = len(name).to_bytes(2, "big") + name
    for value in values:
        out += value.to_bytes()
    return out


def _unpack(group: Group, data: bytes) -> Tuple[str, Scalar, Scalar, GroupElement, GroupElement]:
    if len(data) < 2:
        raise DecodeError("signature record truncated")
    n = int.from_bytes(data[:2], "big")
    expected = 2 + n + 2 * group.scalar_size + 2 * group.element_size
    if len(data) != expected:
        raise DecodeError(f"signature record must be {expected} bytes, got {len(data)}")
    try:
        party_id = data[2:2 + n].decode("utf-8")
    except UnicodeDecodeError:
        raise DecodeError("party id is not utf-8")
    pos = 2 + n
    c = decode_scalar(group, data[pos:pos + group.scalar_size])
    pos += group.scalar_size
    s = decode_scalar(group, data[pos:pos + group.scalar_size])
    pos += group.scalar_size
    R = decode_element(group, data[pos:pos + group.element_size])
    pos += group.element_size
    T = decode_element(group, data[pos:pos + group.element_size])
    return party_id, c, s, R, T


@dataclass(frozen=True)
class PreSignature:
    party_id: str
    c: Scalar
    s_pre: Scalar
    R: GroupElement
    T: GroupElement

    def to_bytes(self) -> bytes:
        return _pack(self.party_id, self.c, self.s_pre, self.R, self.T)

    @classmethod
    def from_bytes(cls, group: Group, data: bytes) -> "PreSignature":
        return cls(*_unpack(group, data))


@dataclass(frozen=True)
class FullSignature:
    party_id: str
    c: Scalar
    s: Scalar
    R: GroupElement
    T: GroupElement

    def to_bytes(self) -> bytes:
        return _pack(self.party_id, self.c, self.s, self.R, self.T)

    @classmethod
    def from_bytes(cls, group: Group, data: bytes) -> "FullSignature":
        return cls(*_unpack(group, data))


class NonceTracker:
    """Records consumed nonce points; owned by a session engine."""

    def __init__(self):
        self._used: Set[bytes] = set()
        self._lock = threading.Lock()

    def consume(self, nonce: NoncePair) -> None:
        key = nonce.R.to_bytes()
        with self._lock:
            if key in self._used:
                raise NonceReuse(f"nonce {key.hex()[:16]} already used")
            self._used.add(key)

    def is_consumed(self, nonce: NoncePair) -> bool:
        key = nonce.R.to_bytes()
        with self._lock:
            return key in self._used


def compute_challenge(
    R: GroupElement,
    T: GroupElement,
    pk: GroupElement,
    acc_keys,
    acc_msgs,
    m: bytes,
    mode: ChallengeMode = ChallengeMode.RING,
) -> Scalar:
    """c = H(R + T ∥ A_i ∥ Acc_A ∥ Acc_m ∥ m_i).

    In PAIR mode the accumulator digests are left out: c = H(R + T ∥ A ∥ m).
    """
    if mode is ChallengeMode.RING:
        if acc_keys is None or acc_msgs is None:
            raise ValueError("ring challenges need both accumulator digests")
        parts = [b"ring", (R + T).to_bytes(), pk.to_bytes(),
                 acc_keys.to_bytes(), acc_msgs.to_bytes(), bytes(m)]
    else:
        parts = [b"pair", (R + T).to_bytes(), pk.to_bytes(), bytes(m)]
    return hash_to_scalar(R.group, CHALLENGE_TAG, parts)


def pre_sign(
    kp: KeyPair,
    nonce: NoncePair,
    c: Scalar,
    tracker: Optional[NonceTracker] = None,
) -> Scalar:
    """s' = r + c·a."""
    if tracker is not None:
        tracker.consume(nonce)
    return nonce.r + c * kp.sk


def pre_verify(ps: PreSignature, pk: GroupElement) -> bool:
    G = pk.group.generator
    return point_mul(ps.s_pre, G) == ps.R + point_mul(ps.c, pk)


def adapt(s_pre: Scalar, t: Scalar) -> Scalar:
    return s_pre + t


def complete(ps: PreSignature, t: Scalar) -> FullSignature:
    return FullSignature(ps.party_id, ps.c, adapt(ps.s_pre, t), ps.R, ps.T)


def verify_full(fs: FullSignature, pk: GroupElement) -> bool:
    G = pk.group.generator
    return point_mul(fs.s, G) == fs.R + fs.T + point_mul(fs.c, pk)


def extract_secret(s_full: Scalar, s_pre: Scalar) -> Scalar:
    return s_full - s_pre
