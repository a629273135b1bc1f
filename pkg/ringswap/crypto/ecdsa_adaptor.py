"""
ECDSA-based adaptor signatures: pSign, pVrfy, Adapt and Ext.

Conventions:
- f(P) is the integer form of P (x-coordinate on the curve) reduced mod q.
- h(m) = hash_to_scalar("ecdsa/msg/v1", m).
- Signatures are not low-s normalized; Ext needs the exact s.

The statement proof is a Fiat-Shamir Schnorr proof and the pre-signing proof is
Chaum-Pedersen. Both extract by rewinding, not straight-line.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

from ..errors import DecodeError, InvalidStatement, ZeroWitness
from .group import (
    Group,
    GroupElement,
    Scalar,
    as_seed,
    decode_element,
    decode_scalar,
    hash_to_scalar,
    point_add,
    point_mul,
    scalar_random,
)
from .nizk import DleqProof, DlogProof, dleq_prove, dleq_verify, dlog_prove, dlog_verify

logger = logging.getLogger(__name__)

MSG_TAG = "ecdsa/msg/v1"


def f(P: GroupElement) -> Scalar:
    return P.group.scalar(P.to_int())


def h(group: Group, m: bytes) -> Scalar:
    return hash_to_scalar(group, MSG_TAG, [bytes(m)])


@dataclass(frozen=True)
class EcdsaKeyPair:
    x: Scalar
    Q: GroupElement

    @classmethod
    def generate(cls, group: Group, seed: Union[str, bytes]) -> "EcdsaKeyPair":
        x = scalar_random(group, b"ecdsa-key/" + as_seed(seed))
        if x.is_zero():
            x = group.scalar(1)
        return cls(x, point_mul(x, group.generator))


@dataclass(frozen=True)
class Statement:
    """Public instance I_Y = (Y, π_Y)."""
    Y: GroupElement
    pok_Y: DlogProof


@dataclass(frozen=True)
class StatementWitness:
    Y: GroupElement
    pok_Y: DlogProof
    y: Scalar

    @property
    def statement(self) -> Statement:
        return Statement(self.Y, self.pok_Y)


@dataclass(frozen=True)
class EcdsaPreSignature:
    r: Scalar
    s_hat: Scalar
    Z: GroupElement
    dleq: DleqProof

    def to_bytes(self) -> bytes:
        return self.r.to_bytes() + self.s_hat.to_bytes() + self.Z.to_bytes() + self.dleq.to_bytes()

    @classmethod
    def from_bytes(cls, group: Group, data: bytes) -> "EcdsaPreSignature":
        s, e = group.scalar_size, group.element_size
        if len(data) < 2 * s + e:
            raise DecodeError("pre-signature truncated")
        return cls(
            decode_scalar(group, data[:s]),
            decode_scalar(group, data[s:2 * s]),
            decode_element(group, data[2 * s:2 * s + e]),
            DleqProof.from_bytes(group, data[2 * s + e:]),
        )


@dataclass(frozen=True)
class EcdsaSignature:
    r: Scalar
    s: Scalar

    def to_bytes(self) -> bytes:
        return self.r.to_bytes() + self.s.to_bytes()

    @classmethod
    def from_bytes(cls, group: Group, data: bytes) -> "EcdsaSignature":
        s = group.scalar_size
        if len(data) != 2 * s:
            raise DecodeError("signature has the wrong length")
        return cls(decode_scalar(group, data[:s]), decode_scalar(group, data[s:]))


def gen_statement_witness(group: Group, seed: Union[str, bytes]) -> StatementWitness:
    """GenR: a hard-relation pair ((G, Y = y·G), y) with a proof of knowledge of y."""
    y = scalar_random(group, b"statement/" + as_seed(seed))
    if y.is_zero():
        y = group.scalar(1)
    Y = point_mul(y, group.generator)
    return StatementWitness(Y, dlog_prove(y, Y, seed), y)


def p_sign(
    kp: EcdsaKeyPair,
    m: bytes,
    stmt: Statement,
    seed: Union[str, bytes] = b"",
) -> EcdsaPreSignature:
    group = kp.Q.group
    G = group.generator
    if not dlog_verify(stmt.Y, stmt.pok_Y):
        raise InvalidStatement("statement proof of knowledge does not verify")
    Z = point_mul(kp.x, stmt.Y)
    proof = dleq_prove(kp.x, G, kp.Q, stmt.Y, Z, seed)
    hm = h(group, m)
    counter = 0
    while True:
        parts = [kp.x.to_bytes(), bytes(m), stmt.Y.to_bytes(), as_seed(seed),
                 counter.to_bytes(4, "big")]
        k = hash_to_scalar(group, "ecdsa/nonce/v1", parts)
        counter += 1
        if k.is_zero():
            continue
        r = f(point_mul(k, stmt.Y))
        if r.is_zero():
            continue
        s_hat = k.inverse() * (hm + r * kp.x)
        if s_hat.is_zero():
            continue
        if counter > 1:
            logger.debug("p_sign resampled k %d time(s)", counter - 1)
        return EcdsaPreSignature(r, s_hat, Z, proof)


def p_vrfy(Q: GroupElement, m: bytes, stmt: Statement, presig: EcdsaPreSignature) -> bool:
    group = Q.group
    if not dleq_verify(group.generator, Q, stmt.Y, presig.Z, presig.dleq):
        return False
    if presig.r.is_zero() or presig.s_hat.is_zero():
        return False
    w = presig.s_hat.inverse()
    K = point_mul(w * h(group, m), stmt.Y) + point_mul(w * presig.r, presig.Z)
    if K.is_identity():
        return False
    return f(K) == presig.r


def adapt_ecdsa(presig: EcdsaPreSignature, y: Scalar) -> EcdsaSignature:
    if y.is_zero():
        raise ZeroWitness("adaptor witness must be non-zero")
    return EcdsaSignature(presig.r, presig.s_hat * y.inverse())


def ext(sig: EcdsaSignature, presig: EcdsaPreSignature, stmt: Statement) -> Optional[Scalar]:
    """Recover y = ŝ / s, or None when (Y, y) is not in the relation."""
    if sig.s.is_zero():
        return None
    y = presig.s_hat * sig.s.inverse()
    if point_mul(y, stmt.Y.group.generator) != stmt.Y:
        return None
    return y


def ecdsa_verify(Q: GroupElement, m: bytes, sig: EcdsaSignature) -> bool:
    group = Q.group
    if sig.r.is_zero() or sig.s.is_zero():
        return False
    w = sig.s.inverse()
    K = point_add(point_mul(h(group, m) * w, group.generator), point_mul(sig.r * w, Q))
    if K.is_identity():
        return False
    return f(K) == sig.r


# ============================================================
# FUZZ CORPUS FORMAT
# ============================================================

def format_corpus_line(sig: EcdsaSignature, presig: EcdsaPreSignature, stmt: Statement) -> str:
    """One case per line: ``<sig hex> <presig hex> <Y hex>``."""
    return " ".join([sig.to_bytes().hex(), presig.to_bytes().hex(), stmt.Y.to_bytes().hex()])


def parse_corpus_line(
    group: Group, line: str
) -> Tuple[EcdsaSignature, EcdsaPreSignature, GroupElement]:
    fields: List[str] = line.split()
    if len(fields) != 3:
        raise DecodeError("corpus line needs three fields")
    try:
        raw = [bytes.fromhex(field) for field in fields]
    except ValueError:
        raise DecodeError("corpus line is not hex")
    return (
        EcdsaSignature.from_bytes(group, raw[0]),
        EcdsaPreSignature.from_bytes(group, raw[1]),
        decode_element(group, raw[2]),
    )
