"""
Fiat-Shamir proofs over the prime-order group.

- DlogProof: Schnorr proof of knowledge of y with Y = y·G.
- DleqProof: Chaum-Pedersen proof that (G -> Q) and (Y -> Z) share one exponent.

Proof nonces are derived from the witness, the statement and a caller seed, so proofs
are reproducible under a fixed seed.
"""

from dataclasses import dataclass
from typing import Union

from ..errors import DecodeError
from .group import (
    Group,
    GroupElement,
    Scalar,
    as_seed,
    decode_element,
    decode_scalar,
    hash_to_scalar,
    point_mul,
)

DLOG_TAG = "dlog/v1"
DLEQ_TAG = "dleq/v1"


@dataclass(frozen=True)
class DlogProof:
    A: GroupElement
    c: Scalar
    z: Scalar

    def to_bytes(self) -> bytes:
        return self.A.to_bytes() + self.c.to_bytes() + self.z.to_bytes()

    @classmethod
    def from_bytes(cls, group: Group, data: bytes) -> "DlogProof":
        e, s = group.element_size, group.scalar_size
        if len(data) != e + 2 * s:
            raise DecodeError("dlog proof has the wrong length")
        return cls(
            decode_element(group, data[:e]),
            decode_scalar(group, data[e:e + s]),
            decode_scalar(group, data[e + s:]),
        )


@dataclass(frozen=True)
class DleqProof:
    A1: GroupElement
    A2: GroupElement
    c: Scalar
    z: Scalar

    def to_bytes(self) -> bytes:
        return self.A1.to_bytes() + self.A2.to_bytes() + self.c.to_bytes() + self.z.to_bytes()

    @classmethod
    def from_bytes(cls, group: Group, data: bytes) -> "DleqProof":
        e, s = group.element_size, group.scalar_size
        if len(data) != 2 * e + 2 * s:
            raise DecodeError("dleq proof has the wrong length")
        return cls(
            decode_element(group, data[:e]),
            decode_element(group, data[e:2 * e]),
            decode_scalar(group, data[2 * e:2 * e + s]),
            decode_scalar(group, data[2 * e + s:]),
        )


def dlog_prove(y: Scalar, Y: GroupElement, seed: Union[str, bytes] = b"") -> DlogProof:
    group = Y.group
    G = group.generator
    w = hash_to_scalar(group, "dlog/nonce/v1", [y.to_bytes(), Y.to_bytes(), as_seed(seed)])
    A = point_mul(w, G)
    c = hash_to_scalar(group, DLOG_TAG, [G.to_bytes(), Y.to_bytes(), A.to_bytes()])
    return DlogProof(A, c, w + c * y)


def dlog_verify(Y: GroupElement, proof: DlogProof) -> bool:
    group = Y.group
    G = group.generator
    c = hash_to_scalar(group, DLOG_TAG, [G.to_bytes(), Y.to_bytes(), proof.A.to_bytes()])
    if c != proof.c:
        return False
    return point_mul(proof.z, G) == proof.A + point_mul(proof.c, Y)


def _dleq_challenge(G, Q, Y, Z, A1, A2) -> Scalar:
    parts = [P.to_bytes() for P in (G, Q, Y, Z, A1, A2)]
    return hash_to_scalar(G.group, DLEQ_TAG, parts)


def dleq_prove(
    x: Scalar,
    G: GroupElement,
    Q: GroupElement,
    Y: GroupElement,
    Z: GroupElement,
    seed: Union[str, bytes] = b"",
) -> DleqProof:
    """Prove log_G(Q) == log_Y(Z) == x."""
    if point_mul(x, G) != Q or point_mul(x, Y) != Z:
        raise ValueError("x does not link (G, Q) and (Y, Z)")
    parts = [x.to_bytes()] + [P.to_bytes() for P in (G, Q, Y, Z)] + [as_seed(seed)]
    w = hash_to_scalar(G.group, "dleq/nonce/v1", parts)
    A1 = point_mul(w, G)
    A2 = point_mul(w, Y)
    c = _dleq_challenge(G, Q, Y, Z, A1, A2)
    return DleqProof(A1, A2, c, w + c * x)


def dleq_verify(
    G: GroupElement,
    Q: GroupElement,
    Y: GroupElement,
    Z: GroupElement,
    proof: DleqProof,
) -> bool:
    if _dleq_challenge(G, Q, Y, Z, proof.A1, proof.A2) != proof.c:
        return False
    return (
        point_mul(proof.z, G) == proof.A1 + point_mul(proof.c, Q)
        and point_mul(proof.z, Y) == proof.A2 + point_mul(proof.c, Z)
    )
