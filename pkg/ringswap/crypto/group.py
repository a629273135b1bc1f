"""
Prime-order group arithmetic, hashing and canonical encodings.

Two group profiles share one interface:

- ``production``: secp256k1, arithmetic from python-ecdsa. Points are encoded
  compressed (33 bytes, 0x02/0x03 prefix and big-endian x); the identity is 33 zero
  bytes.
- ``tiny``: the order-q subgroup of Z_p* for a safe prime p = 2q + 1, generator 4.
  Elements are encoded as fixed-length big-endian integers in [1, p).

Scalars are always reduced mod q and encoded fixed-length big-endian.
"""

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import sympy
from ecdsa import SECP256k1, numbertheory
from ecdsa.ellipticcurve import PointJacobi

from ..errors import DecodeError


@dataclass(frozen=True)
class GroupDescription:
    """Public description of a group: id tag, prime order and generator encoding."""
    id: str
    order_q: int
    generator_G: bytes

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "order_q": str(self.order_q), "generator_G": self.generator_G.hex()}


class Group:
    """Base class for a cyclic group of prime order ``order_q``.

    Subclasses work on a raw representation; callers only see ``GroupElement``
    and ``Scalar`` values.
    """

    id: str = ""
    order_q: int = 0
    element_size: int = 0

    @property
    def scalar_size(self) -> int:
        return (self.order_q.bit_length() + 7) // 8

    @property
    def generator(self) -> "GroupElement":
        return GroupElement(self, self._generator_raw())

    @property
    def identity(self) -> "GroupElement":
        return GroupElement(self, self._identity_raw())

    def describe(self) -> GroupDescription:
        return GroupDescription(self.id, self.order_q, self.generator.to_bytes())

    def scalar(self, value: int) -> "Scalar":
        return Scalar(value % self.order_q, self.order_q)

    # raw hooks
    def _generator_raw(self):
        raise NotImplementedError

    def _identity_raw(self):
        raise NotImplementedError

    def _add(self, a, b):
        raise NotImplementedError

    def _mul(self, k: int, a):
        raise NotImplementedError

    def _neg(self, a):
        raise NotImplementedError

    def _encode(self, a) -> bytes:
        raise NotImplementedError

    def _decode(self, data: bytes):
        raise NotImplementedError

    def _to_int(self, a) -> int:
        """Integer used by the ECDSA conversion function f."""
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        return isinstance(other, Group) and self.id == other.id

    def __hash__(self) -> int:
        return hash(self.id)

    def __repr__(self) -> str:
        return f"<Group {self.id}>"


class Secp256k1Group(Group):
    """secp256k1 with python-ecdsa doing the point arithmetic.

    Raw values are affine ``(x, y)`` tuples, ``None`` for the identity.
    """

    def __init__(self):
        self.id = "secp256k1"
        self.order_q = SECP256k1.order
        self.element_size = 33
        self._curve = SECP256k1.curve
        self._p = int(self._curve.p())
        self._g = SECP256k1.generator
        self._g_raw = (int(self._g.x()), int(self._g.y()))

    def _generator_raw(self):
        return self._g_raw

    def _identity_raw(self):
        return None

    def _jacobian(self, a) -> PointJacobi:
        if a == self._g_raw:
            return self._g
        return PointJacobi(self._curve, a[0], a[1], 1, self.order_q)

    def _add(self, a, b):
        if a is None:
            return b
        if b is None:
            return a
        if a[0] == b[0] and (a[1] + b[1]) % self._p == 0:
            return None
        total = self._jacobian(a) + self._jacobian(b)
        return (int(total.x()), int(total.y()))

    def _mul(self, k: int, a):
        k %= self.order_q
        if a is None or k == 0:
            return None
        product = self._jacobian(a) * k
        return (int(product.x()), int(product.y()))

    def _neg(self, a):
        if a is None:
            return None
        return (a[0], (-a[1]) % self._p)

    def _encode(self, a) -> bytes:
        if a is None:
            return bytes(33)
        return bytes([2 + (a[1] & 1)]) + a[0].to_bytes(32, "big")

    def _decode(self, data: bytes):
        if len(data) != 33:
            raise DecodeError(f"point encoding must be 33 bytes, got {len(data)}")
        if data == bytes(33):
            return None
        prefix = data[0]
        if prefix not in (2, 3):
            raise DecodeError(f"bad point prefix 0x{prefix:02x}")
        x = int.from_bytes(data[1:], "big")
        if x >= self._p:
            raise DecodeError("x coordinate not reduced")
        alpha = (pow(x, 3, self._p) + self._curve.a() * x + self._curve.b()) % self._p
        try:
            y = int(numbertheory.square_root_mod_prime(alpha, self._p))
        except numbertheory.Error:
            raise DecodeError("x coordinate is not on the curve")
        if (y & 1) != (prefix & 1):
            y = self._p - y
        if not self._curve.contains_point(x, y):
            raise DecodeError("point is not on the curve")
        return (x, y)

    def _to_int(self, a) -> int:
        return 0 if a is None else a[0]


class SchoolbookGroup(Group):
    """Order-q subgroup of Z_p* for a safe prime p = 2q + 1.

    Small enough for exhaustive checks of the protocol algebra.
    """

    def __init__(self, q: int, p: int, g: int = 4):
        if p != 2 * q + 1 or not sympy.isprime(q) or not sympy.isprime(p):
            raise ValueError(f"({q}, {p}) is not a safe-prime pair")
        if g % p in (0, 1) or pow(g, q, p) != 1:
            raise ValueError(f"{g} does not generate the order-{q} subgroup")
        self.id = f"schoolbook-{q}"
        self.order_q = q
        self.p = p
        self.g = g
        self.element_size = (p.bit_length() + 7) // 8

    def _generator_raw(self):
        return self.g

    def _identity_raw(self):
        return 1

    def _add(self, a, b):
        return (a * b) % self.p

    def _mul(self, k: int, a):
        return pow(a, k % self.order_q, self.p)

    def _neg(self, a):
        return pow(a, -1, self.p)

    def _encode(self, a) -> bytes:
        return a.to_bytes(self.element_size, "big")

    def _decode(self, data: bytes):
        if len(data) != self.element_size:
            raise DecodeError(
                f"element encoding must be {self.element_size} bytes, got {len(data)}"
            )
        value = int.from_bytes(data, "big")
        if not 1 <= value < self.p:
            raise DecodeError("element out of range")
        if pow(value, self.order_q, self.p) != 1:
            raise DecodeError("element is outside the prime-order subgroup")
        return value

    def _to_int(self, a) -> int:
        return a


@lru_cache(maxsize=None)
def safe_prime_pair(bits: int) -> Tuple[int, int]:
    """Smallest safe-prime pair (q, 2q + 1) with q above 2**bits."""
    q = sympy.nextprime(1 << bits)
    while not sympy.isprime(2 * q + 1):
        q = sympy.nextprime(q)
    return int(q), int(2 * q + 1)


@lru_cache(maxsize=None)
def schoolbook_group(q: int) -> SchoolbookGroup:
    return SchoolbookGroup(q, 2 * q + 1)


@lru_cache(maxsize=None)
def get_group(profile: str = "production", tiny_bits: int = 16) -> Group:
    """Group singleton for a profile name."""
    if profile == "production":
        return Secp256k1Group()
    if profile == "tiny":
        if not 16 <= tiny_bits <= 31:
            raise ValueError("tiny group size must be between 16 and 31 bits")
        q, _ = safe_prime_pair(tiny_bits)
        return schoolbook_group(q)
    raise ValueError(f"unknown group profile: {profile}")


# ============================================================
# VALUES
# ============================================================

@dataclass(frozen=True)
class Scalar:
    """Integer mod q, always stored reduced."""
    value: int
    order: int

    def __post_init__(self):
        if not 0 <= self.value < self.order:
            raise ValueError(f"scalar {self.value} not reduced mod {self.order}")

    def _coerce(self, other: Union["Scalar", int]) -> int:
        if isinstance(other, Scalar):
            if other.order != self.order:
                raise ValueError("scalars from different fields")
            return other.value
        return other

    def __add__(self, other):
        return Scalar((self.value + self._coerce(other)) % self.order, self.order)

    def __sub__(self, other):
        return Scalar((self.value - self._coerce(other)) % self.order, self.order)

    def __mul__(self, other):
        if isinstance(other, GroupElement):
            return NotImplemented
        return Scalar((self.value * self._coerce(other)) % self.order, self.order)

    def __neg__(self):
        return Scalar((-self.value) % self.order, self.order)

    def __int__(self) -> int:
        return self.value

    def is_zero(self) -> bool:
        return self.value == 0

    def inverse(self) -> "Scalar":
        if self.value == 0:
            raise ZeroDivisionError("zero scalar has no inverse")
        return Scalar(pow(self.value, -1, self.order), self.order)

    def to_bytes(self) -> bytes:
        return self.value.to_bytes((self.order.bit_length() + 7) // 8, "big")

    def __repr__(self) -> str:
        return f"Scalar({self.value:#x})"


@dataclass(frozen=True)
class GroupElement:
    """Immutable group element; the raw value is owned by its group."""
    group: Group
    raw: object

    def __add__(self, other: "GroupElement") -> "GroupElement":
        return point_add(self, other)

    def __neg__(self) -> "GroupElement":
        return GroupElement(self.group, self.group._neg(self.raw))

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        return point_add(self, -other)

    def __rmul__(self, k: Union[Scalar, int]) -> "GroupElement":
        return point_mul(k, self)

    def is_identity(self) -> bool:
        return self.raw == self.group._identity_raw()

    def to_bytes(self) -> bytes:
        return self.group._encode(self.raw)

    def to_int(self) -> int:
        return self.group._to_int(self.raw)

    def __repr__(self) -> str:
        return f"GroupElement({self.to_bytes().hex()[:16]}…)"


# ============================================================
# OPERATIONS
# ============================================================

def point_mul(k: Union[Scalar, int], P: GroupElement) -> GroupElement:
    """k·P."""
    value = k.value if isinstance(k, Scalar) else k
    return GroupElement(P.group, P.group._mul(value, P.raw))


def point_add(P: GroupElement, Q: GroupElement) -> GroupElement:
    """P + Q."""
    if P.group != Q.group:
        raise ValueError("points from different groups")
    return GroupElement(P.group, P.group._add(P.raw, Q.raw))


def length_prefixed(tag: str, parts: Sequence[bytes]) -> bytes:
    """Tag and parts, each preceded by its 8-byte big-endian length."""
    out = bytearray()
    for chunk in (tag.encode("utf-8"), *parts):
        out += len(chunk).to_bytes(8, "big")
        out += chunk
    return bytes(out)


def hash_to_scalar(group: Group, domain_tag: str, parts: Sequence[bytes]) -> Scalar:
    """Domain-separated, length-prefixed hash into Z_q.

    Two SHA-512 blocks are reduced mod q, so the bias is negligible for every profile.
    """
    if not domain_tag:
        raise ValueError("domain tag must be non-empty")
    data = length_prefixed(domain_tag, parts)
    wide = hashlib.sha512(b"\x00" + data).digest() + hashlib.sha512(b"\x01" + data).digest()
    return group.scalar(int.from_bytes(wide, "big"))


def scalar_random(group: Group, rng_seed: bytes) -> Scalar:
    """Deterministic uniform-looking scalar derived from a seed."""
    if not rng_seed:
        raise ValueError("seed must be non-empty")
    return hash_to_scalar(group, "scalar/random/v1", [rng_seed])


def encode(x: Union[Scalar, GroupElement]) -> bytes:
    return x.to_bytes()


def decode_scalar(group: Group, data: bytes) -> Scalar:
    if len(data) != group.scalar_size:
        raise DecodeError(f"scalar encoding must be {group.scalar_size} bytes, got {len(data)}")
    value = int.from_bytes(data, "big")
    if value >= group.order_q:
        raise DecodeError("scalar not reduced mod q")
    return Scalar(value, group.order_q)


def decode_element(group: Group, data: bytes) -> GroupElement:
    return GroupElement(group, group._decode(bytes(data)))


def as_seed(seed: Union[str, bytes]) -> bytes:
    return seed.encode("utf-8") if isinstance(seed, str) else bytes(seed)


def group_from_id(group_id: str) -> Optional[Group]:
    """Resolve a ``GroupDescription.id`` back to a group; None if it names no known group."""
    if group_id == "secp256k1":
        return get_group("production")
    if group_id.startswith("schoolbook-"):
        try:
            return schoolbook_group(int(group_id.split("-", 1)[1]))
        except ValueError:
            return None
    return None
