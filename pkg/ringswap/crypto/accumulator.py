"""
RSA multiset accumulator over the quotient group Z_N*/{±1}.

    [S] = g^(∏_{s∈S} H(s)) mod N,   H = hash_to_prime

Quotient-group elements are represented by the canonical integer in [1, N/2].
Witnesses are computed by re-exponentiating g over the prover's multiset, never by
taking roots. Batched insertions and removals come with Wesolowski-style proofs of
exponentiation whose prime challenge is a Fiat-Shamir hash of
(base digest, result digest, sorted element primes).
"""

import hashlib
import json
import logging
import math
import threading
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import gmpy2
import sympy

from ..errors import DecodeError, IsMember, NotMember
from .primes import hash_to_prime

logger = logging.getLogger(__name__)

POE_TAG = "poe/v1"

Element = Union[bytes, str]


def _elem(e: Element) -> bytes:
    return e.encode("utf-8") if isinstance(e, str) else bytes(e)


# ============================================================
# PARAMETERS
# ============================================================

@dataclass(frozen=True)
class RsaParams:
    N: int
    g: int
    prime_bits: int
    mr_rounds: int
    challenge_bits: int = 0

    def __post_init__(self):
        if self.N < 15:
            raise ValueError("modulus too small")
        if not 1 <= self.g <= self.N // 2:
            raise ValueError("g must be a canonical quotient-group element in [1, N/2]")
        if math.gcd(self.g, self.N) != 1:
            raise ValueError("g must be coprime to N")

    @property
    def size(self) -> int:
        return (self.N.bit_length() + 7) // 8

    @property
    def ell_bits(self) -> int:
        return self.challenge_bits or self.prime_bits

    def canonical(self, value: int) -> int:
        """Representative of ±value in [1, N/2]."""
        v = int(value) % self.N
        return min(v, self.N - v)

    def to_dict(self) -> Dict[str, int]:
        return {
            "N": self.N,
            "g": self.g,
            "prime_bits": self.prime_bits,
            "mr_rounds": self.mr_rounds,
            "challenge_bits": self.challenge_bits,
        }


def _seeded_prime(seed: bytes, label: bytes, bits: int) -> int:
    nbytes = (bits + 7) // 8
    raw = int.from_bytes(hashlib.shake_256(seed + b"/" + label).digest(nbytes), "big")
    raw >>= nbytes * 8 - bits
    raw |= 0b11 << (bits - 2)
    return int(sympy.nextprime(raw))


def setup(
    modulus_bits: int,
    seed: Union[str, bytes],
    prime_bits: int = 128,
    mr_rounds: int = 40,
    challenge_bits: int = 0,
) -> RsaParams:
    """Trusted setup: N = p·q from seeded primes; p and q are dropped on return."""
    if modulus_bits < 64:
        raise ValueError("modulus must be at least 64 bits")
    seed = _elem(seed)
    half = modulus_bits // 2
    p = _seeded_prime(seed, b"p", half)
    q = _seeded_prime(seed, b"q", modulus_bits - half)
    counter = 0
    while q == p:
        counter += 1
        q = _seeded_prime(seed, b"q" + str(counter).encode(), modulus_bits - half)
    N = p * q
    del p, q
    counter = 0
    while True:
        digest = hashlib.sha256(seed + b"/g/" + counter.to_bytes(4, "big")).digest()
        base = int.from_bytes(digest, "big") % N
        v = pow(base, 2, N)
        g = min(v, N - v)
        if g > 1 and math.gcd(g, N) == 1:
            break
        counter += 1
    return RsaParams(N, g, prime_bits, mr_rounds, challenge_bits)


# ============================================================
# MULTISETS
# ============================================================

class Multiset:
    """Immutable multiset of byte strings."""

    __slots__ = ("_counts",)

    def __init__(self, elements: Iterable[Element] = ()):
        self._counts = Counter(_elem(e) for e in elements)

    @classmethod
    def _from_counter(cls, counts: Counter) -> "Multiset":
        ms = cls()
        ms._counts = Counter({k: v for k, v in counts.items() if v > 0})
        return ms

    def count(self, e: Element) -> int:
        return self._counts.get(_elem(e), 0)

    def __contains__(self, e: Element) -> bool:
        return self.count(e) > 0

    def __len__(self) -> int:
        return sum(self._counts.values())

    def __iter__(self) -> Iterator[bytes]:
        for e in sorted(self._counts):
            for _ in range(self._counts[e]):
                yield e

    def __eq__(self, other) -> bool:
        return isinstance(other, Multiset) and self._counts == other._counts

    def __hash__(self) -> int:
        return hash(frozenset(self._counts.items()))

    def distinct(self) -> List[bytes]:
        return sorted(self._counts)

    def union(self, other: "Multiset") -> "Multiset":
        """Multiplicities add."""
        return Multiset._from_counter(self._counts + other._counts)

    def difference(self, other: "Multiset") -> "Multiset":
        """Multiplicities subtract, floored at zero."""
        return Multiset._from_counter(self._counts - other._counts)

    def includes(self, other: "Multiset") -> bool:
        return all(self._counts.get(k, 0) >= v for k, v in other._counts.items())

    def __repr__(self) -> str:
        return f"Multiset({len(self)} elements, {len(self._counts)} distinct)"


# ============================================================
# VALUES
# ============================================================

@dataclass(frozen=True)
class Digest:
    value: int
    size: int

    def to_bytes(self) -> bytes:
        return self.size.to_bytes(2, "big") + self.value.to_bytes(self.size, "big")

    def hex(self) -> str:
        return self.to_bytes().hex()


@dataclass(frozen=True)
class MembershipWitness:
    pi: int


@dataclass(frozen=True)
class NonMembershipWitness:
    a: int
    B: int


@dataclass(frozen=True)
class PoeProof:
    Q: int
    ell: int


@dataclass(frozen=True)
class MultiSwapProof:
    intermediate: Digest
    removal: Optional[PoeProof]
    insertion: Optional[PoeProof]


@dataclass
class ExponentMeter:
    """Verifier-side counter of exponent sizes."""
    max_exponent_bits: int = 0
    exponentiations: int = 0

    def record(self, exponent: int, exponentiation: bool = True) -> None:
        self.max_exponent_bits = max(self.max_exponent_bits, abs(exponent).bit_length())
        if exponentiation:
            self.exponentiations += 1


# ============================================================
# ACCUMULATOR
# ============================================================

class RsaAccumulator:
    """Stateless accumulator algebra for one parameter set.

    ``element_hash`` replaces hash_to_prime; it exists for hand-checkable toy tests.
    """

    def __init__(self, params: RsaParams, element_hash: Optional[Callable[[bytes], int]] = None):
        self.params = params
        self._element_hash = element_hash

    def hash_element(self, e: Element) -> int:
        data = _elem(e)
        if self._element_hash is not None:
            return self._element_hash(data)
        return hash_to_prime(data, self.params.prime_bits, self.params.mr_rounds)

    def _power(self, base: int, exponent: int) -> int:
        N = self.params.N
        if exponent < 0:
            base = int(gmpy2.invert(base, N))
            exponent = -exponent
        return int(gmpy2.powmod(base, exponent, N))

    def _wrap(self, value: int) -> Digest:
        return Digest(self.params.canonical(value), self.params.size)

    def exponent(self, S: Iterable[Element]) -> int:
        return math.prod(self.hash_element(e) for e in S)

    def digest(self, S: Iterable[Element]) -> Digest:
        return self._wrap(self._power(self.params.g, self.exponent(S)))

    def insert(self, d: Digest, elem: Element) -> Digest:
        return self._wrap(self._power(d.value, self.hash_element(elem)))

    # membership

    def prove_membership(self, S: Multiset, elem: Element) -> MembershipWitness:
        if elem not in S:
            raise NotMember(f"{_elem(elem)!r} is not in the multiset")
        rest = S.difference(Multiset([elem]))
        return MembershipWitness(self.digest(rest).value)

    def verify_membership(self, d: Digest, elem: Element, w: MembershipWitness) -> bool:
        if not 1 <= w.pi <= self.params.N // 2:
            return False
        return self.params.canonical(self._power(w.pi, self.hash_element(elem))) == d.value

    def prove_nonmembership(self, S: Multiset, elem: Element) -> NonMembershipWitness:
        x_star = self.exponent(S)
        h = self.hash_element(elem)
        g, a, b = gmpy2.gcdext(x_star, h)
        if g != 1:
            raise IsMember(f"{_elem(elem)!r} is in the multiset")
        B = self.params.canonical(self._power(self.params.g, int(b)))
        return NonMembershipWitness(int(a), B)

    def verify_nonmembership(self, d: Digest, elem: Element, w: NonMembershipWitness) -> bool:
        N = self.params.N
        if not 1 <= w.B <= N // 2 or math.gcd(w.B, N) != 1:
            return False
        if math.gcd(d.value, N) != 1:
            return False
        lhs = self._power(d.value, w.a) * self._power(w.B, self.hash_element(elem)) % N
        return self.params.canonical(lhs) == self.params.g

    # proofs of exponentiation

    def _challenge(self, base: Digest, result: Digest, primes: Sequence[int]) -> int:
        transcript = bytearray(base.to_bytes() + result.to_bytes())
        for p in sorted(primes):
            raw = p.to_bytes((p.bit_length() + 7) // 8, "big")
            transcript += len(raw).to_bytes(4, "big") + raw
        return hash_to_prime(bytes(transcript), self.params.ell_bits, self.params.mr_rounds, POE_TAG)

    def _prove_exponent(self, base: Digest, result: Digest, primes: Sequence[int]) -> PoeProof:
        ell = self._challenge(base, result, primes)
        x = math.prod(primes)
        return PoeProof(self.params.canonical(self._power(base.value, x // ell)), ell)

    def _verify_exponent(
        self,
        base: Digest,
        result: Digest,
        primes: Sequence[int],
        proof: PoeProof,
        meter: Optional[ExponentMeter],
    ) -> bool:
        if not 1 <= proof.Q <= self.params.N // 2:
            return False
        ell = self._challenge(base, result, primes)
        if ell != proof.ell:
            return False
        r = 1
        for p in primes:
            product = r * p
            if meter is not None:
                meter.record(product, exponentiation=False)
            r = product % ell
        if meter is not None:
            meter.record(ell)
            meter.record(r)
        lhs = self._power(proof.Q, ell) * self._power(base.value, r) % self.params.N
        return self.params.canonical(lhs) == result.value

    def batch_insert_prove(self, d: Digest, elems: Sequence[Element]) -> Tuple[Digest, PoeProof]:
        primes = [self.hash_element(e) for e in elems]
        d_new = self._wrap(self._power(d.value, math.prod(primes)))
        return d_new, self._prove_exponent(d, d_new, primes)

    def batch_insert_verify(
        self,
        d: Digest,
        d_new: Digest,
        elems: Sequence[Element],
        proof: PoeProof,
        meter: Optional[ExponentMeter] = None,
    ) -> bool:
        primes = [self.hash_element(e) for e in elems]
        return self._verify_exponent(d, d_new, primes, proof, meter)

    def batch_remove_prove(self, S: Multiset, elems: Sequence[Element]) -> Tuple[Digest, PoeProof]:
        removed = Multiset(elems)
        if not S.includes(removed):
            raise NotMember("removal exceeds the multiplicities held in the multiset")
        d = self.digest(S)
        d_new = self.digest(S.difference(removed))
        primes = [self.hash_element(e) for e in elems]
        return d_new, self._prove_exponent(d_new, d, primes)

    def batch_remove_verify(
        self,
        d: Digest,
        d_new: Digest,
        elems: Sequence[Element],
        proof: PoeProof,
        meter: Optional[ExponentMeter] = None,
    ) -> bool:
        primes = [self.hash_element(e) for e in elems]
        return self._verify_exponent(d_new, d, primes, proof, meter)

    # multiswap

    def multiswap(
        self, S: Multiset, swaps: Sequence[Tuple[Element, Element]]
    ) -> Tuple[Multiset, Digest, MultiSwapProof]:
        """Remove every x_i, then insert every y_i: S_t = S ∖ {x_i} ∪ {y_i}."""
        d = self.digest(S)
        if not swaps:
            return S, d, MultiSwapProof(d, None, None)
        xs = [x for x, _ in swaps]
        ys = [y for _, y in swaps]
        middle, removal = self.batch_remove_prove(S, xs)
        d_new, insertion = self.batch_insert_prove(middle, ys)
        S_t = S.difference(Multiset(xs)).union(Multiset(ys))
        return S_t, d_new, MultiSwapProof(middle, removal, insertion)

    def verify_multiswap(
        self,
        d: Digest,
        d_new: Digest,
        swaps: Sequence[Tuple[Element, Element]],
        proof: MultiSwapProof,
    ) -> bool:
        if not swaps:
            return d == d_new and proof.removal is None and proof.insertion is None
        if proof.removal is None or proof.insertion is None:
            return False
        xs = [x for x, _ in swaps]
        ys = [y for _, y in swaps]
        return (
            self.batch_remove_verify(d, proof.intermediate, xs, proof.removal)
            and self.batch_insert_verify(proof.intermediate, d_new, ys, proof.insertion)
        )


# ============================================================
# MANAGER
# ============================================================

def _log_line(op: str, digest: Digest, **fields) -> str:
    record = {"op": op, "digest": digest.hex(), **fields}
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


class AccumulatorManager:
    """Single writer over one multiset.

    Every mutation goes through one lock and appends one line to the event log;
    readers only ever see immutable ``Digest`` snapshots.
    """

    def __init__(self, accumulator: RsaAccumulator, name: str = "acc"):
        self.accumulator = accumulator
        self.name = name
        self._multiset = Multiset()
        self._digest = accumulator.digest(self._multiset)
        self._log: List[str] = []
        self._lock = threading.Lock()

    @property
    def digest(self) -> Digest:
        return self._digest

    @property
    def multiset(self) -> Multiset:
        return self._multiset

    def log_lines(self) -> List[str]:
        return list(self._log)

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for line in self._log:
                handle.write(line + "\n")

    def insert(self, elem: Element) -> Digest:
        with self._lock:
            self._multiset = self._multiset.union(Multiset([elem]))
            self._digest = self.accumulator.insert(self._digest, elem)
            self._log.append(_log_line("insert", self._digest, elements=[_elem(elem).hex()]))
            logger.debug("%s: inserted element, %d held", self.name, len(self._multiset))
            return self._digest

    def batch_insert(self, elems: Sequence[Element]) -> Tuple[Digest, PoeProof]:
        with self._lock:
            d_new, proof = self.accumulator.batch_insert_prove(self._digest, elems)
            self._multiset = self._multiset.union(Multiset(elems))
            self._digest = d_new
            self._log.append(
                _log_line("batch_insert", d_new, elements=[_elem(e).hex() for e in elems])
            )
            return d_new, proof

    def batch_remove(self, elems: Sequence[Element]) -> Tuple[Digest, PoeProof]:
        with self._lock:
            d_new, proof = self.accumulator.batch_remove_prove(self._multiset, elems)
            self._multiset = self._multiset.difference(Multiset(elems))
            self._digest = d_new
            self._log.append(
                _log_line("batch_remove", d_new, elements=[_elem(e).hex() for e in elems])
            )
            return d_new, proof

    def multiswap(self, swaps: Sequence[Tuple[Element, Element]]) -> Tuple[Digest, MultiSwapProof]:
        with self._lock:
            S_t, d_new, proof = self.accumulator.multiswap(self._multiset, swaps)
            self._multiset = S_t
            self._digest = d_new
            pairs = [[_elem(x).hex(), _elem(y).hex()] for x, y in swaps]
            self._log.append(_log_line("multiswap", d_new, pairs=pairs))
            return d_new, proof

    def witness(self, elem: Element) -> MembershipWitness:
        return self.accumulator.prove_membership(self._multiset, elem)

    def nonmember_witness(self, elem: Element) -> NonMembershipWitness:
        return self.accumulator.prove_nonmembership(self._multiset, elem)


def replay_log(accumulator: RsaAccumulator, lines: Iterable[str], name: str = "acc") -> AccumulatorManager:
    """Rebuild a manager from its event log, checking every recorded digest."""
    manager = AccumulatorManager(accumulator, name)
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            op = record["op"]
            if op == "multiswap":
                pairs = [(bytes.fromhex(x), bytes.fromhex(y)) for x, y in record["pairs"]]
            else:
                elems = [bytes.fromhex(e) for e in record["elements"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise DecodeError(f"log line {number}: {exc}")
        if op == "insert" and len(elems) == 1:
            manager.insert(elems[0])
        elif op == "batch_insert":
            manager.batch_insert(elems)
        elif op == "batch_remove":
            manager.batch_remove(elems)
        elif op == "multiswap":
            manager.multiswap(pairs)
        else:
            raise DecodeError(f"log line {number}: unknown operation {op!r}")
        if manager.digest.hex() != record["digest"]:
            raise DecodeError(f"log line {number}: digest does not match replay")
    return manager
