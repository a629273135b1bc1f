"""
Hashing to primes by counter-based rejection sampling and Miller-Rabin.
"""

import hashlib
from functools import lru_cache
from typing import Union

import sympy

_SMALL_PRIMES = tuple(int(p) for p in sympy.primerange(3, 256))


def _expand(data: bytes, bits: int) -> int:
    """SHAKE-256 output of exactly ``bits`` bits, top and bottom bit forced."""
    nbytes = (bits + 7) // 8
    value = int.from_bytes(hashlib.shake_256(data).digest(nbytes), "big")
    value >>= nbytes * 8 - bits
    return value | (1 << (bits - 1)) | 1


def is_probable_prime(n: int, rounds: int) -> bool:
    """Miller-Rabin with bases derived from n itself, so the answer is reproducible."""
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    seed = n.to_bytes((n.bit_length() + 7) // 8, "big")
    for i in range(rounds):
        digest = hashlib.sha256(b"mr/base/v1" + i.to_bytes(4, "big") + seed).digest()
        a = 2 + int.from_bytes(digest, "big") % (n - 3)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


@lru_cache(maxsize=65536)
def hash_to_prime(
    elem: Union[bytes, str],
    bits: int = 128,
    rounds: int = 40,
    tag: str = "acc/element/v1",
) -> int:
    """Deterministic prime of exactly ``bits`` bits for ``elem``."""
    if bits < 3:
        raise ValueError("primes need at least 3 bits")
    data = elem.encode("utf-8") if isinstance(elem, str) else bytes(elem)
    prefix = len(tag).to_bytes(2, "big") + tag.encode("utf-8") + len(data).to_bytes(8, "big") + data
    counter = 0
    while True:
        candidate = _expand(prefix + counter.to_bytes(8, "big"), bits)
        if is_probable_prime(candidate, rounds):
            return candidate
        counter += 1
