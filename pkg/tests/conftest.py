"""Shared fixtures: small groups and accumulators for fast protocol tests."""

import pytest

from ringswap.config import BUILTIN_ACCUMULATORS
from ringswap.crypto.accumulator import RsaAccumulator, RsaParams
from ringswap.crypto.group import get_group
from ringswap.scenario import build_world
from ringswap.session import session_init

# Hand-checkable accumulator: N = 11 * 17, g = 3, element hashes fixed by table.
HAND_PRIMES = {
    b"five": 5,
    b"seven": 7,
    b"eleven": 11,
    b"thirteen": 13,
    b"nineteen": 19,
}


@pytest.fixture(scope="session")
def tiny():
    return get_group("tiny", 16)


@pytest.fixture(scope="session")
def secp():
    return get_group("production")


@pytest.fixture(scope="session")
def toy_acc():
    return BUILTIN_ACCUMULATORS["toy"].accumulator()


@pytest.fixture(scope="session")
def hand_acc():
    params = RsaParams(N=187, g=3, prime_bits=8, mr_rounds=20)
    return RsaAccumulator(params, element_hash=lambda data: HAND_PRIMES[data])


@pytest.fixture
def make_world(tiny, toy_acc):
    """Build an N-party world on the tiny group with the toy accumulator."""
    def _make(n=3, seed="fixture", group=None, accumulator=None, **kwargs):
        return build_world(n, group or tiny, accumulator or toy_acc, seed, **kwargs)
    return _make


@pytest.fixture
def make_sessions():
    """Open one session per party of a world."""
    def _make(world, seed="fixture"):
        return {
            p.party_id: session_init(
                world.terms, world.infra, world.keypairs[p.party_id], p.party_id, f"{seed}/{p.party_id}"
            )
            for p in world.terms.parties
        }
    return _make
