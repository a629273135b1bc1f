"""
Cryptographic building blocks for ringswap.
"""

from .group import Group, GroupElement, Scalar, get_group, group_from_id
from .schnorr import (
    AdaptorSecret,
    ChallengeMode,
    FullSignature,
    KeyPair,
    NoncePair,
    PreSignature,
    complete,
    compute_challenge,
    extract_secret,
    pre_sign,
    pre_verify,
    verify_full,
)
from .ecdsa_adaptor import adapt_ecdsa, ext, gen_statement_witness, p_sign, p_vrfy
from .primes import hash_to_prime, is_probable_prime
from .accumulator import AccumulatorManager, RsaAccumulator, RsaParams, setup

__all__ = [
    'Group',
    'GroupElement',
    'Scalar',
    'get_group',
    'group_from_id',
    'AdaptorSecret',
    'ChallengeMode',
    'FullSignature',
    'KeyPair',
    'NoncePair',
    'PreSignature',
    'complete',
    'compute_challenge',
    'extract_secret',
    'pre_sign',
    'pre_verify',
    'verify_full',
    'adapt_ecdsa',
    'ext',
    'gen_statement_witness',
    'p_sign',
    'p_vrfy',
    'hash_to_prime',
    'is_probable_prime',
    'AccumulatorManager',
    'RsaAccumulator',
    'RsaParams',
    'setup',
]
