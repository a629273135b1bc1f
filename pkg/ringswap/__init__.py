"""
ringswap - Multi-party atomic swaps with universal adaptor signatures
Schnorr and ECDSA adaptor signatures, an RSA multiset accumulator and a
deterministic multi-chain simulator for adversarial swap scenarios.
"""

__version__ = "1.0.0"
