"""
Run configuration and named profiles.

A run config is a YAML mapping:

    group: tiny              # production | tiny | <custom profile>
    accumulator: toy         # realistic | toy | <custom profile>
    parties: 3
    behaviors:
      carol: dropout-after-finalize
    seed: demo-1
    expect: AllCompleted
    transcript: out/demo-1.jsonl

Profiles named anywhere are looked up in $RINGSWAP_PROFILE_DIR/<name>.yaml first, then
among the built-ins. A profile file holds a ``group:`` or an ``accumulator:`` mapping.
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .adversary import Behavior, Verdict
from .crypto.accumulator import RsaAccumulator, RsaParams, setup
from .crypto.group import Group, get_group
from .crypto.schnorr import ChallengeMode
from .errors import ConfigError

logger = logging.getLogger(__name__)

PROFILE_DIR_ENV = "RINGSWAP_PROFILE_DIR"


@dataclass(frozen=True)
class GroupProfile:
    name: str
    kind: str = "production"
    tiny_bits: int = 16

    def group(self) -> Group:
        try:
            return get_group(self.kind, self.tiny_bits)
        except ValueError as exc:
            raise ConfigError(f"group profile {self.name}: {exc}")


@dataclass(frozen=True)
class AccumulatorProfile:
    name: str
    modulus_bits: int = 2048
    prime_bits: int = 128
    security_bits: int = 128
    mr_rounds: Optional[int] = None
    challenge_bits: int = 0
    setup_seed: str = ""

    @property
    def rounds(self) -> int:
        """Miller-Rabin rounds; ⌈λ/2⌉ unless the profile fixes them."""
        if self.mr_rounds is not None:
            return self.mr_rounds
        return math.ceil(self.security_bits / 2)

    def params(self) -> RsaParams:
        return _setup_cached(
            self.modulus_bits,
            self.setup_seed or f"ringswap/setup/{self.name}",
            self.prime_bits,
            self.rounds,
            self.challenge_bits,
        )

    def accumulator(self) -> RsaAccumulator:
        return RsaAccumulator(self.params())


@lru_cache(maxsize=16)
def _setup_cached(modulus_bits: int, seed: str, prime_bits: int, rounds: int, challenge_bits: int) -> RsaParams:
    logger.debug("running accumulator setup: %d-bit modulus", modulus_bits)
    try:
        return setup(modulus_bits, seed, prime_bits, rounds, challenge_bits)
    except ValueError as exc:
        raise ConfigError(str(exc))


BUILTIN_GROUPS: Dict[str, GroupProfile] = {
    "production": GroupProfile("production", "production"),
    "tiny": GroupProfile("tiny", "tiny", 16),
}

BUILTIN_ACCUMULATORS: Dict[str, AccumulatorProfile] = {
    "realistic": AccumulatorProfile("realistic", 2048, 128, 128),
    "toy": AccumulatorProfile("toy", 64, 32, 40),
}


def profile_dir() -> Optional[Path]:
    value = os.environ.get(PROFILE_DIR_ENV)
    return Path(value) if value else None


def _read_yaml(path: Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}")


def _profile_file(name: str, section: str) -> Optional[Dict[str, Any]]:
    directory = profile_dir()
    if directory is None:
        return None
    path = directory / f"{name}.yaml"
    if not path.is_file():
        return None
    data = _read_yaml(path)
    if not isinstance(data, dict) or not isinstance(data.get(section), dict):
        raise ConfigError(f"{path} has no '{section}' mapping")
    return data[section]


def load_group_profile(name: str) -> GroupProfile:
    fields = _profile_file(name, "group")
    if fields is None:
        if name not in BUILTIN_GROUPS:
            raise ConfigError(f"unknown group profile: {name}")
        return BUILTIN_GROUPS[name]
    try:
        return GroupProfile(name, **fields)
    except TypeError as exc:
        raise ConfigError(f"group profile {name}: {exc}")


def load_accumulator_profile(name: str) -> AccumulatorProfile:
    fields = _profile_file(name, "accumulator")
    if fields is None:
        if name not in BUILTIN_ACCUMULATORS:
            raise ConfigError(f"unknown accumulator profile: {name}")
        return BUILTIN_ACCUMULATORS[name]
    try:
        return AccumulatorProfile(name, **fields)
    except TypeError as exc:
        raise ConfigError(f"accumulator profile {name}: {exc}")


# ============================================================
# RUN CONFIG
# ============================================================

@dataclass
class RunConfig:
    group: str = "production"
    accumulator: str = "realistic"
    parties: int = 3
    behaviors: Dict[str, str] = field(default_factory=dict)
    seed: str = "ringswap"
    expect: Optional[str] = None
    transcript: Optional[str] = None
    mode: str = "ring"
    amount: int = 100
    expiry: int = 20

    def __post_init__(self):
        if not isinstance(self.parties, int) or self.parties < 2:
            raise ConfigError("parties must be an integer of at least 2")
        if not isinstance(self.amount, int) or self.amount <= 0:
            raise ConfigError("amount must be a positive integer")
        if not isinstance(self.expiry, int) or self.expiry < 1:
            raise ConfigError("expiry must be a positive block height")
        if not isinstance(self.behaviors, dict):
            raise ConfigError("behaviors must map party names to behaviours")
        self.seed = str(self.seed)
        try:
            ChallengeMode(self.mode)
        except ValueError:
            raise ConfigError(f"mode must be 'ring' or 'pair', got {self.mode!r}")
        if self.expect is not None:
            try:
                Verdict(self.expect)
            except ValueError:
                raise ConfigError(f"unknown expected verdict: {self.expect!r}")

    @classmethod
    def from_dict(cls, data: Any) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(map(str, unknown))}")
        return cls(**data)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        return cls.from_dict(_read_yaml(Path(path)))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def group_profile(self) -> GroupProfile:
        return load_group_profile(self.group)

    def accumulator_profile(self) -> AccumulatorProfile:
        return load_accumulator_profile(self.accumulator)

    def challenge_mode(self) -> ChallengeMode:
        return ChallengeMode(self.mode)

    def expected(self) -> Optional[Verdict]:
        return Verdict(self.expect) if self.expect is not None else None

    def parsed_behaviors(self) -> Dict[str, Behavior]:
        return {str(name): Behavior.parse(text) for name, text in self.behaviors.items()}
