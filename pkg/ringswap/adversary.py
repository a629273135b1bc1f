"""
Scripted participant behaviours, attack attempts and the atomicity verdict.

Attack helpers never raise on failure: a failed attack is evidence, returned as the
chain's ``Rejected`` result.
"""

import logging
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional

from .chain import Accepted, ChainTx, Rejected, SubmitResult
from .crypto.accumulator import MembershipWitness
from .crypto.group import Scalar
from .crypto.schnorr import (
    FullSignature,
    KeyPair,
    NoncePair,
    PreSignature,
    complete,
    compute_challenge,
    pre_sign,
)
from .errors import ConfigError, UnknownPreSignature
from .session import PreSigBundle

if TYPE_CHECKING:
    from .scenario import SwapWorld

logger = logging.getLogger(__name__)


# ============================================================
# BEHAVIOURS
# ============================================================

class BehaviorKind(Enum):
    HONEST = "honest"
    DROPOUT_AFTER_FINALIZE = "dropout-after-finalize"
    DROPOUT_BEFORE_FINALIZE = "dropout-before-finalize"
    SKIPPER = "skipper"
    IMPERSONATOR = "impersonator"
    LEAKER = "leaker"
    COLLUDER = "colluder"


@dataclass(frozen=True)
class Behavior:
    kind: BehaviorKind = BehaviorKind.HONEST
    target: Optional[str] = None
    leak_point: Optional[int] = None

    @classmethod
    def honest(cls) -> "Behavior":
        return cls()

    @classmethod
    def dropout_after_finalize(cls) -> "Behavior":
        return cls(BehaviorKind.DROPOUT_AFTER_FINALIZE)

    @classmethod
    def dropout_before_finalize(cls) -> "Behavior":
        return cls(BehaviorKind.DROPOUT_BEFORE_FINALIZE)

    @classmethod
    def skipper(cls, target: str) -> "Behavior":
        return cls(BehaviorKind.SKIPPER, target=target)

    @classmethod
    def impersonator(cls, victim: str) -> "Behavior":
        return cls(BehaviorKind.IMPERSONATOR, target=victim)

    @classmethod
    def leaker(cls, point: int) -> "Behavior":
        return cls(BehaviorKind.LEAKER, leak_point=point)

    @classmethod
    def colluder(cls) -> "Behavior":
        return cls(BehaviorKind.COLLUDER)

    @classmethod
    def parse(cls, text: str) -> "Behavior":
        """``honest``, ``skipper:bob``, ``impersonator:bob``, ``leaker:2`` and so on."""
        name, _, arg = str(text).strip().partition(":")
        try:
            kind = BehaviorKind(name.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown behaviour: {text!r}")
        arg = arg.strip()
        if kind in (BehaviorKind.SKIPPER, BehaviorKind.IMPERSONATOR):
            if not arg:
                raise ConfigError(f"{kind.value} needs a target party")
            return cls(kind, target=arg)
        if kind is BehaviorKind.LEAKER:
            try:
                point = int(arg) if arg else 1
            except ValueError:
                raise ConfigError(f"leak point must be an integer: {text!r}")
            return cls(kind, leak_point=point)
        if arg:
            raise ConfigError(f"{kind.value} takes no argument")
        return cls(kind)

    def __str__(self) -> str:
        if self.target is not None:
            return f"{self.kind.value}:{self.target}"
        if self.leak_point is not None:
            return f"{self.kind.value}:{self.leak_point}"
        return self.kind.value

    @property
    def is_honest(self) -> bool:
        return self.kind in (BehaviorKind.HONEST, BehaviorKind.IMPERSONATOR, BehaviorKind.LEAKER)

    @property
    def signs_ring(self) -> bool:
        return self.kind is not BehaviorKind.DROPOUT_BEFORE_FINALIZE

    @property
    def broadcasts(self) -> bool:
        return self.kind not in (
            BehaviorKind.DROPOUT_AFTER_FINALIZE,
            BehaviorKind.DROPOUT_BEFORE_FINALIZE,
            BehaviorKind.COLLUDER,
        )


# ============================================================
# OUTCOMES
# ============================================================

class Verdict(Enum):
    ALL_COMPLETED = "AllCompleted"
    NONE_COMPLETED = "NoneCompleted"
    VIOLATION = "VIOLATION"


@dataclass
class ScenarioOutcome:
    verdict: Verdict
    ledger_delta: Dict[str, Dict[str, int]]
    accepted: Dict[str, int]
    rejections: List[str] = field(default_factory=list)
    attack_acceptances: int = 0
    secrets: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "verdict": self.verdict.value,
            "ledger_delta": self.ledger_delta,
            "accepted": self.accepted,
            "rejections": list(self.rejections),
            "attack_acceptances": self.attack_acceptances,
        }


def judge(
    owed: Dict[str, bool],
    honest: Iterable[str],
    all_refunded: bool,
    attack_acceptances: int = 0,
) -> Verdict:
    """AllCompleted iff every honest party got paid; NoneCompleted iff every lock went back."""
    if attack_acceptances:
        return Verdict.VIOLATION
    if all(owed[p] for p in honest):
        return Verdict.ALL_COMPLETED
    if all_refunded:
        return Verdict.NONE_COMPLETED
    return Verdict.VIOLATION


# ============================================================
# ATTACKS
# ============================================================

class ImpersonationVariant(Enum):
    OWN_KEY = "own-key"
    FORGED_WITNESS = "forged-witness"
    REPLAY = "replay"


def _random_witness(world: "SwapWorld", rng: random.Random) -> MembershipWitness:
    N = world.infra.accumulator.params.N
    return MembershipWitness(rng.randrange(1, N // 2 + 1))


def _random_scalar(world: "SwapWorld", rng: random.Random) -> Scalar:
    return world.group.scalar(rng.randrange(1, world.group.order_q))


def _submit(world: "SwapWorld", chain_id: str, tx: ChainTx) -> SubmitResult:
    result = world.submit(chain_id, tx, "adversary")
    if isinstance(result, Accepted):
        logger.warning("attack transaction accepted on %s", chain_id)
    return result


def impersonation_attempt(
    world: "SwapWorld",
    eve: KeyPair,
    victim: str,
    variant: ImpersonationVariant = ImpersonationVariant.OWN_KEY,
    rng: Optional[random.Random] = None,
) -> SubmitResult:
    """An outsider signs the victim's leg with an outside key and redirects the funds."""
    rng = rng or random.Random(0)
    infra, terms = world.infra, world.terms
    leg = terms.message_for(victim)
    chain_id = terms.party(victim).chain_id

    if variant is ImpersonationVariant.REPLAY:
        accepted = [tx for chain in world.chains.values() for tx in chain.accepted
                    if tx.signature.party_id == victim]
        if not accepted:
            raise ValueError(f"{victim} has no accepted transaction to replay")
        original = accepted[0]
        others = [lid for pid, lid in world.lock_ids.items() if lid != original.lock_id]
        lock_id = rng.choice(others) if others else original.lock_id
        target_chain = lock_id.split("/lock/")[0]
        return _submit(world, target_chain, replace(original, lock_id=lock_id))

    forged = replace(leg, payer=eve.pk, payee=eve.pk)
    nonce = NoncePair.generate(world.group, f"eve/{victim}/{rng.random()}")
    T = infra.T if infra.T is not None else world.group.generator
    c = compute_challenge(nonce.R, T, eve.pk, infra.acc_keys, infra.acc_msgs, forged.to_bytes(), infra.mode)
    s_pre = pre_sign(eve, nonce, c)
    presig = PreSignature(victim, c, s_pre, nonce.R, T)
    signature = FullSignature(victim, c, s_pre + _random_scalar(world, rng), nonce.R, T)
    if variant is ImpersonationVariant.FORGED_WITNESS:
        key_witness = infra.key_witness(terms.party(victim).pk)
    else:
        key_witness = _random_witness(world, rng)
    tx = ChainTx(
        infra.session_id, leg.lock_ref, forged, signature, presig, eve.pk,
        key_witness, _random_witness(world, rng),
    )
    return _submit(world, chain_id, tx)


LEAK_STRATEGIES = ("as-is", "guess", "drop-adaptor", "mix", "redirect")


def leak_attempt(
    world: "SwapWorld",
    bundle: PreSigBundle,
    adversary: KeyPair,
    rng: random.Random,
    trials: int = 1,
    t: Optional[Scalar] = None,
) -> List[SubmitResult]:
    """Try to turn leaked pre-signatures into an accepted transaction.

    Without t the adversary can only guess; with t (after an honest broadcast) it
    tries to redirect a completed leg to itself.
    """
    infra, terms = world.infra, world.terms
    results: List[SubmitResult] = []
    if not bundle.presigs:
        return results
    for _ in range(trials):
        ps = rng.choice(bundle.presigs)
        leg = terms.message_for(ps.party_id)
        strategy = rng.choice(LEAK_STRATEGIES if t is not None else LEAK_STRATEGIES[:-1])
        message = leg
        if strategy == "as-is":
            signature = FullSignature(ps.party_id, ps.c, ps.s_pre, ps.R, ps.T)
        elif strategy == "guess":
            signature = FullSignature(ps.party_id, ps.c, ps.s_pre + _random_scalar(world, rng), ps.R, ps.T)
        elif strategy == "drop-adaptor":
            signature = FullSignature(ps.party_id, ps.c, ps.s_pre, ps.R, world.group.identity)
        elif strategy == "mix":
            other = rng.choice(bundle.presigs)
            signature = FullSignature(ps.party_id, ps.c, ps.s_pre + other.s_pre - other.c * other.s_pre, ps.R, ps.T)
        else:
            signature = complete(ps, t)
            message = replace(leg, payee=adversary.pk)
        try:
            presig_witness = infra.presig_witness(ps)
        except UnknownPreSignature:
            presig_witness = _random_witness(world, rng)
        tx = ChainTx(
            infra.session_id, leg.lock_ref, message, signature, ps, leg.payer,
            infra.key_witness(leg.payer), presig_witness,
        )
        results.append(_submit(world, terms.party(ps.party_id).chain_id, tx))
    return results


def collusion_attempt(
    world: "SwapWorld",
    colluders: List[str],
    t: Scalar,
    rng: random.Random,
) -> List[SubmitResult]:
    """Colluders holding t and each other's keys try to spend honest parties' locks."""
    infra, terms = world.infra, world.terms
    results: List[SubmitResult] = []
    victims = [p.party_id for p in terms.parties if p.party_id not in colluders]
    for colluder in colluders:
        kp = world.keypairs[colluder]
        own_presig = infra.published(colluder)
        for victim in victims:
            leg = terms.message_for(victim)
            chain_id = terms.party(victim).chain_id
            if own_presig is not None:
                own_leg = terms.message_for(colluder)
                tx = ChainTx(
                    infra.session_id, leg.lock_ref, own_leg, complete(own_presig, t), own_presig,
                    kp.pk, infra.key_witness(kp.pk), infra.presig_witness(own_presig),
                )
                results.append(_submit(world, chain_id, tx))
            forged = replace(leg, payer=kp.pk, payee=kp.pk)
            nonce = NoncePair.generate(world.group, f"collude/{colluder}/{victim}/{rng.random()}")
            c = compute_challenge(nonce.R, infra.T, kp.pk, infra.acc_keys, infra.acc_msgs,
                                  forged.to_bytes(), infra.mode)
            presig = PreSignature(colluder, c, pre_sign(kp, nonce, c), nonce.R, infra.T)
            witness = infra.presig_witness(own_presig) if own_presig is not None else _random_witness(world, rng)
            tx = ChainTx(
                infra.session_id, leg.lock_ref, forged, complete(presig, t), presig,
                kp.pk, infra.key_witness(kp.pk), witness,
            )
            results.append(_submit(world, chain_id, tx))
    return results


def count_accepted(results: Iterable[SubmitResult]) -> int:
    return sum(1 for r in results if isinstance(r, Accepted))


def rejection_reasons(results: Iterable[SubmitResult]) -> List[str]:
    return [r.reason.value for r in results if isinstance(r, Rejected)]
