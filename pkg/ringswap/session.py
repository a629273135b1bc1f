"""
N-party swap session engine.

Ring order is the order of ``SwapTerms.parties``. Position 0 is the initiator: it
owns the adaptor secret t, starts the pre-signature ring and is the first to
broadcast a full signature. Everyone else completes by observing that broadcast
and extracting t.

Phases only move forward:

    INIT -> COLLECTING -> READY_TO_FINALIZE -> FINALIZED -> COMPLETED
                                                 (any non-final phase) -> ABORTED
"""

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .crypto.accumulator import Digest
from .crypto.group import Group, GroupElement, Scalar, as_seed, decode_element, length_prefixed, point_mul
from .crypto.schnorr import (
    AdaptorSecret,
    ChallengeMode,
    FullSignature,
    KeyPair,
    NoncePair,
    NonceTracker,
    PreSignature,
    complete,
    extract_secret,
    pre_sign,
    verify_full,
)
from .errors import (
    BadPreSignature,
    DecodeError,
    DuplicateParty,
    EmptySession,
    IncompleteBundle,
    MissingPredecessor,
    NotInitiator,
    ProtocolError,
    SecretMismatch,
    UnknownParty,
    UnknownPreSignature,
    WrongPhase,
)
from .infrastructure import SwapInfrastructure

logger = logging.getLogger(__name__)

MESSAGE_TAG = "swap/msg/v1"


# ============================================================
# TERMS
# ============================================================

@dataclass(frozen=True)
class Party:
    party_id: str
    pk: GroupElement
    chain_id: str


@dataclass(frozen=True)
class SwapMessage:
    """Canonical payload of one leg: payer pays ``amount`` of ``asset`` to payee."""
    chain_id: str
    asset: str
    amount: int
    payer: GroupElement
    payee: GroupElement
    lock_ref: str

    def to_bytes(self) -> bytes:
        return length_prefixed(MESSAGE_TAG, [
            self.chain_id.encode("utf-8"),
            self.asset.encode("utf-8"),
            self.amount.to_bytes(8, "big"),
            self.payer.to_bytes(),
            self.payee.to_bytes(),
            self.lock_ref.encode("utf-8"),
        ])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "chain_id": self.chain_id,
            "asset": self.asset,
            "amount": self.amount,
            "payer": self.payer.to_bytes().hex(),
            "payee": self.payee.to_bytes().hex(),
            "lock_ref": self.lock_ref,
        }

    @classmethod
    def from_dict(cls, group: Group, data: Dict[str, Any]) -> "SwapMessage":
        try:
            return cls(
                str(data["chain_id"]),
                str(data["asset"]),
                int(data["amount"]),
                decode_element(group, bytes.fromhex(data["payer"])),
                decode_element(group, bytes.fromhex(data["payee"])),
                str(data["lock_ref"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DecodeError(f"malformed message: {exc}")


@dataclass(frozen=True)
class SwapTerms:
    session_id: str
    parties: Tuple[Party, ...]
    messages: Tuple[SwapMessage, ...]
    challenge_mode: ChallengeMode = ChallengeMode.RING

    @classmethod
    def ring(
        cls,
        session_id: str,
        parties: Sequence[Party],
        assets: Sequence[str],
        lock_refs: Sequence[str],
        amount: int,
        challenge_mode: ChallengeMode = ChallengeMode.RING,
    ) -> "SwapTerms":
        """Party i pays party i+1 (mod N) on its own chain."""
        n = len(parties)
        messages = tuple(
            SwapMessage(
                parties[i].chain_id, assets[i], amount,
                parties[i].pk, parties[(i + 1) % n].pk, lock_refs[i],
            )
            for i in range(n)
        )
        return cls(session_id, tuple(parties), messages, challenge_mode)

    def validate(self) -> None:
        if len(self.parties) < 2:
            raise EmptySession("a swap needs at least two parties")
        ids = [p.party_id for p in self.parties]
        if len(set(ids)) != len(ids):
            raise DuplicateParty("party ids must be distinct")
        keys = [p.pk.to_bytes() for p in self.parties]
        if len(set(keys)) != len(keys):
            raise DuplicateParty("party keys must be distinct")
        if len(self.messages) != len(self.parties):
            raise ProtocolError("one message per party is required")
        for party, message in zip(self.parties, self.messages):
            if message.payer != party.pk:
                raise ProtocolError(f"message of {party.party_id} is paid by someone else")
            if message.payee.to_bytes() not in keys:
                raise UnknownParty(f"payee of {party.party_id}'s message is not a participant")

    @property
    def size(self) -> int:
        return len(self.parties)

    @property
    def initiator(self) -> Party:
        return self.parties[0]

    def position(self, party_id: str) -> int:
        for i, p in enumerate(self.parties):
            if p.party_id == party_id:
                return i
        raise UnknownParty(f"{party_id} is not in session {self.session_id}")

    def party(self, party_id: str) -> Party:
        return self.parties[self.position(party_id)]

    def message_for(self, party_id: str) -> SwapMessage:
        return self.messages[self.position(party_id)]

    def successor(self, party_id: str) -> Party:
        return self.parties[(self.position(party_id) + 1) % self.size]

    def predecessor(self, party_id: str) -> Party:
        return self.parties[(self.position(party_id) - 1) % self.size]


# ============================================================
# SESSION STATE
# ============================================================

class Phase(IntEnum):
    INIT = 0
    COLLECTING = 1
    READY_TO_FINALIZE = 2
    FINALIZED = 3
    COMPLETED = 4
    ABORTED = 5


@dataclass(frozen=True)
class SessionContext:
    acc_keys: Digest
    acc_msgs: Digest
    T: Optional[GroupElement]
    presig_acc: Digest


@dataclass(frozen=True)
class PreSigBundle:
    """Cumulative bundle: every pre-signature collected so far, in ring order."""
    session_id: str
    T: GroupElement
    presigs: Tuple[PreSignature, ...]

    def get(self, party_id: str) -> Optional[PreSignature]:
        for ps in self.presigs:
            if ps.party_id == party_id:
                return ps
        return None

    def party_ids(self) -> List[str]:
        return [ps.party_id for ps in self.presigs]


class SwapSession:
    """One party's view of a swap; never shared between parties."""

    def __init__(
        self,
        terms: SwapTerms,
        infra: SwapInfrastructure,
        keypair: KeyPair,
        party_id: str,
        seed: Union[str, bytes],
    ):
        self.terms = terms
        self.infra = infra
        self.keypair = keypair
        self.party_id = party_id
        self.position = terms.position(party_id)
        self.phase = Phase.INIT
        self.collected: Dict[str, PreSignature] = {}
        self.my_secret: Optional[AdaptorSecret] = None
        self.my_presig: Optional[PreSignature] = None
        self.my_signature: Optional[FullSignature] = None
        self.learned_t: Optional[Scalar] = None
        self.T: Optional[GroupElement] = None
        self.events: List[Tuple[str, Dict[str, Any]]] = []
        self._events_seen = 0
        self._tracker = NonceTracker()
        group = keypair.pk.group
        self._nonce = NoncePair.generate(
            group, as_seed(seed) + b"/" + terms.session_id.encode("utf-8") + b"/" + party_id.encode("utf-8")
        )

    @property
    def is_initiator(self) -> bool:
        return self.position == 0

    def new_events(self) -> List[Tuple[str, Dict[str, Any]]]:
        """Events recorded since the previous call, oldest first."""
        fresh = self.events[self._events_seen:]
        self._events_seen = len(self.events)
        return fresh

    @property
    def context(self) -> SessionContext:
        return SessionContext(self.infra.acc_keys, self.infra.acc_msgs, self.T, self.infra.presig_acc)

    def _advance(self, phase: Phase) -> None:
        if phase < self.phase:
            raise WrongPhase(f"{self.party_id}: cannot move from {self.phase.name} to {phase.name}")
        self.events.append(("phase", {"party": self.party_id, "from": self.phase.name, "to": phase.name}))
        self.phase = phase

    def _sign(self) -> PreSignature:
        c = self.infra.challenge_for(self.party_id, self._nonce.R, self.T)
        s_pre = pre_sign(self.keypair, self._nonce, c, self._tracker)
        ps = PreSignature(self.party_id, c, s_pre, self._nonce.R, self.T)
        self.infra.register_presig(ps)
        self.my_presig = ps
        self.collected[self.party_id] = ps
        return ps

    def _check_entries(self, bundle: PreSigBundle, upto: int) -> None:
        """Validate the pre-signatures of ring positions 0..upto-1 held in ``bundle``."""
        if bundle.session_id != self.terms.session_id:
            raise BadPreSignature(f"bundle belongs to session {bundle.session_id}")
        for pid in bundle.party_ids():
            self.terms.position(pid)
        if self.infra.T is not None and bundle.T != self.infra.T:
            raise BadPreSignature("bundle adaptor point differs from the published one")
        for party in self.terms.parties[:upto]:
            ps = bundle.get(party.party_id)
            if ps.T != bundle.T:
                raise BadPreSignature(f"{party.party_id}: pre-signature uses another adaptor point")
            self.infra.check_presig(ps)
            if not self.infra.is_accumulated(ps):
                raise UnknownPreSignature(f"{party.party_id}: pre-signature is not accumulated")

    def _fail(self, exc: ProtocolError) -> ProtocolError:
        self.events.append(("error", {"party": self.party_id, "error": type(exc).__name__, "message": str(exc)}))
        logger.info("%s: %s", self.party_id, exc)
        return exc


# ============================================================
# OPERATIONS
# ============================================================

def session_init(
    terms: SwapTerms,
    infra: SwapInfrastructure,
    keypair: KeyPair,
    party_id: str,
    seed: Union[str, bytes],
) -> SwapSession:
    """Register the terms with the infrastructure and open ``party_id``'s session.

    The initiator draws the adaptor secret and publishes T here.
    """
    terms.validate()
    if terms.party(party_id).pk != keypair.pk:
        raise UnknownParty(f"key pair does not belong to {party_id}")
    infra.register_terms(terms)
    session = SwapSession(terms, infra, keypair, party_id, seed)
    if session.is_initiator:
        group = keypair.pk.group
        session.my_secret = AdaptorSecret.generate(
            group, as_seed(seed) + b"/" + terms.session_id.encode("utf-8")
        )
        session.T = session.my_secret.T
        infra.publish_T(session.T)
    session.events.append(("init", {"party": party_id, "position": session.position}))
    return session


def initiator_start(session: SwapSession) -> PreSigBundle:
    if not session.is_initiator:
        raise session._fail(NotInitiator(f"{session.party_id} is not the initiator"))
    if session.phase != Phase.INIT:
        raise session._fail(WrongPhase(f"{session.party_id} already started"))
    ps = session._sign()
    session._advance(Phase.COLLECTING)
    return PreSigBundle(session.terms.session_id, session.T, (ps,))


def participant_step(session: SwapSession, incoming: PreSigBundle) -> PreSigBundle:
    """Check every predecessor's pre-signature, add ours and forward the bundle."""
    if session.is_initiator:
        raise session._fail(WrongPhase("the initiator opens the ring with initiator_start"))
    if session.phase != Phase.INIT:
        raise session._fail(WrongPhase(f"{session.party_id} already signed"))
    predecessors = session.terms.parties[:session.position]
    missing = [p.party_id for p in predecessors if incoming.get(p.party_id) is None]
    if missing:
        raise session._fail(MissingPredecessor(missing))
    try:
        session._check_entries(incoming, session.position)
    except ProtocolError as exc:
        raise session._fail(exc)
    session.T = incoming.T
    for p in predecessors:
        session.collected[p.party_id] = incoming.get(p.party_id)
    ps = session._sign()
    session._advance(Phase.COLLECTING)
    return PreSigBundle(
        incoming.session_id, incoming.T, tuple(session.collected[p.party_id] for p in session.terms.parties[:session.position + 1])
    )


def finalize(session: SwapSession, complete_bundle: PreSigBundle) -> FullSignature:
    """Initiator only: s_1 = s_1' + t."""
    if not session.is_initiator:
        raise session._fail(NotInitiator(f"{session.party_id} cannot finalize"))
    if session.phase != Phase.COLLECTING:
        raise session._fail(WrongPhase(f"cannot finalize from {session.phase.name}"))
    missing = [p.party_id for p in session.terms.parties if complete_bundle.get(p.party_id) is None]
    if missing:
        raise session._fail(IncompleteBundle(missing))
    try:
        session._check_entries(complete_bundle, session.terms.size)
    except ProtocolError as exc:
        raise session._fail(exc)
    if complete_bundle.get(session.party_id) != session.my_presig:
        raise session._fail(BadPreSignature("bundle carries a different initiator pre-signature"))
    for p in session.terms.parties:
        session.collected[p.party_id] = complete_bundle.get(p.party_id)
    session._advance(Phase.READY_TO_FINALIZE)
    signature = complete(session.my_presig, session.my_secret.t)
    session.my_signature = signature
    session.learned_t = session.my_secret.t
    session._advance(Phase.FINALIZED)
    return signature


def observe_and_complete(
    session: SwapSession,
    observed: FullSignature,
    observed_presig: PreSignature,
) -> FullSignature:
    """Extract t from an observed (full, pre) pair and adapt our own pre-signature."""
    if session.my_presig is None or session.phase in (Phase.INIT, Phase.ABORTED):
        raise session._fail(WrongPhase(f"{session.party_id} has nothing to complete"))
    if session.phase == Phase.COMPLETED:
        return session.my_signature
    group = session.keypair.pk.group
    t = extract_secret(observed.s, observed_presig.s_pre)
    if point_mul(t, group.generator) != session.T:
        raise session._fail(SecretMismatch("extracted secret does not open T"))
    if not session.infra.is_accumulated(observed_presig):
        raise session._fail(UnknownPreSignature(f"{observed_presig.party_id}: pre-signature is not accumulated"))
    if session.is_initiator and session.my_secret.t != t:
        raise session._fail(SecretMismatch("initiator observed a different secret"))
    signature = complete(session.my_presig, t)
    if not verify_full(signature, session.keypair.pk):
        raise session._fail(SecretMismatch("adapted signature does not verify"))
    session.learned_t = t
    session.my_signature = signature
    session._advance(Phase.COMPLETED)
    session.events.append(("extract", {"party": session.party_id, "from": observed.party_id}))
    return signature


def adapt_published(session: SwapSession, presig: PreSignature) -> FullSignature:
    """Complete someone else's accumulated pre-signature once t is known."""
    if session.learned_t is None:
        raise session._fail(WrongPhase(f"{session.party_id} has not learned the secret"))
    if not session.infra.is_accumulated(presig):
        raise session._fail(UnknownPreSignature(f"{presig.party_id}: pre-signature is not accumulated"))
    return complete(presig, session.learned_t)


def abort(session: SwapSession) -> None:
    if session.phase in (Phase.FINALIZED, Phase.COMPLETED):
        raise session._fail(WrongPhase(f"{session.party_id} cannot abort after finalization"))
    if session.phase != Phase.ABORTED:
        session._advance(Phase.ABORTED)
