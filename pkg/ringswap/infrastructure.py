"""
Shared accumulator infrastructure of one swap session.

Holds three accumulators (party keys, swap messages, pre-signatures), the published
adaptor point T and the public pre-signature store. Chains and parties read digests
from here; only this object mutates the accumulators.
"""

import logging
import threading
from typing import TYPE_CHECKING, Dict, List, Optional

from .crypto.accumulator import AccumulatorManager, Digest, MembershipWitness, RsaAccumulator
from .crypto.group import GroupElement
from .crypto.schnorr import ChallengeMode, PreSignature, compute_challenge, pre_verify
from .errors import (
    BadPreSignature,
    ChallengeMismatch,
    NotMember,
    ProtocolError,
    UnknownPreSignature,
)

if TYPE_CHECKING:
    from .session import SwapTerms

logger = logging.getLogger(__name__)


class SwapInfrastructure:
    """Single honest accumulator manager for one session."""

    def __init__(self, accumulator: RsaAccumulator):
        self.accumulator = accumulator
        self.keys = AccumulatorManager(accumulator, "keys")
        self.messages = AccumulatorManager(accumulator, "messages")
        self.presigs = AccumulatorManager(accumulator, "presigs")
        self._terms: Optional["SwapTerms"] = None
        self._T: Optional[GroupElement] = None
        self._published: Dict[str, PreSignature] = {}
        self._lock = threading.Lock()

    # ------------------------------------------------------------
    # session setup
    # ------------------------------------------------------------

    @property
    def terms(self) -> "SwapTerms":
        if self._terms is None:
            raise ProtocolError("no terms registered")
        return self._terms

    @property
    def session_id(self) -> str:
        return self.terms.session_id

    @property
    def mode(self) -> ChallengeMode:
        return self.terms.challenge_mode

    def register_terms(self, terms: "SwapTerms") -> None:
        """Accumulate every party key and every message; idempotent for the same terms."""
        with self._lock:
            if self._terms is not None:
                if self._terms != terms:
                    raise ProtocolError("infrastructure already serves other terms")
                return
            terms.validate()
            self.keys.batch_insert([p.pk.to_bytes() for p in terms.parties])
            self.messages.batch_insert([m.to_bytes() for m in terms.messages])
            self._terms = terms
            logger.debug("session %s: %d keys accumulated", terms.session_id, len(terms.parties))

    @property
    def T(self) -> Optional[GroupElement]:
        return self._T

    def publish_T(self, T: GroupElement) -> None:
        with self._lock:
            if self._T is not None and self._T != T:
                raise ProtocolError("a different adaptor point is already published")
            self._T = T

    # ------------------------------------------------------------
    # digests
    # ------------------------------------------------------------

    @property
    def acc_keys(self) -> Digest:
        return self.keys.digest

    @property
    def acc_msgs(self) -> Digest:
        return self.messages.digest

    @property
    def presig_acc(self) -> Digest:
        return self.presigs.digest

    def challenge_for(self, party_id: str, R: GroupElement, T: GroupElement):
        terms = self.terms
        party = terms.party(party_id)
        m = terms.message_for(party_id).to_bytes()
        return compute_challenge(R, T, party.pk, self.acc_keys, self.acc_msgs, m, terms.challenge_mode)

    # ------------------------------------------------------------
    # pre-signatures
    # ------------------------------------------------------------

    def check_presig(self, ps: PreSignature) -> None:
        """Raise unless ``ps`` is a well-formed pre-signature of its party over its leg."""
        party = self.terms.party(ps.party_id)
        if self._T is not None and ps.T != self._T:
            raise BadPreSignature(f"{ps.party_id}: adaptor point differs from the published one")
        if self.challenge_for(ps.party_id, ps.R, ps.T) != ps.c:
            raise ChallengeMismatch(f"{ps.party_id}: challenge does not recompute")
        if not pre_verify(ps, party.pk):
            raise BadPreSignature(f"{ps.party_id}: pre-signature does not verify")

    def register_presig(self, ps: PreSignature) -> Digest:
        """Accumulate and publish a pre-signature; one per party."""
        self.check_presig(ps)
        with self._lock:
            existing = self._published.get(ps.party_id)
            if existing is not None:
                if existing == ps:
                    return self.presigs.digest
                raise BadPreSignature(f"{ps.party_id} already registered a pre-signature")
            self._published[ps.party_id] = ps
        digest = self.presigs.insert(ps.to_bytes())
        logger.info("session %s: pre-signature of %s registered", self.session_id, ps.party_id)
        return digest

    def published(self, party_id: str) -> Optional[PreSignature]:
        return self._published.get(party_id)

    def published_all(self) -> List[PreSignature]:
        return [self._published[p.party_id] for p in self.terms.parties if p.party_id in self._published]

    def key_witness(self, pk: GroupElement) -> MembershipWitness:
        return self.keys.witness(pk.to_bytes())

    def presig_witness(self, ps: PreSignature) -> MembershipWitness:
        try:
            return self.presigs.witness(ps.to_bytes())
        except NotMember:
            raise UnknownPreSignature(f"{ps.party_id}: pre-signature was never accumulated")

    def is_accumulated(self, ps: PreSignature) -> bool:
        """Membership check of ``ps`` against the current pre-signature digest."""
        try:
            w = self.presig_witness(ps)
        except UnknownPreSignature:
            return False
        return self.accumulator.verify_membership(self.presig_acc, ps.to_bytes(), w)
