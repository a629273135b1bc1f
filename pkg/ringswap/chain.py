"""
Deterministic blockchain simulator.

One ``ChainState`` per chain: balances, asset locks with expiry heights and an
append-only event log. Every accepted transaction mines one block. A transaction
spends a lock only if it passes the accumulator-aware verification rule:

    1. signer key is a member of the key accumulator
    2. claimed pre-signature is a member of the pre-signature accumulator
    3. challenge recomputes from (R + T, pk, Acc_keys, Acc_msgs, m)
    4. s·G == R + T + c·pk
    5. (s - s')·G == T
    6. the signer is the message's payer
    7. the lock is live, unexpired and the message names its owner, beneficiary and amount
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Union

from .crypto.accumulator import Digest, MembershipWitness, RsaAccumulator
from .crypto.group import Group, GroupElement, decode_element, point_mul
from .crypto.schnorr import ChallengeMode, FullSignature, PreSignature, compute_challenge, verify_full
from .errors import AlreadyLocked, DecodeError, InsufficientFunds, UnknownLock
from .infrastructure import SwapInfrastructure
from .session import SwapMessage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LockRecord:
    asset: str
    amount: int
    owner: GroupElement
    beneficiary: GroupElement
    session_id: str
    expiry_height: int


@dataclass(frozen=True)
class ChainTx:
    session_id: str
    lock_id: str
    message: SwapMessage
    signature: FullSignature
    presig: PreSignature
    signer: GroupElement
    key_witness: MembershipWitness
    presig_witness: MembershipWitness

    @classmethod
    def for_leg(
        cls,
        infra: SwapInfrastructure,
        message: SwapMessage,
        signature: FullSignature,
        presig: PreSignature,
    ) -> "ChainTx":
        """Honest transaction for one leg, witnesses fetched from the infrastructure."""
        return cls(
            infra.session_id,
            message.lock_ref,
            message,
            signature,
            presig,
            message.payer,
            infra.key_witness(message.payer),
            infra.presig_witness(presig),
        )

    def to_dict(self) -> Dict:
        return {
            "session_id": self.session_id,
            "lock_id": self.lock_id,
            "message": self.message.to_dict(),
            "signature": self.signature.to_bytes().hex(),
            "presig": self.presig.to_bytes().hex(),
            "signer": self.signer.to_bytes().hex(),
            "key_witness": format(self.key_witness.pi, "x"),
            "presig_witness": format(self.presig_witness.pi, "x"),
        }

    @classmethod
    def from_dict(cls, group: Group, data: Dict) -> "ChainTx":
        try:
            return cls(
                data["session_id"],
                data["lock_id"],
                SwapMessage.from_dict(group, data["message"]),
                FullSignature.from_bytes(group, bytes.fromhex(data["signature"])),
                PreSignature.from_bytes(group, bytes.fromhex(data["presig"])),
                decode_element(group, bytes.fromhex(data["signer"])),
                MembershipWitness(int(data["key_witness"], 16)),
                MembershipWitness(int(data["presig_witness"], 16)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DecodeError(f"malformed transaction: {exc}")


class RejectReason(Enum):
    UNKNOWN_SESSION = "unknown session"
    PK_NOT_MEMBER = "pk not in accumulator"
    PRESIG_NOT_MEMBER = "pre-signature not in accumulator"
    CHALLENGE_MISMATCH = "challenge mismatch"
    SIGNATURE_INVALID = "signature invalid"
    PRESIG_UNBOUND = "signature not bound to pre-signature"
    UNKNOWN_LOCK = "unknown lock"
    LOCK_SPENT = "lock spent"
    LOCK_EXPIRED = "lock expired"
    LOCK_MISMATCH = "message does not match lock"
    SIGNER_MISMATCH = "signer is not the payer"


@dataclass(frozen=True)
class Accepted:
    height: int
    lock_id: str

    @property
    def ok(self) -> bool:
        return True


@dataclass(frozen=True)
class Rejected:
    reason: RejectReason

    @property
    def ok(self) -> bool:
        return False


SubmitResult = Union[Accepted, Rejected]


@dataclass(frozen=True)
class ChainEvent:
    height: int
    kind: str
    lock_id: str
    payload: str
    tx: Optional[ChainTx] = field(default=None, compare=False)

    @property
    def payload_hash(self) -> str:
        return hashlib.sha256(self.payload.encode("utf-8")).hexdigest()

    def to_line(self) -> str:
        """``height kind lock_id payload_hash payload``; ``-`` stands for an empty lock id."""
        return f"{self.height} {self.kind} {self.lock_id or '-'} {self.payload_hash} {self.payload}"

    @classmethod
    def from_line(cls, line: str, group: Optional[Group] = None) -> "ChainEvent":
        try:
            height, kind, lock_id, digest, payload = line.rstrip("\n").split(" ", 4)
            event = cls(int(height), kind, "" if lock_id == "-" else lock_id, payload)
        except ValueError as exc:
            raise DecodeError(f"malformed event line: {exc}")
        if event.payload_hash != digest:
            raise DecodeError(f"payload hash mismatch at height {height}")
        if kind == "tx" and group is not None:
            try:
                data = json.loads(payload)
            except ValueError as exc:
                raise DecodeError(f"malformed transaction payload: {exc}")
            event = replace(event, tx=ChainTx.from_dict(group, data))
        return event


def _payload(**fields) -> str:
    return json.dumps(fields, sort_keys=True, separators=(",", ":"))


def _key(pk: GroupElement) -> str:
    return pk.to_bytes().hex()


@dataclass(frozen=True)
class SessionView:
    """Read-only digests a verifier needs; built from live infrastructure or a transcript."""
    accumulator: RsaAccumulator
    acc_keys: Digest
    acc_msgs: Digest
    presig_acc: Digest
    T: Optional[GroupElement]
    mode: ChallengeMode

    @classmethod
    def of(cls, infra: SwapInfrastructure) -> "SessionView":
        return cls(infra.accumulator, infra.acc_keys, infra.acc_msgs, infra.presig_acc, infra.T, infra.mode)


def binding_ok(tx: ChainTx, infra: Union[SwapInfrastructure, SessionView]) -> Optional[RejectReason]:
    """Every check that does not depend on lock state."""
    acc = infra.accumulator
    if not acc.verify_membership(infra.acc_keys, tx.signer.to_bytes(), tx.key_witness):
        return RejectReason.PK_NOT_MEMBER
    if not acc.verify_membership(infra.presig_acc, tx.presig.to_bytes(), tx.presig_witness):
        return RejectReason.PRESIG_NOT_MEMBER
    sig, ps = tx.signature, tx.presig
    if sig.T != infra.T or sig.c != ps.c or sig.R != ps.R or sig.party_id != ps.party_id:
        return RejectReason.CHALLENGE_MISMATCH
    c = compute_challenge(
        sig.R, sig.T, tx.signer, infra.acc_keys, infra.acc_msgs, tx.message.to_bytes(), infra.mode
    )
    if c != sig.c:
        return RejectReason.CHALLENGE_MISMATCH
    if not verify_full(sig, tx.signer):
        return RejectReason.SIGNATURE_INVALID
    if point_mul(sig.s - ps.s_pre, tx.signer.group.generator) != infra.T:
        return RejectReason.PRESIG_UNBOUND
    if tx.signer != tx.message.payer:
        return RejectReason.SIGNER_MISMATCH
    return None


class ChainState:
    """One simulated chain; never shares mutable state with other chains."""

    def __init__(self, chain_id: str):
        self.chain_id = chain_id
        self.height = 0
        self.locks: Dict[str, LockRecord] = {}
        self.lock_status: Dict[str, str] = {}
        self.accepted: List[ChainTx] = []
        self.events: List[ChainEvent] = []
        self._balances: Dict[str, Dict[str, int]] = {}
        self._sessions: Dict[str, SwapInfrastructure] = {}

    @classmethod
    def replay(cls, chain_id: str, group: Group, lines: Iterable[str]) -> "ChainState":
        """Rebuild balances, locks and accepted transactions from ``event_log`` lines.

        Transactions are applied as logged, not re-verified. Height ends at the last
        logged event.
        """
        chain = cls(chain_id)
        for line in lines:
            event = ChainEvent.from_line(line, group)
            try:
                chain._apply(event, group, json.loads(event.payload))
            except (KeyError, TypeError, ValueError) as exc:
                raise DecodeError(f"cannot replay {event.kind} at height {event.height}: {exc}")
            chain.height = max(chain.height, event.height)
            chain.events.append(event)
        return chain

    def _apply(self, event: ChainEvent, group: Group, data: Dict) -> None:
        if event.kind == "fund":
            self._credit(decode_element(group, bytes.fromhex(data["owner"])), data["asset"], data["amount"])
        elif event.kind == "lock":
            record = LockRecord(
                data["asset"], data["amount"],
                decode_element(group, bytes.fromhex(data["owner"])),
                decode_element(group, bytes.fromhex(data["beneficiary"])),
                data["session"], data["expiry"],
            )
            self._credit(record.owner, record.asset, -record.amount)
            self.locks[data["lock"]] = record
            self.lock_status[data["lock"]] = "live"
        elif event.kind == "tx":
            record = self.locks[event.lock_id]
            self.lock_status[event.lock_id] = "spent"
            self._credit(record.beneficiary, record.asset, record.amount)
            self.accepted.append(event.tx)
        elif event.kind == "refund":
            record = self.locks[event.lock_id]
            self.lock_status[event.lock_id] = "refunded"
            self._credit(record.owner, record.asset, record.amount)
        else:
            raise ValueError(f"unknown event kind {event.kind!r}")

    def attach(self, infra: SwapInfrastructure) -> None:
        """Give the chain a read-only view of a session's accumulator digests."""
        self._sessions[infra.session_id] = infra

    # ------------------------------------------------------------
    # balances and locks
    # ------------------------------------------------------------

    def fund(self, owner: GroupElement, asset: str, amount: int) -> None:
        if amount < 0:
            raise ValueError("amount must be non-negative")
        wallet = self._balances.setdefault(_key(owner), {})
        wallet[asset] = wallet.get(asset, 0) + amount
        self.events.append(ChainEvent(
            self.height, "fund", "", _payload(owner=_key(owner), asset=asset, amount=amount)
        ))

    def balance(self, owner: GroupElement, asset: str) -> int:
        return self._balances.get(_key(owner), {}).get(asset, 0)

    def balances(self) -> Dict[str, Dict[str, int]]:
        return {k: dict(v) for k, v in self._balances.items()}

    def _credit(self, owner: GroupElement, asset: str, amount: int) -> None:
        wallet = self._balances.setdefault(_key(owner), {})
        wallet[asset] = wallet.get(asset, 0) + amount

    def lock_asset(self, record: LockRecord) -> str:
        for lock_id, existing in self.locks.items():
            if (
                self.lock_status[lock_id] == "live"
                and existing.owner == record.owner
                and existing.asset == record.asset
                and existing.session_id == record.session_id
            ):
                raise AlreadyLocked(f"{record.asset} already locked for {record.session_id} as {lock_id}")
        if self.balance(record.owner, record.asset) < record.amount:
            raise InsufficientFunds(f"cannot lock {record.amount} {record.asset}")
        if record.expiry_height <= self.height:
            raise ValueError("lock would already be expired")
        self._credit(record.owner, record.asset, -record.amount)
        lock_id = f"{self.chain_id}/lock/{len(self.locks)}"
        self.locks[lock_id] = record
        self.lock_status[lock_id] = "live"
        self.events.append(ChainEvent(self.height, "lock", lock_id, _payload(
            lock=lock_id, asset=record.asset, amount=record.amount, owner=_key(record.owner),
            beneficiary=_key(record.beneficiary), session=record.session_id, expiry=record.expiry_height,
        )))
        logger.debug("%s: locked %d %s as %s", self.chain_id, record.amount, record.asset, lock_id)
        return lock_id

    def lock(self, lock_id: str) -> LockRecord:
        try:
            return self.locks[lock_id]
        except KeyError:
            raise UnknownLock(lock_id)

    def is_live(self, lock_id: str) -> bool:
        return self.lock_status.get(lock_id) == "live" and self.height < self.locks[lock_id].expiry_height

    # ------------------------------------------------------------
    # transactions
    # ------------------------------------------------------------

    def check_tx(self, tx: ChainTx) -> Optional[RejectReason]:
        infra = self._sessions.get(tx.session_id)
        if infra is None:
            return RejectReason.UNKNOWN_SESSION
        reason = binding_ok(tx, infra)
        if reason is not None:
            return reason
        record = self.locks.get(tx.lock_id)
        if record is None:
            return RejectReason.UNKNOWN_LOCK
        if self.lock_status[tx.lock_id] == "spent":
            return RejectReason.LOCK_SPENT
        if self.lock_status[tx.lock_id] == "refunded" or self.height >= record.expiry_height:
            return RejectReason.LOCK_EXPIRED
        m = tx.message
        if (
            m.chain_id != self.chain_id
            or m.lock_ref != tx.lock_id
            or m.asset != record.asset
            or m.amount != record.amount
            or m.payer != record.owner
            or m.payee != record.beneficiary
            or record.session_id != tx.session_id
        ):
            return RejectReason.LOCK_MISMATCH
        return None

    def verify_tx(self, tx: ChainTx) -> bool:
        return self.check_tx(tx) is None

    def submit_tx(self, tx: ChainTx) -> SubmitResult:
        reason = self.check_tx(tx)
        if reason is not None:
            logger.info("%s: rejected tx on %s: %s", self.chain_id, tx.lock_id, reason.value)
            return Rejected(reason)
        record = self.locks[tx.lock_id]
        self.height += 1
        self.lock_status[tx.lock_id] = "spent"
        self._credit(record.beneficiary, record.asset, record.amount)
        self.accepted.append(tx)
        self.events.append(ChainEvent(self.height, "tx", tx.lock_id, _payload(**tx.to_dict()), tx))
        logger.info("%s: accepted tx on %s at height %d", self.chain_id, tx.lock_id, self.height)
        return Accepted(self.height, tx.lock_id)

    def advance_height(self, n: int = 1) -> int:
        """Mine ``n`` empty blocks, refunding locks as they expire."""
        if n < 0:
            raise ValueError("heights only move forward")
        for _ in range(n):
            self.height += 1
            for lock_id, record in self.locks.items():
                if self.lock_status[lock_id] == "live" and self.height >= record.expiry_height:
                    self.lock_status[lock_id] = "refunded"
                    self._credit(record.owner, record.asset, record.amount)
                    self.events.append(ChainEvent(
                        self.height, "refund", lock_id, _payload(lock=lock_id, owner=_key(record.owner))
                    ))
                    logger.info("%s: refunded %s", self.chain_id, lock_id)
        return self.height

    def observe(self, from_height: int = 0) -> List[ChainEvent]:
        return [e for e in self.events if e.height >= from_height]

    def event_log(self) -> List[str]:
        return [e.to_line() for e in self.events]
