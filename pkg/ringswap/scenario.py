"""
Scenario runner: builds a ring swap world and drives it under a deterministic schedule.

Party i locks its coin on its own chain for party i+1. The run goes through four
stages: pre-signature ring, initiator finalization, completion rounds (parties
observe all chains in a seeded order, complete their own leg and claim incoming legs
their payer abandoned) and finally expiry, which refunds every lock still live.
"""

import hashlib
import logging
import random
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from .adversary import (
    Behavior,
    BehaviorKind,
    ImpersonationVariant,
    ScenarioOutcome,
    collusion_attempt,
    count_accepted,
    impersonation_attempt,
    judge,
    leak_attempt,
)
from .chain import Accepted, ChainState, ChainTx, LockRecord, Rejected, SubmitResult
from .crypto.accumulator import RsaAccumulator
from .crypto.group import Group, Scalar
from .crypto.schnorr import ChallengeMode, KeyPair
from .errors import ProtocolError, UnknownParty
from .infrastructure import SwapInfrastructure
from .session import (
    Party,
    PreSigBundle,
    SwapSession,
    SwapTerms,
    adapt_published,
    finalize,
    initiator_start,
    observe_and_complete,
    participant_step,
    session_init,
)
from .transcript import TranscriptWriter

logger = logging.getLogger(__name__)

PARTY_NAMES = ("alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi")

LEAK_TRIALS = 3


def party_names(n: int) -> List[str]:
    if n <= len(PARTY_NAMES):
        return list(PARTY_NAMES[:n])
    return [f"party{i + 1}" for i in range(n)]


@dataclass
class SwapWorld:
    group: Group
    terms: SwapTerms
    infra: SwapInfrastructure
    keypairs: Dict[str, KeyPair]
    chains: Dict[str, ChainState]
    lock_ids: Dict[str, str]
    amount: int
    expiry: int
    recorder: Optional[TranscriptWriter] = None
    attack_results: List[SubmitResult] = field(default_factory=list)

    def record(self, kind: str, body: Dict) -> None:
        if self.recorder is not None:
            self.recorder.record(kind, body)

    def submit(self, chain_id: str, tx: ChainTx, actor: str = "") -> SubmitResult:
        chain = self.chains[chain_id]
        view = (self.infra.acc_keys, self.infra.acc_msgs, self.infra.presig_acc)
        result = chain.submit_tx(tx)
        self.record("tx", {
            "actor": actor,
            "chain": chain_id,
            "height": chain.height,
            "result": "accepted" if isinstance(result, Accepted) else result.reason.value,
            "tx": tx.to_dict(),
            "acc_keys": view[0].hex(),
            "acc_msgs": view[1].hex(),
            "presig_acc": view[2].hex(),
        })
        return result


def build_world(
    n: int,
    group: Group,
    accumulator: RsaAccumulator,
    seed: str,
    amount: int = 100,
    expiry: int = 20,
    mode: ChallengeMode = ChallengeMode.RING,
    recorder: Optional[TranscriptWriter] = None,
) -> SwapWorld:
    """Fund, lock and agree terms for an N-party ring."""
    names = party_names(n)
    session_id = "swap-" + hashlib.sha256(f"session/{seed}".encode("utf-8")).hexdigest()[:12]
    keypairs = {name: KeyPair.generate(group, f"{seed}/{name}") for name in names}
    parties = [Party(name, keypairs[name].pk, f"{name}-chain") for name in names]
    chains: Dict[str, ChainState] = {}
    lock_ids: Dict[str, str] = {}
    assets = []
    for i, party in enumerate(parties):
        chain = ChainState(party.chain_id)
        asset = f"{party.party_id}-coin"
        chain.fund(party.pk, asset, amount)
        payee = parties[(i + 1) % n]
        lock_ids[party.party_id] = chain.lock_asset(
            LockRecord(asset, amount, party.pk, payee.pk, session_id, expiry)
        )
        chains[party.chain_id] = chain
        assets.append(asset)
    terms = SwapTerms.ring(
        session_id, parties, assets, [lock_ids[p.party_id] for p in parties], amount, mode
    )
    infra = SwapInfrastructure(accumulator)
    infra.register_terms(terms)
    for chain in chains.values():
        chain.attach(infra)
    world = SwapWorld(group, terms, infra, keypairs, chains, lock_ids, amount, expiry, recorder)
    world.record("terms", {
        "session_id": session_id,
        "mode": mode.value,
        "parties": [{"id": p.party_id, "pk": p.pk.to_bytes().hex(), "chain": p.chain_id} for p in parties],
        "messages": [m.to_dict() for m in terms.messages],
        "acc_keys": infra.acc_keys.hex(),
        "acc_msgs": infra.acc_msgs.hex(),
    })
    for party in parties:
        lock_id = lock_ids[party.party_id]
        world.record("lock", {"chain": party.chain_id, "lock": lock_id, "expiry": expiry})
    return world


# ============================================================
# SCHEDULER
# ============================================================

class _Run:
    """Mutable state of one scenario run."""

    def __init__(self, world: SwapWorld, behaviors: Mapping[str, Behavior], seed: str):
        self.world = world
        self.terms = world.terms
        self.behaviors = {p.party_id: behaviors.get(p.party_id, Behavior.honest()) for p in world.terms.parties}
        for pid, behavior in behaviors.items():
            self.terms.position(pid)
            if behavior.target is not None:
                self.terms.position(behavior.target)
        self.rng = random.Random(f"ringswap/schedule/{seed}")
        self.attack_rng = random.Random(f"ringswap/attack/{seed}")
        self.seed = seed
        self.rejections: List[str] = []
        self.sessions: Dict[str, SwapSession] = {}
        self.learned: Dict[str, Scalar] = {}
        self.submitted: set = set()
        self.leaked = False

    def flush(self, party_id: str) -> None:
        """Copy the session's new phase, error and extraction events into the transcript."""
        for kind, body in self.sessions[party_id].new_events():
            self.world.record(kind, body)

    def reject(self, party_id: str, exc: ProtocolError) -> None:
        self.rejections.append(f"{party_id}: {type(exc).__name__}")
        self.flush(party_id)

    def record_presig(self, party_id: str) -> None:
        ps = self.sessions[party_id].my_presig
        self.world.record("presig", {
            "party": party_id,
            "presig": ps.to_bytes().hex(),
            "presig_acc": self.world.infra.presig_acc.hex(),
        })

    def adversary(self, label: str) -> KeyPair:
        return KeyPair.generate(self.world.group, f"{self.seed}/outsider/{label}")

    def maybe_leak(self, holder: str, bundle: PreSigBundle) -> None:
        behavior = self.behaviors[holder]
        if behavior.kind is not BehaviorKind.LEAKER or self.leaked:
            return
        if len(bundle.presigs) < (behavior.leak_point or 1):
            return
        self.leaked = True
        self.world.record("leak", {"party": holder, "presigs": len(bundle.presigs)})
        self.world.attack_results.extend(
            leak_attempt(self.world, bundle, self.adversary("leak"), self.attack_rng, LEAK_TRIALS)
        )

    # ------------------------------------------------------------

    def ring(self) -> Optional[PreSigBundle]:
        parties = self.terms.parties
        initiator = parties[0].party_id
        if not self.behaviors[initiator].signs_ring:
            self.world.record("dropout", {"party": initiator})
            return None
        try:
            bundle = initiator_start(self.sessions[initiator])
        except ProtocolError as exc:
            self.reject(initiator, exc)
            return None
        self.flush(initiator)
        self.record_presig(initiator)
        holder = 0
        while True:
            holder_id = parties[holder].party_id
            self.maybe_leak(holder_id, bundle)
            nxt = holder + 1
            behavior = self.behaviors[holder_id]
            if (behavior.kind is BehaviorKind.SKIPPER and nxt < len(parties)
                    and parties[nxt].party_id == behavior.target):
                nxt += 1
            if nxt >= len(parties):
                self.world.record("bundle", {"from": holder_id, "to": initiator, "parties": bundle.party_ids()})
                return bundle
            recipient = parties[nxt].party_id
            if not self.behaviors[recipient].signs_ring:
                self.world.record("dropout", {"party": recipient})
                return None
            self.world.record("bundle", {"from": holder_id, "to": recipient, "parties": bundle.party_ids()})
            try:
                bundle = participant_step(self.sessions[recipient], bundle)
            except ProtocolError as exc:
                self.reject(recipient, exc)
                return None
            self.flush(recipient)
            self.record_presig(recipient)
            holder = nxt

    def impersonations(self, after_completion: bool) -> None:
        for pid, behavior in self.behaviors.items():
            if behavior.kind is not BehaviorKind.IMPERSONATOR:
                continue
            eve = self.adversary(f"impersonate/{pid}")
            if after_completion:
                variants = [ImpersonationVariant.REPLAY]
                if not any(tx.signature.party_id == behavior.target
                           for chain in self.world.chains.values() for tx in chain.accepted):
                    continue
            else:
                variants = [ImpersonationVariant.OWN_KEY, ImpersonationVariant.FORGED_WITNESS]
            for variant in variants:
                result = impersonation_attempt(self.world, eve, behavior.target, variant, self.attack_rng)
                self.world.attack_results.append(result)

    def submit_leg(self, party_id: str, signer_id: str, signature) -> SubmitResult:
        world = self.world
        presig = world.infra.published(signer_id)
        tx = ChainTx.for_leg(world.infra, self.terms.message_for(signer_id), signature, presig)
        result = world.submit(self.terms.party(signer_id).chain_id, tx, party_id)
        if isinstance(result, Rejected):
            self.rejections.append(f"{party_id}: {result.reason.value}")
        return result

    def observe(self, party_id: str, cursors: Dict[str, Dict[str, int]]) -> None:
        session = self.sessions[party_id]
        if party_id in self.learned or session.my_presig is None:
            return
        for chain_id in sorted(self.world.chains):
            chain = self.world.chains[chain_id]
            events = chain.observe(cursors[party_id][chain_id])
            cursors[party_id][chain_id] = chain.height + 1
            for event in events:
                if event.kind != "tx" or event.tx.session_id != self.terms.session_id:
                    continue
                try:
                    observe_and_complete(session, event.tx.signature, event.tx.presig)
                except ProtocolError as exc:
                    self.reject(party_id, exc)
                    continue
                self.learned[party_id] = session.learned_t
                self.flush(party_id)
                return

    def completion(self) -> None:
        parties = [p.party_id for p in self.terms.parties]
        cursors = {pid: {cid: 0 for cid in self.world.chains} for pid in parties}
        for round_no in range(len(parties) + 2):
            progress = False
            order = list(parties)
            self.rng.shuffle(order)
            for pid in order:
                behavior = self.behaviors[pid]
                self.observe(pid, cursors)
                if pid not in self.learned:
                    continue
                if behavior.broadcasts and pid not in self.submitted:
                    self.submitted.add(pid)
                    self.submit_leg(pid, pid, self.sessions[pid].my_signature)
                    progress = True
                if behavior.is_honest and round_no > 0:
                    payer = self.terms.predecessor(pid)
                    chain = self.world.chains[payer.chain_id]
                    presig = self.world.infra.published(payer.party_id)
                    if presig is not None and chain.is_live(self.world.lock_ids[payer.party_id]):
                        signature = adapt_published(self.sessions[pid], presig)
                        self.submit_leg(pid, payer.party_id, signature)
                        progress = True
            if not progress and round_no > 0:
                break

    def run(self) -> ScenarioOutcome:
        world, terms = self.world, self.terms
        for party in terms.parties:
            pid = party.party_id
            self.sessions[pid] = session_init(terms, world.infra, world.keypairs[pid], pid, f"{self.seed}/{pid}")
            self.flush(pid)
        initiator = terms.initiator.party_id
        world.record("adaptor", {"T": world.infra.T.to_bytes().hex()})

        bundle = self.ring()
        if bundle is not None:
            self.impersonations(after_completion=False)
            try:
                signature = finalize(self.sessions[initiator], bundle)
            except ProtocolError as exc:
                self.reject(initiator, exc)
                signature = None
            else:
                self.flush(initiator)
            if signature is not None and not self.behaviors[initiator].broadcasts:
                world.record("dropout", {"party": initiator})
                signature = None
            if signature is not None:
                self.learned[initiator] = self.sessions[initiator].learned_t
                self.submitted.add(initiator)
                self.submit_leg(initiator, initiator, signature)
                self.completion()
                self.after_completion()

        for chain in world.chains.values():
            if chain.height < world.expiry:
                chain.advance_height(world.expiry - chain.height)
            for lock_id, status in chain.lock_status.items():
                if status == "refunded":
                    world.record("refund", {"chain": chain.chain_id, "lock": lock_id})
        return self.outcome()

    def after_completion(self) -> None:
        self.impersonations(after_completion=True)
        t = self.learned.get(self.terms.initiator.party_id)
        leakers = [pid for pid, b in self.behaviors.items() if b.kind is BehaviorKind.LEAKER]
        if leakers and t is not None:
            bundle = PreSigBundle(self.terms.session_id, self.world.infra.T,
                                  tuple(self.world.infra.published_all()))
            self.world.attack_results.extend(
                leak_attempt(self.world, bundle, self.adversary("leak"), self.attack_rng, LEAK_TRIALS, t)
            )
        colluders = [pid for pid, b in self.behaviors.items() if b.kind is BehaviorKind.COLLUDER]
        known = [self.learned[c] for c in colluders if c in self.learned]
        if colluders and known:
            self.world.attack_results.extend(
                collusion_attempt(self.world, colluders, known[0], self.attack_rng)
            )

    def outcome(self) -> ScenarioOutcome:
        world, terms = self.world, self.terms
        by_key = {p.pk.to_bytes().hex(): p.party_id for p in terms.parties}
        delta: Dict[str, Dict[str, int]] = {p.party_id: {} for p in terms.parties}
        for party in terms.parties:
            delta[party.party_id][f"{party.party_id}-coin"] = -world.amount
        for chain in world.chains.values():
            for key, wallet in chain.balances().items():
                pid = by_key.get(key)
                if pid is None:
                    continue
                for asset, amount in wallet.items():
                    delta[pid][asset] = delta[pid].get(asset, 0) + amount
        delta = {pid: {a: v for a, v in sorted(d.items()) if v} for pid, d in delta.items()}
        owed = {
            p.party_id: world.chains[terms.predecessor(p.party_id).chain_id]
            .lock_status[world.lock_ids[terms.predecessor(p.party_id).party_id]] == "spent"
            for p in terms.parties
        }
        all_refunded = all(
            status == "refunded" for chain in world.chains.values() for status in chain.lock_status.values()
        )
        honest = [pid for pid, b in self.behaviors.items() if b.is_honest]
        attacks = count_accepted(world.attack_results)
        verdict = judge(owed, honest, all_refunded, attacks)
        rejections = self.rejections + [
            f"attack: {r.reason.value}" for r in world.attack_results if isinstance(r, Rejected)
        ]
        outcome = ScenarioOutcome(
            verdict,
            delta,
            {cid: len(chain.accepted) for cid, chain in sorted(world.chains.items())},
            rejections,
            attacks,
            {pid: t.to_bytes().hex() for pid, t in sorted(self.learned.items())},
        )
        world.record("outcome", outcome.to_dict())
        logger.info("session %s: %s", terms.session_id, verdict.value)
        return outcome


def run_scenario(
    world: SwapWorld,
    behaviors: Mapping[str, Behavior],
    seed: str,
) -> ScenarioOutcome:
    """Drive ``world`` to an outcome; same world, behaviours and seed give the same outcome."""
    try:
        run = _Run(world, behaviors, seed)
    except UnknownParty as exc:
        raise ValueError(f"behaviour names an unknown party: {exc}")
    return run.run()
