"""Tests for the N-party swap session engine and its shared infrastructure."""

import itertools
from dataclasses import replace

import pytest

from ringswap.crypto.group import point_mul
from ringswap.crypto.schnorr import ChallengeMode, KeyPair, PreSignature, compute_challenge, pre_verify, verify_full
from ringswap.errors import (
    BadPreSignature,
    ChallengeMismatch,
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
from ringswap.infrastructure import SwapInfrastructure
from ringswap.scenario import build_world
from ringswap.session import (
    Party,
    Phase,
    PreSigBundle,
    SwapTerms,
    abort,
    adapt_published,
    finalize,
    initiator_start,
    observe_and_complete,
    participant_step,
    session_init,
)


def _ring(sessions, order):
    bundle = initiator_start(sessions[order[0]])
    for pid in order[1:]:
        bundle = participant_step(sessions[pid], bundle)
    return bundle


def _omit(bundle, omitted):
    kept = tuple(ps for ps in bundle.presigs if ps.party_id not in omitted)
    return PreSigBundle(bundle.session_id, bundle.T, kept)


def _nonempty_subsets(ids):
    for size in range(1, len(ids) + 1):
        yield from itertools.combinations(ids, size)


class TestTerms:
    def test_ring_messages(self, make_world):
        world = make_world(4)
        terms = world.terms
        for i, party in enumerate(terms.parties):
            message = terms.messages[i]
            assert message.payer == party.pk
            assert message.payee == terms.parties[(i + 1) % 4].pk
        assert terms.successor("dave").party_id == "alice"
        assert terms.predecessor("alice").party_id == "dave"

    def test_duplicate_keys(self, tiny):
        kp = KeyPair.generate(tiny, "same")
        parties = [Party("alice", kp.pk, "a"), Party("bob", kp.pk, "b")]
        terms = SwapTerms.ring("s", parties, ["x", "y"], ["a/lock/0", "b/lock/0"], 1)
        with pytest.raises(DuplicateParty):
            terms.validate()

    def test_duplicate_ids(self, tiny):
        parties = [
            Party("alice", KeyPair.generate(tiny, "1").pk, "a"),
            Party("alice", KeyPair.generate(tiny, "2").pk, "b"),
        ]
        terms = SwapTerms.ring("s", parties, ["x", "y"], ["a/lock/0", "b/lock/0"], 1)
        with pytest.raises(DuplicateParty):
            terms.validate()

    def test_single_party(self, tiny):
        parties = [Party("alice", KeyPair.generate(tiny, "1").pk, "a")]
        terms = SwapTerms.ring("s", parties, ["x"], ["a/lock/0"], 1)
        with pytest.raises(EmptySession):
            terms.validate()

    def test_unknown_payee(self, tiny):
        parties = [
            Party("alice", KeyPair.generate(tiny, "1").pk, "a"),
            Party("bob", KeyPair.generate(tiny, "2").pk, "b"),
        ]
        terms = SwapTerms.ring("s", parties, ["x", "y"], ["a/lock/0", "b/lock/0"], 1)
        outsider = KeyPair.generate(tiny, "3").pk
        bad = replace(terms, messages=(replace(terms.messages[0], payee=outsider), terms.messages[1]))
        with pytest.raises(UnknownParty):
            bad.validate()

    def test_unknown_position(self, make_world):
        with pytest.raises(UnknownParty):
            make_world(2).terms.position("mallory")


class TestSessionInit:
    def test_two_party_context(self, make_world, make_sessions):
        world = make_world(2)
        sessions = make_sessions(world)
        alice = sessions["alice"]
        assert alice.is_initiator
        assert alice.T is not None and alice.T == world.infra.T
        assert alice.my_secret is not None
        ctx = alice.context
        assert ctx.acc_keys == world.infra.acc_keys
        assert ctx.acc_msgs == world.infra.acc_msgs
        assert sessions["bob"].T is None

    def test_key_digest_recomputes(self, make_world, toy_acc):
        world = make_world(5)
        keys = [p.pk.to_bytes() for p in world.terms.parties]
        assert world.infra.acc_keys == toy_acc.digest(keys)
        msgs = [m.to_bytes() for m in world.terms.messages]
        assert world.infra.acc_msgs == toy_acc.digest(msgs)

    def test_wrong_keypair(self, make_world):
        world = make_world(2)
        with pytest.raises(UnknownParty):
            session_init(world.terms, world.infra, world.keypairs["bob"], "alice", "x")

    def test_register_terms_idempotent(self, make_world):
        world = make_world(3)
        before = world.infra.acc_keys
        world.infra.register_terms(world.terms)
        assert world.infra.acc_keys == before
        other = make_world(3, seed="other")
        with pytest.raises(ProtocolError):
            world.infra.register_terms(other.terms)


class TestInitiatorStart:
    def test_bundle_verifies(self, make_world, make_sessions):
        world = make_world(3)
        sessions = make_sessions(world)
        bundle = initiator_start(sessions["alice"])
        ps = bundle.get("alice")
        alice = world.terms.party("alice")
        assert pre_verify(ps, alice.pk)
        c = compute_challenge(
            ps.R, ps.T, alice.pk, world.infra.acc_keys, world.infra.acc_msgs,
            world.terms.message_for("alice").to_bytes(), ChallengeMode.RING,
        )
        assert c == ps.c
        assert sessions["alice"].phase is Phase.COLLECTING

    def test_second_call(self, make_world, make_sessions):
        sessions = make_sessions(make_world(3))
        initiator_start(sessions["alice"])
        with pytest.raises(WrongPhase):
            initiator_start(sessions["alice"])

    def test_not_initiator(self, make_world, make_sessions):
        sessions = make_sessions(make_world(3))
        with pytest.raises(NotInitiator):
            initiator_start(sessions["bob"])


class TestParticipantStep:
    def test_three_party_trace(self, make_world, make_sessions):
        world = make_world(3)
        sessions = make_sessions(world)
        first = initiator_start(sessions["alice"])
        second = participant_step(sessions["bob"], first)
        assert second.party_ids() == ["alice", "bob"]
        assert sessions["bob"].T == first.T
        assert world.infra.is_accumulated(second.get("bob"))
        third = participant_step(sessions["carol"], second)
        assert third.party_ids() == ["alice", "bob", "carol"]

    def test_skipped_predecessor(self, make_world, make_sessions):
        sessions = make_sessions(make_world(3))
        bundle = initiator_start(sessions["alice"])
        with pytest.raises(MissingPredecessor) as info:
            participant_step(sessions["carol"], bundle)
        assert info.value.missing == ("bob",)
        assert sessions["carol"].events[-1][0] == "error"

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_every_omission_refused(self, make_world, make_sessions, n):
        world = make_world(n, seed=f"omit/{n}")
        sessions = make_sessions(world)
        order = [p.party_id for p in world.terms.parties]
        bundle = initiator_start(sessions[order[0]])
        for k in range(1, n):
            recipient = sessions[order[k]]
            for omitted in _nonempty_subsets(order[:k]):
                with pytest.raises(MissingPredecessor) as info:
                    participant_step(recipient, _omit(bundle, omitted))
                assert info.value.missing == omitted
                assert recipient.phase is Phase.INIT
            bundle = participant_step(recipient, bundle)
        alice = sessions[order[0]]
        for omitted in _nonempty_subsets(order):
            with pytest.raises(IncompleteBundle) as info:
                finalize(alice, _omit(bundle, omitted))
            assert info.value.missing == omitted
        assert verify_full(finalize(alice, bundle), world.terms.party(order[0]).pk)

    def test_perturbed_presig(self, make_world, make_sessions):
        sessions = make_sessions(make_world(3))
        bundle = initiator_start(sessions["alice"])
        ps = bundle.get("alice")
        bad = PreSignature(ps.party_id, ps.c, ps.s_pre + 1, ps.R, ps.T)
        with pytest.raises(BadPreSignature):
            participant_step(sessions["bob"], PreSigBundle(bundle.session_id, bundle.T, (bad,)))

    def test_wrong_challenge(self, make_world, make_sessions):
        sessions = make_sessions(make_world(3))
        bundle = initiator_start(sessions["alice"])
        ps = bundle.get("alice")
        bad = PreSignature(ps.party_id, ps.c + 1, ps.s_pre, ps.R, ps.T)
        with pytest.raises(ChallengeMismatch):
            participant_step(sessions["bob"], PreSigBundle(bundle.session_id, bundle.T, (bad,)))

    def test_foreign_T(self, make_world, make_sessions, tiny):
        sessions = make_sessions(make_world(3))
        bundle = initiator_start(sessions["alice"])
        other_T = point_mul(12345, tiny.generator)
        with pytest.raises(BadPreSignature):
            participant_step(sessions["bob"], PreSigBundle(bundle.session_id, other_T, bundle.presigs))

    def test_unaccumulated_presig(self, make_world, make_sessions):
        world = make_world(3)
        sessions = make_sessions(world)
        # a second, fresh infrastructure knows nothing of alice's pre-signature
        infra = SwapInfrastructure(world.infra.accumulator)
        infra.register_terms(world.terms)
        infra.publish_T(world.infra.T)
        bob = session_init(world.terms, infra, world.keypairs["bob"], "bob", "b")
        bundle = initiator_start(sessions["alice"])
        with pytest.raises(UnknownPreSignature):
            participant_step(bob, bundle)

    def test_signs_once(self, make_world, make_sessions):
        sessions = make_sessions(make_world(3))
        bundle = initiator_start(sessions["alice"])
        participant_step(sessions["bob"], bundle)
        with pytest.raises(WrongPhase):
            participant_step(sessions["bob"], bundle)


class TestFinalize:
    def test_honest(self, make_world, make_sessions):
        world = make_world(3)
        sessions = make_sessions(world)
        bundle = _ring(sessions, ["alice", "bob", "carol"])
        alice = sessions["alice"]
        signature = finalize(alice, bundle)
        assert verify_full(signature, world.terms.party("alice").pk)
        assert signature.s - alice.my_presig.s_pre == alice.my_secret.t
        assert alice.phase is Phase.FINALIZED

    def test_incomplete(self, make_world, make_sessions):
        sessions = make_sessions(make_world(3))
        partial = participant_step(sessions["bob"], initiator_start(sessions["alice"]))
        with pytest.raises(IncompleteBundle) as info:
            finalize(sessions["alice"], partial)
        assert info.value.missing == ("carol",)
        # still collecting: the full bundle is accepted afterwards
        full = participant_step(sessions["carol"], partial)
        finalize(sessions["alice"], full)

    def test_not_initiator(self, make_world, make_sessions):
        sessions = make_sessions(make_world(2))
        bundle = _ring(sessions, ["alice", "bob"])
        with pytest.raises(NotInitiator):
            finalize(sessions["bob"], bundle)

    def test_abort_after_finalize_refused(self, make_world, make_sessions):
        sessions = make_sessions(make_world(2))
        finalize(sessions["alice"], _ring(sessions, ["alice", "bob"]))
        with pytest.raises(WrongPhase):
            abort(sessions["alice"])


class TestObserveAndComplete:
    def test_participant_completes(self, make_world, make_sessions):
        world = make_world(3)
        sessions = make_sessions(world)
        bundle = _ring(sessions, ["alice", "bob", "carol"])
        signature = finalize(sessions["alice"], bundle)
        bob = sessions["bob"]
        mine = observe_and_complete(bob, signature, bundle.get("alice"))
        assert verify_full(mine, world.terms.party("bob").pk)
        assert bob.learned_t == sessions["alice"].my_secret.t
        assert bob.phase is Phase.COMPLETED
        assert observe_and_complete(bob, signature, bundle.get("alice")) == mine

    def test_initiator_gets_same_secret(self, make_world, make_sessions):
        sessions = make_sessions(make_world(3))
        bundle = _ring(sessions, ["alice", "bob", "carol"])
        signature = finalize(sessions["alice"], bundle)
        observe_and_complete(sessions["alice"], signature, bundle.get("alice"))
        assert sessions["alice"].learned_t == sessions["alice"].my_secret.t

    def test_cross_session(self, make_world, make_sessions):
        world = make_world(3, seed="one")
        other = make_world(3, seed="two")
        sessions = make_sessions(world)
        foreign = make_sessions(other, seed="two")
        _ring(sessions, ["alice", "bob", "carol"])
        foreign_bundle = _ring(foreign, ["alice", "bob", "carol"])
        foreign_sig = finalize(foreign["alice"], foreign_bundle)
        with pytest.raises(SecretMismatch):
            observe_and_complete(sessions["bob"], foreign_sig, foreign_bundle.get("alice"))

    def test_cross_session_production_group(self, secp, toy_acc, make_sessions):
        order = ["alice", "bob", "carol"]
        for i in range(10):
            world = build_world(3, secp, toy_acc, f"cross/{i}/one")
            other = build_world(3, secp, toy_acc, f"cross/{i}/two")
            sessions = make_sessions(world, seed=f"one/{i}")
            foreign = make_sessions(other, seed=f"two/{i}")
            bundle = _ring(sessions, order)
            foreign_bundle = _ring(foreign, order)
            foreign_sig = finalize(foreign["alice"], foreign_bundle)
            for pid in order[1:]:
                with pytest.raises(SecretMismatch):
                    observe_and_complete(sessions[pid], foreign_sig, foreign_bundle.get("alice"))
            # the failed attempt leaves each session able to complete its own swap
            signature = finalize(sessions["alice"], bundle)
            for pid in order[1:]:
                mine = observe_and_complete(sessions[pid], signature, bundle.get("alice"))
                assert verify_full(mine, world.terms.party(pid).pk)

    def test_before_signing(self, make_world, make_sessions):
        sessions = make_sessions(make_world(3))
        bundle = _ring(sessions, ["alice", "bob", "carol"])
        signature = finalize(sessions["alice"], bundle)
        fresh = make_sessions(make_world(3))
        with pytest.raises(WrongPhase):
            observe_and_complete(fresh["bob"], signature, bundle.get("alice"))

    def test_every_party_completes(self, make_world, make_sessions):
        for n in range(2, 7):
            world = make_world(n, seed=f"n{n}")
            sessions = make_sessions(world)
            order = [p.party_id for p in world.terms.parties]
            bundle = _ring(sessions, order)
            signature = finalize(sessions[order[0]], bundle)
            for pid in order[1:]:
                mine = observe_and_complete(sessions[pid], signature, bundle.get(order[0]))
                assert verify_full(mine, world.terms.party(pid).pk)


class TestAdaptPublished:
    def test_payee_completes_dropped_leg(self, make_world, make_sessions):
        world = make_world(3)
        sessions = make_sessions(world)
        bundle = _ring(sessions, ["alice", "bob", "carol"])
        signature = finalize(sessions["alice"], bundle)
        observe_and_complete(sessions["alice"], signature, bundle.get("alice"))
        # carol drops out; alice, as payee of that leg, completes it
        claimed = adapt_published(sessions["alice"], world.infra.published("carol"))
        assert verify_full(claimed, world.terms.party("carol").pk)

    def test_needs_secret(self, make_world, make_sessions):
        world = make_world(3)
        sessions = make_sessions(world)
        bundle = _ring(sessions, ["alice", "bob", "carol"])
        with pytest.raises(WrongPhase):
            adapt_published(sessions["bob"], bundle.get("carol"))

    def test_abort_before_finalize(self, make_world, make_sessions):
        sessions = make_sessions(make_world(3))
        initiator_start(sessions["alice"])
        abort(sessions["bob"])
        assert sessions["bob"].phase is Phase.ABORTED


class TestEvents:
    def test_new_events_drain(self, make_world, make_sessions):
        sessions = make_sessions(make_world(2))
        alice = sessions["alice"]
        assert [kind for kind, _ in alice.new_events()] == ["init"]
        assert alice.new_events() == []
        initiator_start(alice)
        kinds = [kind for kind, _ in alice.new_events()]
        assert kinds and set(kinds) == {"phase"}
        with pytest.raises(WrongPhase):
            initiator_start(alice)
        (event,) = alice.new_events()
        assert event[0] == "error"
        assert event[1]["error"] == "WrongPhase"
        assert len(alice.events) == 1 + len(kinds) + 1
