"""Tests for the chain simulator and its accumulator-aware verification rule."""

from dataclasses import replace

import pytest

from ringswap.adversary import Behavior
from ringswap.chain import Accepted, ChainEvent, ChainState, ChainTx, LockRecord, Rejected, RejectReason
from ringswap.crypto.schnorr import KeyPair, NoncePair, PreSignature, complete, pre_sign
from ringswap.errors import AlreadyLocked, DecodeError, InsufficientFunds, UnknownLock
from ringswap.scenario import run_scenario
from ringswap.session import finalize, initiator_start, observe_and_complete, participant_step


@pytest.fixture
def completed(make_world, make_sessions):
    """Three-party world whose ring finished and whose initiator finalized."""
    world = make_world(3, seed="chain")
    sessions = make_sessions(world, seed="chain")
    bundle = initiator_start(sessions["alice"])
    for pid in ("bob", "carol"):
        bundle = participant_step(sessions[pid], bundle)
    signature = finalize(sessions["alice"], bundle)
    return world, sessions, bundle, signature


def _alice_tx(world, bundle, signature):
    return ChainTx.for_leg(world.infra, world.terms.message_for("alice"), signature, bundle.get("alice"))


class TestLocks:
    def test_fresh_lock_visible(self, make_world):
        world = make_world(2)
        chain = world.chains["alice-chain"]
        lock_id = world.lock_ids["alice"]
        assert lock_id == "alice-chain/lock/0"
        assert chain.is_live(lock_id)
        kinds = [e.kind for e in chain.observe(0)]
        assert kinds == ["fund", "lock"]

    def test_double_lock(self, make_world):
        world = make_world(2)
        chain = world.chains["alice-chain"]
        with pytest.raises(AlreadyLocked):
            chain.lock_asset(chain.lock(world.lock_ids["alice"]))

    def test_insufficient_funds(self, tiny):
        chain = ChainState("c")
        kp = KeyPair.generate(tiny, "owner")
        chain.fund(kp.pk, "coin", 5)
        with pytest.raises(InsufficientFunds):
            chain.lock_asset(LockRecord("coin", 6, kp.pk, kp.pk, "s", 10))

    def test_unknown_lock(self):
        with pytest.raises(UnknownLock):
            ChainState("c").lock("c/lock/9")

    def test_funds_move_into_lock(self, make_world):
        world = make_world(2)
        chain = world.chains["alice-chain"]
        assert chain.balance(world.terms.party("alice").pk, "alice-coin") == 0


class TestVerifyTx:
    def test_honest(self, completed):
        world, _, bundle, signature = completed
        assert world.chains["alice-chain"].verify_tx(_alice_tx(world, bundle, signature))

    def test_outsider_key(self, completed, tiny):
        world, _, bundle, signature = completed
        eve = KeyPair.generate(tiny, "eve")
        tx = replace(_alice_tx(world, bundle, signature), signer=eve.pk)
        assert world.chains["alice-chain"].check_tx(tx) is RejectReason.PK_NOT_MEMBER

    def test_unaccumulated_presig(self, completed):
        world, sessions, bundle, signature = completed
        bob = world.keypairs["bob"]
        leg = world.terms.message_for("bob")
        nonce = NoncePair.generate(world.group, "fresh")
        c = world.infra.challenge_for("bob", nonce.R, world.infra.T)
        ps = PreSignature("bob", c, pre_sign(bob, nonce, c), nonce.R, world.infra.T)
        t = sessions["alice"].my_secret.t
        tx = ChainTx(
            world.infra.session_id, leg.lock_ref, leg, complete(ps, t), ps, bob.pk,
            world.infra.key_witness(bob.pk), world.infra.presig_witness(bundle.get("bob")),
        )
        assert world.chains["bob-chain"].check_tx(tx) is RejectReason.PRESIG_NOT_MEMBER

    def test_unbound_signature(self, completed):
        world, _, bundle, signature = completed
        honest = _alice_tx(world, bundle, signature)
        other = bundle.get("bob")
        tx = replace(honest, presig=other, presig_witness=world.infra.presig_witness(other))
        assert world.chains["alice-chain"].check_tx(tx) is RejectReason.CHALLENGE_MISMATCH

    def test_pre_signature_as_signature(self, completed):
        world, _, bundle, signature = completed
        honest = _alice_tx(world, bundle, signature)
        tx = replace(honest, signature=replace(signature, s=bundle.get("alice").s_pre))
        assert world.chains["alice-chain"].check_tx(tx) is RejectReason.SIGNATURE_INVALID

    def test_wrong_chain(self, completed):
        world, _, bundle, signature = completed
        tx = _alice_tx(world, bundle, signature)
        assert world.chains["bob-chain"].check_tx(tx) is RejectReason.UNKNOWN_LOCK

    def test_unknown_session(self, completed):
        world, _, bundle, signature = completed
        tx = replace(_alice_tx(world, bundle, signature), session_id="swap-other")
        assert world.chains["alice-chain"].check_tx(tx) is RejectReason.UNKNOWN_SESSION


class TestSubmit:
    def test_accept_then_replay(self, completed):
        world, _, bundle, signature = completed
        chain = world.chains["alice-chain"]
        tx = _alice_tx(world, bundle, signature)
        result = chain.submit_tx(tx)
        assert isinstance(result, Accepted) and result.ok
        assert result.height == 1
        replay = chain.submit_tx(tx)
        assert isinstance(replay, Rejected) and not replay.ok
        assert replay.reason is RejectReason.LOCK_SPENT
        bob_pk = world.terms.party("bob").pk
        assert chain.balance(bob_pk, "alice-coin") == world.amount

    def test_expired_lock(self, completed):
        world, _, bundle, signature = completed
        chain = world.chains["alice-chain"]
        chain.advance_height(world.expiry)
        result = chain.submit_tx(_alice_tx(world, bundle, signature))
        assert result.reason is RejectReason.LOCK_EXPIRED
        alice_pk = world.terms.party("alice").pk
        assert chain.balance(alice_pk, "alice-coin") == world.amount

    def test_claim_beats_refund(self, completed):
        world, _, bundle, signature = completed
        chain = world.chains["alice-chain"]
        chain.advance_height(world.expiry - 2)
        assert chain.submit_tx(_alice_tx(world, bundle, signature)).ok
        chain.advance_height(10)
        assert chain.lock_status[world.lock_ids["alice"]] == "spent"
        assert chain.balance(world.terms.party("alice").pk, "alice-coin") == 0

    def test_height_monotone(self):
        chain = ChainState("c")
        assert chain.advance_height(3) == 3
        with pytest.raises(ValueError):
            chain.advance_height(-1)


class TestObserve:
    def test_order_and_completion(self, completed):
        world, sessions, bundle, signature = completed
        chain = world.chains["alice-chain"]
        chain.submit_tx(_alice_tx(world, bundle, signature))
        events = chain.observe(1)
        assert [e.kind for e in events] == ["tx"]
        event = events[0]
        mine = observe_and_complete(sessions["carol"], event.tx.signature, event.tx.presig)
        carol_leg = world.terms.message_for("carol")
        tx = ChainTx.for_leg(world.infra, carol_leg, mine, bundle.get("carol"))
        assert world.chains["carol-chain"].submit_tx(tx).ok

    def test_empty_range(self, make_world):
        chain = make_world(2).chains["alice-chain"]
        assert chain.observe(chain.height + 1) == []

    def test_event_log_lines(self, make_world):
        chain = make_world(2).chains["alice-chain"]
        lines = chain.event_log()
        assert len(lines) == 2
        assert lines[1].startswith("0 lock ")
        event = ChainEvent.from_line(lines[1])
        assert event == chain.events[1]
        assert event.lock_id == "alice-chain/lock/0"
        assert ChainEvent.from_line(lines[0]).lock_id == ""

    def test_tx_dict_round_trip(self, completed):
        world, _, bundle, signature = completed
        tx = _alice_tx(world, bundle, signature)
        assert ChainTx.from_dict(world.group, tx.to_dict()) == tx


class TestReplay:
    @pytest.mark.parametrize("behaviors", [{}, {"bob": Behavior.dropout_before_finalize()}])
    def test_rebuilds_chain_state(self, make_world, behaviors):
        world = make_world(3, seed="replay")
        run_scenario(world, behaviors, "replay")
        for chain_id, chain in world.chains.items():
            rebuilt = ChainState.replay(chain_id, world.group, chain.event_log())
            assert rebuilt.balances() == chain.balances()
            assert rebuilt.lock_status == chain.lock_status
            assert rebuilt.locks == chain.locks
            assert rebuilt.accepted == chain.accepted
            assert rebuilt.event_log() == chain.event_log()
            assert rebuilt.height <= chain.height

    def test_tampered_payload(self, make_world):
        lines = make_world(2).chains["alice-chain"].event_log()
        lines[1] = lines[1].replace('"amount":100', '"amount":900')
        with pytest.raises(DecodeError):
            ChainState.replay("alice-chain", make_world(2).group, lines)

    def test_unknown_kind(self, tiny):
        line = ChainEvent(0, "mint", "", '{"amount":1}').to_line()
        with pytest.raises(DecodeError):
            ChainState.replay("x", tiny, [line])

    @pytest.mark.parametrize("line", ["", "garbage", "x fund - 00 {}"])
    def test_malformed_line(self, line):
        with pytest.raises(DecodeError):
            ChainEvent.from_line(line)
