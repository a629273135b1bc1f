"""Transcript writing, integrity checks and cryptographic re-verification."""

import json
from dataclasses import replace

import pytest

from ringswap.config import RunConfig
from ringswap.crypto.group import group_from_id
from ringswap.crypto.schnorr import PreSignature
from ringswap.errors import TranscriptError
from ringswap.pipeline import EXIT_OK, run_config
from ringswap.transcript import TranscriptWriter, canonical, read_transcript, verify_transcript


def _write_run(tmp_path, name="run", **fields):
    config = RunConfig.from_dict({"group": "tiny", "accumulator": "toy", "seed": "transcript", **fields})
    path = tmp_path / f"{name}.jsonl"
    assert run_config(config, path) == EXIT_OK
    return path


def _rebuild(records, edit):
    """Re-chain ``records`` after passing each body through ``edit``."""
    writer = TranscriptWriter()
    for index, record in enumerate(records):
        writer.record(record["kind"], edit(index, record["kind"], record["body"]))
    return writer.text()


class TestRoundTrip:
    def test_honest_run_verifies(self, tmp_path):
        path = _write_run(tmp_path)
        text = path.read_text(encoding="ascii")
        records = read_transcript(text)
        assert verify_transcript(text) == len(records)
        assert records[0]["kind"] == "header"
        assert records[-1]["kind"] == "end"
        kinds = [r["kind"] for r in records]
        assert kinds.count("presig") == 3
        assert kinds.count("tx") == 3

    def test_same_seed_same_bytes(self, tmp_path):
        first = _write_run(tmp_path, "first")
        second = _write_run(tmp_path, "second")
        assert first.read_bytes() == second.read_bytes()

    @pytest.mark.parametrize("behaviors", [
        {"carol": "dropout-after-finalize"},
        {"bob": "dropout-before-finalize"},
        {"alice": "skipper:bob"},
        {"alice": "impersonator:bob"},
        {"bob": "colluder", "carol": "colluder"},
    ])
    def test_adversarial_runs_verify(self, tmp_path, behaviors):
        parties = 5 if "colluder" in behaviors.values() else 3
        path = _write_run(tmp_path, behaviors=behaviors, parties=parties)
        text = path.read_text(encoding="ascii")
        assert verify_transcript(text) == len(text.splitlines())

    def test_session_events_recorded(self, tmp_path):
        records = read_transcript(_write_run(tmp_path).read_text(encoding="ascii"))
        kinds = [r["kind"] for r in records]
        assert kinds.count("init") == 3
        assert "phase" in kinds
        assert "extract" in kinds
        assert "error" not in kinds
        assert kinds.index("init") < kinds.index("presig")
        finals = {r["body"]["party"] for r in records if r["kind"] == "phase" and r["body"]["to"] == "COMPLETED"}
        assert {"bob", "carol"} <= finals

    def test_rejection_recorded(self, tmp_path):
        path = _write_run(tmp_path, behaviors={"alice": "skipper:bob"})
        text = path.read_text(encoding="ascii")
        errors = [r["body"] for r in read_transcript(text) if r["kind"] == "error"]
        assert [(e["party"], e["error"]) for e in errors] == [("carol", "MissingPredecessor")]
        assert verify_transcript(text) == len(text.splitlines())

    def test_writer_rejects_late_records(self):
        writer = TranscriptWriter()
        writer.header(group="tiny")
        writer.close()
        with pytest.raises(TranscriptError):
            writer.record("tx", {})


class TestTampering:
    def test_edited_presig_breaks_chain(self, tmp_path):
        lines = _write_run(tmp_path).read_text(encoding="ascii").splitlines()
        index = next(i for i, line in enumerate(lines) if '"kind":"presig"' in line)
        record = json.loads(lines[index])
        presig = record["body"]["presig"]
        record["body"]["presig"] = presig[:-1] + ("0" if presig[-1] != "0" else "1")
        lines[index] = canonical(record)
        with pytest.raises(TranscriptError) as info:
            verify_transcript("\n".join(lines) + "\n")
        assert info.value.index == index
        assert not info.value.parse

    def test_rechained_bad_presig_fails_verification(self, tmp_path):
        records = read_transcript(_write_run(tmp_path).read_text(encoding="ascii"))
        group = group_from_id(records[0]["body"]["group"])
        target = next(i for i, r in enumerate(records) if r["kind"] == "presig")

        def bump(index, kind, body):
            if index != target:
                return body
            ps = PreSignature.from_bytes(group, bytes.fromhex(body["presig"]))
            bad = replace(ps, s_pre=ps.s_pre + group.scalar(1))
            return {**body, "presig": bad.to_bytes().hex()}

        text = _rebuild(records, bump)
        read_transcript(text)
        with pytest.raises(TranscriptError) as info:
            verify_transcript(text)
        assert info.value.index == target
        assert not info.value.parse

    def test_rechained_wrong_digest_fails_verification(self, tmp_path):
        records = read_transcript(_write_run(tmp_path).read_text(encoding="ascii"))
        target = next(i for i, r in enumerate(records) if r["kind"] == "tx")

        def swap_digest(index, kind, body):
            if index == target:
                return {**body, "acc_keys": body["acc_msgs"]}
            return body

        with pytest.raises(TranscriptError) as info:
            verify_transcript(_rebuild(records, swap_digest))
        assert info.value.index == target

    def test_unknown_group(self, tmp_path):
        records = read_transcript(_write_run(tmp_path).read_text(encoding="ascii"))

        def rename(index, kind, body):
            return {**body, "group": "bogus"} if kind == "header" else body

        with pytest.raises(TranscriptError) as info:
            verify_transcript(_rebuild(records, rename))
        assert info.value.index == 0

    @pytest.mark.parametrize("edit", [
        lambda params: {**params, "order_q": str(int(params["order_q"]) + 2)},
        lambda params: {**params, "generator_G": "00" * (len(params["generator_G"]) // 2)},
        lambda params: None,
    ])
    def test_group_parameters_mismatch(self, tmp_path, edit):
        records = read_transcript(_write_run(tmp_path).read_text(encoding="ascii"))

        def tamper(index, kind, body):
            return {**body, "group_params": edit(body["group_params"])} if kind == "header" else body

        with pytest.raises(TranscriptError) as info:
            verify_transcript(_rebuild(records, tamper))
        assert info.value.index == 0
        assert not info.value.parse


class TestTruncation:
    def test_missing_last_line(self, tmp_path):
        lines = _write_run(tmp_path).read_text(encoding="ascii").splitlines()
        with pytest.raises(TranscriptError) as info:
            verify_transcript("\n".join(lines[:-1]) + "\n")
        assert info.value.parse

    def test_cut_mid_line(self, tmp_path):
        text = _write_run(tmp_path).read_text(encoding="ascii").rstrip("\n")
        with pytest.raises(TranscriptError) as info:
            verify_transcript(text[:-5])
        assert info.value.parse

    def test_empty(self):
        with pytest.raises(TranscriptError) as info:
            verify_transcript("")
        assert info.value.parse

    def test_not_json(self):
        with pytest.raises(TranscriptError) as info:
            verify_transcript("hello\n")
        assert info.value.parse
        assert info.value.index == 0
