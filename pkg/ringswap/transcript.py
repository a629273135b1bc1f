"""
Self-verifying run transcripts.

One canonical JSON object per line:

    {"body": {...}, "chain": "<hex>", "kind": "<kind>", "seq": <n>}

``chain`` is SHA-256 over the previous record's chain value and the canonical
encoding of ``{"body", "kind", "seq"}``; the first record chains from 64 zeros. The
first record is the ``header`` and the last is ``end`` with the record count, so a
file cut at a line boundary is detected as truncated.

Verification rebuilds every accumulator digest from the recorded keys, messages and
pre-signatures and re-checks every pre-signature and every accepted transaction.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .chain import ChainTx, SessionView, binding_ok
from .crypto.accumulator import Digest, RsaAccumulator, RsaParams
from .crypto.group import decode_element, group_from_id
from .crypto.schnorr import ChallengeMode, PreSignature, compute_challenge, pre_verify
from .errors import DecodeError, TranscriptError
from .session import SwapMessage

logger = logging.getLogger(__name__)

FORMAT = "ringswap-transcript/1"
GENESIS = "0" * 64


def canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def _chain(prev: str, core: Dict[str, Any]) -> str:
    return hashlib.sha256((prev + canonical(core)).encode("ascii")).hexdigest()


class TranscriptWriter:
    def __init__(self):
        self._lines: List[str] = []
        self._prev = GENESIS
        self._closed = False

    def record(self, kind: str, body: Dict[str, Any]) -> None:
        if self._closed:
            raise TranscriptError("transcript already closed")
        core = {"seq": len(self._lines), "kind": kind, "body": body}
        self._prev = _chain(self._prev, core)
        self._lines.append(canonical({**core, "chain": self._prev}))

    def header(self, **fields) -> None:
        if self._lines:
            raise TranscriptError("header must be the first record")
        self.record("header", {"format": FORMAT, **fields})

    def close(self) -> None:
        self.record("end", {"records": len(self._lines) + 1})
        self._closed = True

    def lines(self) -> List[str]:
        return list(self._lines)

    def text(self) -> str:
        return "".join(line + "\n" for line in self._lines)

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.text(), encoding="ascii")
        return path


# ============================================================
# READING
# ============================================================

def read_transcript(text: str) -> List[Dict[str, Any]]:
    """Parse and integrity-check a transcript; no cryptographic checks."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TranscriptError("empty transcript", parse=True)
    records: List[Dict[str, Any]] = []
    prev = GENESIS
    for index, line in enumerate(lines):
        try:
            record = json.loads(line)
        except ValueError as exc:
            raise TranscriptError(f"not JSON: {exc}", index, parse=True)
        if not isinstance(record, dict) or set(record) != {"seq", "kind", "body", "chain"}:
            raise TranscriptError("record fields are wrong", index, parse=True)
        if canonical(record) != line:
            raise TranscriptError("record is not in canonical form", index)
        if record["seq"] != index:
            raise TranscriptError("sequence number out of order", index)
        core = {k: record[k] for k in ("seq", "kind", "body")}
        prev = _chain(prev, core)
        if record["chain"] != prev:
            raise TranscriptError("hash chain broken", index)
        records.append(record)
    if records[0]["kind"] != "header" or records[0]["body"].get("format") != FORMAT:
        raise TranscriptError("missing header", 0, parse=True)
    last = records[-1]
    if last["kind"] != "end":
        raise TranscriptError("transcript is truncated", len(records), parse=True)
    if last["body"].get("records") != len(records):
        raise TranscriptError("record count does not match", len(records) - 1)
    return records


# ============================================================
# VERIFYING
# ============================================================

class _Replay:
    """Verifier state rebuilt record by record."""

    def __init__(self, header: Dict[str, Any]):
        self.group = group_from_id(str(header.get("group", "")))
        if self.group is None:
            raise TranscriptError(f"unknown group {header.get('group')!r}", 0)
        if header.get("group_params") != self.group.describe().to_dict():
            raise TranscriptError("group parameters do not match the named group", 0)
        try:
            self.accumulator = RsaAccumulator(RsaParams(**header["rsa"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise TranscriptError(f"bad accumulator parameters: {exc}", 0)
        self.mode = ChallengeMode.RING
        self.parties: Dict[str, Any] = {}
        self.messages: Dict[str, SwapMessage] = {}
        self.acc_keys: Optional[Digest] = None
        self.acc_msgs: Optional[Digest] = None
        self.presig_acc = self.accumulator.digest([])
        self.T = None
        self.accepted = 0

    def view(self) -> SessionView:
        return SessionView(self.accumulator, self.acc_keys, self.acc_msgs, self.presig_acc, self.T, self.mode)

    def terms(self, body: Dict[str, Any]) -> None:
        self.mode = ChallengeMode(body["mode"])
        for entry in body["parties"]:
            self.parties[entry["id"]] = decode_element(self.group, bytes.fromhex(entry["pk"]))
        for pid, data in zip(body["parties"], body["messages"]):
            self.messages[pid["id"]] = SwapMessage.from_dict(self.group, data)
        self.acc_keys = self.accumulator.digest(pk.to_bytes() for pk in self.parties.values())
        self.acc_msgs = self.accumulator.digest(m.to_bytes() for m in self.messages.values())
        if self.acc_keys.hex() != body["acc_keys"] or self.acc_msgs.hex() != body["acc_msgs"]:
            raise ValueError("accumulator digests do not recompute")

    def adaptor(self, body: Dict[str, Any]) -> None:
        self.T = decode_element(self.group, bytes.fromhex(body["T"]))

    def presig(self, body: Dict[str, Any]) -> None:
        ps = PreSignature.from_bytes(self.group, bytes.fromhex(body["presig"]))
        pk = self.parties.get(ps.party_id)
        if pk is None:
            raise ValueError(f"pre-signature from unknown party {ps.party_id}")
        if ps.T != self.T:
            raise ValueError("pre-signature uses another adaptor point")
        m = self.messages[ps.party_id].to_bytes()
        if compute_challenge(ps.R, ps.T, pk, self.acc_keys, self.acc_msgs, m, self.mode) != ps.c:
            raise ValueError("challenge does not recompute")
        if not pre_verify(ps, pk):
            raise ValueError("pre-signature does not verify")
        self.presig_acc = self.accumulator.insert(self.presig_acc, ps.to_bytes())
        if self.presig_acc.hex() != body["presig_acc"]:
            raise ValueError("pre-signature digest does not recompute")

    def tx(self, body: Dict[str, Any]) -> None:
        tx = ChainTx.from_dict(self.group, body["tx"])
        for name in ("acc_keys", "acc_msgs", "presig_acc"):
            if getattr(self, name).hex() != body[name]:
                raise ValueError(f"{name} differs from the recomputed digest")
        reason = binding_ok(tx, self.view())
        if body["result"] == "accepted":
            if reason is not None:
                raise ValueError(f"accepted transaction fails: {reason.value}")
            self.accepted += 1


def verify_transcript(text: str) -> int:
    """Re-verify a transcript; returns the number of records checked."""
    records = read_transcript(text)
    replay = _Replay(records[0]["body"])
    handlers = {
        "terms": replay.terms,
        "adaptor": replay.adaptor,
        "presig": replay.presig,
        "tx": replay.tx,
    }
    for index, record in enumerate(records[1:-1], start=1):
        handler = handlers.get(record["kind"])
        if handler is None:
            continue
        try:
            handler(record["body"])
        except (DecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
            raise TranscriptError(str(exc) or type(exc).__name__, index)
    logger.debug("transcript verified: %d records, %d accepted transactions", len(records), replay.accepted)
    return len(records)


def verify_transcript_file(path: Union[str, Path]) -> int:
    try:
        text = Path(path).read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise TranscriptError(f"not ASCII: {exc}", parse=True)
    return verify_transcript(text)
