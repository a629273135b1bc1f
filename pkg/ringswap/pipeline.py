"""
Pipeline functions behind the CLI subcommands.

Each function prints its own progress and returns one of the EXIT_* codes.
"""

import random
from pathlib import Path
from typing import List, Optional, Tuple

from . import __version__
from .adversary import Verdict
from .config import RunConfig, load_accumulator_profile, load_group_profile
from .crypto.accumulator import AccumulatorManager
from .crypto.ecdsa_adaptor import (
    EcdsaKeyPair,
    adapt_ecdsa,
    ecdsa_verify,
    ext,
    format_corpus_line,
    gen_statement_witness,
    p_sign,
    p_vrfy,
)
from .crypto.schnorr import (
    AdaptorSecret,
    ChallengeMode,
    KeyPair,
    NoncePair,
    PreSignature,
    complete,
    compute_challenge,
    extract_secret,
    pre_sign,
    pre_verify,
    verify_full,
)
from .errors import ConfigError, DecodeError, IsMember, NotMember, ProtocolError, TranscriptError
from .scenario import build_world, run_scenario
from .transcript import TranscriptWriter, verify_transcript_file
from .utils import find_configs, resolve_output, short_hex

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_VERIFY = 4


# ============================================================
# RUN
# ============================================================

def run_config(config: RunConfig, transcript_path: Optional[Path] = None) -> int:
    """Run one scenario config, write its transcript and judge the verdict."""
    try:
        group = config.group_profile().group()
        accumulator = config.accumulator_profile().accumulator()
        behaviors = config.parsed_behaviors()
    except ConfigError as exc:
        print(f"   ✗ Config error: {exc}")
        return EXIT_CONFIG

    writer = TranscriptWriter()
    writer.header(
        version=__version__,
        config_hash=config.config_hash(),
        group=group.id,
        group_params=group.describe().to_dict(),
        rsa=accumulator.params.to_dict(),
        seed=config.seed,
        parties=config.parties,
        behaviors={name: str(b) for name, b in sorted(behaviors.items())},
    )
    try:
        world = build_world(
            config.parties, group, accumulator, config.seed,
            config.amount, config.expiry, config.challenge_mode(), writer,
        )
        outcome = run_scenario(world, behaviors, config.seed)
    except (ValueError, ProtocolError) as exc:
        print(f"   ✗ Config error: {exc}")
        return EXIT_CONFIG
    writer.close()

    print(f"   Group: {group.id}   Modulus: {accumulator.params.N.bit_length()} bits")
    for chain_id, count in outcome.accepted.items():
        print(f"   {chain_id:<16} accepted txs: {count}")
    for line in outcome.rejections:
        print(f"   ⚠ {line}")

    if transcript_path is not None:
        writer.write(transcript_path)
        print(f"   ✓ Transcript: {transcript_path}")

    expected = config.expected()
    verdict = outcome.verdict
    if verdict is Verdict.VIOLATION:
        print(f"   ✗ Verdict: {verdict.value}")
        return EXIT_VERDICT
    if expected is not None and verdict is not expected:
        print(f"   ✗ Verdict: {verdict.value} (expected {expected.value})")
        return EXIT_VERDICT
    print(f"   ✓ Verdict: {verdict.value}")
    return EXIT_OK


def _transcript_target(config: RunConfig, config_file: Path, output_dir: Optional[Path]) -> Optional[Path]:
    if output_dir is not None:
        return output_dir / f"{config_file.stem}.jsonl"
    if config.transcript:
        return resolve_output(config.transcript, config_file.parent)
    return None


def run_single_config(config_file: Path, output_dir: Optional[Path] = None) -> int:
    print(f"\n📄 {config_file.name}")
    try:
        config = RunConfig.load(config_file)
    except ConfigError as exc:
        print(f"   ✗ Config error: {exc}")
        return EXIT_CONFIG
    return run_config(config, _transcript_target(config, config_file, output_dir))


def run_config_dir(input_dir: Path, output_dir: Optional[Path] = None) -> Tuple[int, int, int]:
    """Run every config in a directory; returns (success, failed, worst exit code)."""
    success, failed, worst = 0, 0, EXIT_OK
    for config_file in find_configs(input_dir):
        code = run_single_config(config_file, output_dir)
        if code == EXIT_OK:
            success += 1
        else:
            failed += 1
            worst = max(worst, code)
    return success, failed, worst


# ============================================================
# VERIFY
# ============================================================

def verify_single_transcript(path: Path) -> int:
    print(f"\n📄 {path.name}")
    try:
        count = verify_transcript_file(path)
    except OSError as exc:
        print(f"   ✗ Cannot read: {exc}")
        return EXIT_PARSE
    except TranscriptError as exc:
        print(f"   ✗ {exc}")
        return EXIT_PARSE if exc.parse else EXIT_VERIFY
    print(f"   ✓ {count} records verified")
    return EXIT_OK


# ============================================================
# ACCUMULATOR DEMO
# ============================================================

def _parse_ops(text: str) -> List[Tuple[int, str, List[str]]]:
    ops = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        op, *args = line.split()
        op = op.lower()
        if op not in ("insert", "batch", "remove", "multiswap", "prove", "nonmember"):
            raise DecodeError(f"line {number}: unknown operation {op!r}")
        if op in ("insert", "prove", "nonmember") and len(args) != 1:
            raise DecodeError(f"line {number}: {op} takes exactly one element")
        if op == "multiswap" and any(arg.count(":") != 1 for arg in args):
            raise DecodeError(f"line {number}: multiswap pairs are written old:new")
        ops.append((number, op, args))
    return ops


def acc_demo(script: Path, profile: str = "toy") -> int:
    """Replay an ops script against a fresh accumulator, printing the digest trace."""
    try:
        accumulator = load_accumulator_profile(profile).accumulator()
        ops = _parse_ops(script.read_text(encoding="utf-8"))
    except ConfigError as exc:
        print(f"✗ Config error: {exc}")
        return EXIT_CONFIG
    except (OSError, DecodeError) as exc:
        print(f"✗ {exc}")
        return EXIT_PARSE

    manager = AccumulatorManager(accumulator, "demo")
    print(f"N = {accumulator.params.N:#x}")
    print(f"g = {accumulator.params.g:#x}")
    print("-" * 50)
    refused, mismatched = 0, 0
    for number, op, args in ops:
        before = manager.digest
        ok = True
        try:
            if op == "insert":
                manager.insert(args[0])
            elif op == "batch":
                after, proof = manager.batch_insert(args)
                ok = accumulator.batch_insert_verify(before, after, args, proof)
                print(f"   PoE Q={proof.Q:#x} ℓ={proof.ell:#x}")
            elif op == "remove":
                after, proof = manager.batch_remove(args)
                ok = accumulator.batch_remove_verify(before, after, args, proof)
                print(f"   PoE Q={proof.Q:#x} ℓ={proof.ell:#x}")
            elif op == "multiswap":
                pairs = [tuple(arg.split(":")) for arg in args]
                after, proof = manager.multiswap(pairs)
                ok = accumulator.verify_multiswap(before, after, pairs, proof)
                if proof.removal is not None:
                    print(f"   remove PoE Q={proof.removal.Q:#x} ℓ={proof.removal.ell:#x}")
                    print(f"   insert PoE Q={proof.insertion.Q:#x} ℓ={proof.insertion.ell:#x}")
            elif op == "prove":
                w = manager.witness(args[0])
                ok = accumulator.verify_membership(manager.digest, args[0], w)
                print(f"   π = {w.pi:#x}")
            elif op == "nonmember":
                w = manager.nonmember_witness(args[0])
                ok = accumulator.verify_nonmembership(manager.digest, args[0], w)
                print(f"   a = {w.a}  B = {w.B:#x}")
        except (NotMember, IsMember) as exc:
            print(f"✗ line {number}: {op} refused: {exc}")
            refused += 1
            continue
        oracle = accumulator.digest(manager.multiset) == manager.digest
        mark = "✓" if ok and oracle else "✗"
        if not (ok and oracle):
            mismatched += 1
        print(f"{mark} line {number}: {op:<9} digest {manager.digest.value:#x}")

    if not ops:
        print(f"✓ empty script: digest is g = {manager.digest.value:#x}")
    if mismatched:
        return EXIT_VERIFY
    return EXIT_VERDICT if refused else EXIT_OK


# ============================================================
# KEYS AND ADAPTOR DEMO
# ============================================================

def keygen(group_profile: str, seed: str) -> int:
    try:
        group = load_group_profile(group_profile).group()
    except ConfigError as exc:
        print(f"✗ Config error: {exc}")
        return EXIT_CONFIG
    kp = KeyPair.generate(group, seed)
    print(f"group: {group.id}")
    print(f"sk:    {kp.sk.to_bytes().hex()}")
    print(f"pk:    {kp.pk.to_bytes().hex()}")
    return EXIT_OK


def adaptor_demo(group_profile: str, seed: str, trials: int = 1, corpus: Optional[Path] = None) -> int:
    """Exercise both adaptor schemes end to end ``trials`` times."""
    try:
        group = load_group_profile(group_profile).group()
    except ConfigError as exc:
        print(f"✗ Config error: {exc}")
        return EXIT_CONFIG
    rng = random.Random(f"ringswap/adaptor-demo/{seed}")
    failures = 0
    lines = []
    for i in range(trials):
        tag = f"{seed}/{i}/{rng.getrandbits(64)}"
        message = f"demo message {i}".encode("utf-8")

        kp = KeyPair.generate(group, tag)
        nonce = NoncePair.generate(group, tag)
        secret = AdaptorSecret.generate(group, tag)
        c = compute_challenge(nonce.R, secret.T, kp.pk, None, None, message, ChallengeMode.PAIR)
        ps = PreSignature("demo", c, pre_sign(kp, nonce, c), nonce.R, secret.T)
        full = complete(ps, secret.t)
        schnorr_ok = (
            pre_verify(ps, kp.pk)
            and verify_full(full, kp.pk)
            and extract_secret(full.s, ps.s_pre) == secret.t
        )

        ekp = EcdsaKeyPair.generate(group, tag)
        sw = gen_statement_witness(group, tag)
        presig = p_sign(ekp, message, sw.statement, tag)
        sig = adapt_ecdsa(presig, sw.y)
        recovered = ext(sig, presig, sw.statement)
        ecdsa_ok = (
            p_vrfy(ekp.Q, message, sw.statement, presig)
            and ecdsa_verify(ekp.Q, message, sig)
            and recovered is not None
        )
        if corpus is not None:
            lines.append(format_corpus_line(sig, presig, sw.statement))
        if not (schnorr_ok and ecdsa_ok):
            failures += 1
            print(f"✗ trial {i}: schnorr={schnorr_ok} ecdsa={ecdsa_ok}")
        elif trials == 1:
            print(f"✓ schnorr adaptor: s' = {short_hex(ps.s_pre.to_bytes())} t = {short_hex(secret.t.to_bytes())}")
            print(f"✓ ecdsa adaptor:   ŝ = {short_hex(presig.s_hat.to_bytes())} y = {short_hex(recovered.to_bytes())}")

    if corpus is not None:
        corpus.parent.mkdir(parents=True, exist_ok=True)
        corpus.write_text("".join(line + "\n" for line in lines), encoding="ascii")
        print(f"✓ Corpus: {corpus}")
    print(f"{trials - failures}/{trials} trials passed on {group.id}")
    return EXIT_VERIFY if failures else EXIT_OK
