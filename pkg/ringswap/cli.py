"""
Command-line interface for ringswap.
"""

import argparse
import logging
import os
from pathlib import Path
from typing import List, Optional

from .pipeline import (
    EXIT_CONFIG,
    EXIT_OK,
    acc_demo,
    adaptor_demo,
    keygen,
    run_config_dir,
    run_single_config,
    verify_single_transcript,
)

# Default group profile when --group is not given
DEFAULT_GROUP = os.environ.get("RINGSWAP_GROUP", "production")


def print_header():
    """Print program header."""
    print()
    print("╔" + "═" * 58 + "╗")
    print("║" + " ringswap - Multi-Party Atomic Swaps ".center(58) + "║")
    print("║" + " adaptor signatures · RSA accumulators ".center(58) + "║")
    print("╚" + "═" * 58 + "╝")
    print()


def cmd_run(args) -> int:
    target = Path(args.config).resolve()
    output_dir = Path(args.output).resolve() if args.output else None
    if output_dir is not None:
        output_dir.mkdir(parents=True, exist_ok=True)

    if target.is_dir():
        print(f"Running configs in: {target}")
        print("-" * 50)
        success, failed, worst = run_config_dir(target, output_dir)
        print()
        print("-" * 50)
        if failed:
            print(f"\n✗ {success} passed, {failed} failed")
        else:
            print(f"\n✓ {success} passed")
        return worst

    if not target.exists():
        print(f"✗ Error: File not found: {target}")
        return EXIT_CONFIG

    print("-" * 50)
    code = run_single_config(target, output_dir)
    print()
    print("-" * 50)
    print("\n✓ Run completed" if code == EXIT_OK else f"\n✗ Run failed (exit {code})")
    return code


def cmd_verify(args) -> int:
    print("-" * 50)
    worst = EXIT_OK
    for name in args.transcripts:
        worst = max(worst, verify_single_transcript(Path(name).resolve()))
    print()
    print("-" * 50)
    print("\n✓ All transcripts verified" if worst == EXIT_OK else f"\n✗ Verification failed (exit {worst})")
    return worst


def cmd_acc_demo(args) -> int:
    return acc_demo(Path(args.script).resolve(), args.profile)


def cmd_keygen(args) -> int:
    return keygen(args.group, args.seed)


def cmd_adaptor_demo(args) -> int:
    corpus = Path(args.corpus).resolve() if args.corpus else None
    return adaptor_demo(args.group, args.seed, args.trials, corpus)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringswap",
        description="ringswap - multi-party atomic swaps with universal adaptor signatures",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Log protocol steps to stderr")
    parser.add_argument("--quiet", "-q", action="store_true", help="Skip the banner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a scenario config (or every config in a directory)")
    run.add_argument("config", help="YAML run config or directory of configs")
    run.add_argument("--output", "-o", help="Write transcripts here instead of the config's path")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="Re-verify transcripts offline")
    verify.add_argument("transcripts", nargs="+", help="Transcript files")
    verify.set_defaults(func=cmd_verify)

    demo = sub.add_parser("acc-demo", help="Replay an accumulator ops script")
    demo.add_argument("script", help="Ops script: insert/batch/remove/multiswap/prove/nonmember lines")
    demo.add_argument("--profile", "-p", default="toy", help="Accumulator profile (default: toy)")
    demo.set_defaults(func=cmd_acc_demo)

    keys = sub.add_parser("keygen", help="Print a deterministic key pair")
    keys.add_argument("--group", "-g", default=DEFAULT_GROUP, help="Group profile")
    keys.add_argument("--seed", "-s", required=True, help="Key seed")
    keys.set_defaults(func=cmd_keygen)

    adaptor = sub.add_parser("adaptor-demo", help="Exercise the Schnorr and ECDSA adaptor schemes")
    adaptor.add_argument("--group", "-g", default=DEFAULT_GROUP, help="Group profile")
    adaptor.add_argument("--seed", "-s", default="demo", help="Seed")
    adaptor.add_argument("--trials", "-n", type=int, default=1, help="Number of trials")
    adaptor.add_argument("--corpus", help="Write ECDSA fuzz-corpus lines to this file")
    adaptor.set_defaults(func=cmd_adaptor_demo)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(levelname)s %(name)s: %(message)s")
    if not args.quiet:
        print_header()

    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
