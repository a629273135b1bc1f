#!/usr/bin/env python3
"""
ringswap - Multi-party atomic swap simulator
Entry point for the application.
"""

import sys


def main():
    """Main entry point - dispatches to the CLI subcommands."""
    from ringswap.cli import main as cli_main
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
