#!/usr/bin/env python3
"""
Recurrent Priming Codec - Command Line Launcher

Loads .env, puts the project root on the path and runs one subcommand.

Usage:
    python rpc.py make-corpus data/toy                 # Synthetic training images
    python rpc.py train --preset desk --dataset data/toy
    python rpc.py compress in.png out.rpc --checkpoint checkpoints/step_0002000.rpck --iterations 4
    python rpc.py decompress out.rpc back.png --checkpoint checkpoints/step_0002000.rpck
    python rpc.py eval --dataset data/toy --checkpoint ... --out results/rd.csv
    python rpc.py bd results/a_nominal_msssim.csv results/b_nominal_msssim.csv
    python rpc.py analyze --support 1,3,3
"""

import sys
from pathlib import Path

from dotenv import load_dotenv


# Colors for terminal output
class Colors:
    GREEN = '\033[92m'
    RED = '\033[91m'
    CYAN = '\033[96m'
    BOLD = '\033[1m'
    END = '\033[0m'


def print_banner():
    """Print startup banner (interactive terminals only)"""
    if sys.stderr.isatty():
        print(f"{Colors.GREEN}{Colors.BOLD}Recurrent Priming Codec{Colors.END} "
              f"{Colors.CYAN}progressive recurrent image compression{Colors.END}",
              file=sys.stderr)


def main():
    root = Path(__file__).parent
    sys.path.insert(0, str(root))
    load_dotenv(root / '.env')

    from src.cli import main as cli_main

    print_banner()
    code = cli_main(sys.argv[1:])
    if code != 0 and sys.stderr.isatty():
        print(f"{Colors.RED}exit code {code}{Colors.END}", file=sys.stderr)
    return code


if __name__ == '__main__':
    sys.exit(main())
