"""Puts the project root on sys.path so tests import ``src`` and ``config`` like rpc.py does."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
