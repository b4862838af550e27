#!/usr/bin/env python3
"""
Main entry point for gradflow-lab.

Runs the command line from a source checkout without installing the package.
"""

import asyncio
import sys
from pathlib import Path

# Add src to Python path
src_path = Path(__file__).parent / "src"
sys.path.insert(0, str(src_path))

from gradflow_lab.core.application import Application  # noqa: E402


if __name__ == "__main__":
    try:
        sys.exit(asyncio.run(Application().run()))
    except KeyboardInterrupt:
        print("\nInterrupted by user")
        sys.exit(1)
