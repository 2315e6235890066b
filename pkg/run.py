#!/usr/bin/env python3
"""
Runner for the boundary_probe experiment pipeline.

    python run.py smoke
    python run.py all --config configs/lenet_digit1.json --out runs/lenet
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from boundary_probe.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
