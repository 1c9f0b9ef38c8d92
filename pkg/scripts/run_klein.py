#!/usr/bin/env python3
"""Run the klein experiment preset (seeds 42-46) and emit its report."""
import sys

from chartbundle.cli import main

if __name__ == "__main__":
    sys.exit(main(["run", "--preset", "klein", *sys.argv[1:]]))
