#!/usr/bin/env python
"""Command-line utility for the stream-function solver."""
import sys


def main():
    """Run a solver command."""
    try:
        from vvs_solver.cli import main as run
    except ImportError as exc:
        raise ImportError(
            "Couldn't import the solver dependencies. Are numpy, scipy, pandas and "
            "pydantic installed (pip install -r requirements.txt) and is a virtual "
            "environment active?"
        ) from exc
    sys.exit(run(sys.argv[1:]))


if __name__ == '__main__':
    main()
