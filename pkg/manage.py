#!/usr/bin/env python
"""StochSR command-line utility for data, training, inference and evaluation."""

import os
import sys


def main():
    """Run a StochSR command."""
    os.environ.setdefault("STOCHSR_ENVIRONMENT", "dev")
    try:
        from core.cli import main as run
    except ImportError as exc:
        raise ImportError(
            "Couldn't import the StochSR packages. Are numpy, scipy and python-dotenv "
            "installed and available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
