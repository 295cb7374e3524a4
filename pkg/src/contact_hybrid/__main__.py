"""Entry point for `python -m contact_hybrid`."""

import sys

from contact_hybrid.cli import main

if __name__ == "__main__":
    sys.exit(main())
