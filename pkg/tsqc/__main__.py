"""Allow ``python -m tsqc``."""

import sys

from tsqc.cli import main

if __name__ == '__main__':
    sys.exit(main())
