"""Allow `python -m longmem` as an alias for the console script."""

import sys

from longmem.cli import main

if __name__ == "__main__":
    sys.exit(main())
