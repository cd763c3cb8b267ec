"""Allow ``python -m dmaxopt ...`` as an alias for the console script."""

import sys

from .harness.cli import main

if __name__ == "__main__":
    sys.exit(main())
