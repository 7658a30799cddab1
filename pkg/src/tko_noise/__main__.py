"""Entry point for running as a module: python -m tko_noise"""

import sys

from tko_noise.cli import main

if __name__ == "__main__":
    sys.exit(main())
