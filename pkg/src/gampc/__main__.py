import sys

from .sim_harness.cli import main

sys.exit(main())
