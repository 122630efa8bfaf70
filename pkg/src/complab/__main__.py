import sys

from complab.harness.cli import main

sys.exit(main())
