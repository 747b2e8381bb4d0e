import sys

from mcps_forge.cli import main

sys.exit(main())
