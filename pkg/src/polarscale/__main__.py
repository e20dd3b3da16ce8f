import sys

from polarscale.cli import main

sys.exit(main())
