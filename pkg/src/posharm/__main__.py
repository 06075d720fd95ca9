import sys

from posharm.cli import main

sys.exit(main())
