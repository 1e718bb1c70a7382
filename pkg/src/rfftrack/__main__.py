import sys

from rfftrack.cli import main

sys.exit(main())
