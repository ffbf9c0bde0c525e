import sys

from cotforge.cli import main

sys.exit(main())
