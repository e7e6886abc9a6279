import sys

from tmkit.cli import main

sys.exit(main())
