import sys

from capteam.cli import main

sys.exit(main())
