import sys

from predit.cli import main

sys.exit(main())
