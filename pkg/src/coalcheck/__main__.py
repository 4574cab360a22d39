import sys

from coalcheck.cli import main

sys.exit(main())
