import sys

from seqgrad.cli import main

sys.exit(main())
