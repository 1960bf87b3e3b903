import sys

from adsilence.cli import main

sys.exit(main())
