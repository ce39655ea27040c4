import sys

from arrank.cli_io import main

sys.exit(main())
