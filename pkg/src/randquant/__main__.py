import sys

from randquant.cli import main

sys.exit(main())
