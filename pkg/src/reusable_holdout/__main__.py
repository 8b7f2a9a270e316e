import sys

from reusable_holdout.cli import main

sys.exit(main())
