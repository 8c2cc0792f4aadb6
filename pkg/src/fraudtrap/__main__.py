import sys

from fraudtrap.cli import main

sys.exit(main())
