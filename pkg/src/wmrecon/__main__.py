import sys

from wmrecon.cli import main

sys.exit(main())
