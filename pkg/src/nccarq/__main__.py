import sys

from nccarq.cli import main

sys.exit(main())
