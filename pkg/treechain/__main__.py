"""Allow running as python -m treechain"""

import sys

from .cli import main

sys.exit(main())
