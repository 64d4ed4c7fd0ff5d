"""Allow ``python -m bpkit``."""
import sys

from bpkit.main import main

sys.exit(main())
