from __future__ import annotations

"""
Entry script for frozen builds and plain `python calderon_launcher.py ...` runs.

It avoids package-relative imports and delegates to app.main.
"""

import sys

from app.main import main


if __name__ == "__main__":
    sys.exit(main())
