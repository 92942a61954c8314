from __future__ import annotations

import sys
from typing import NoReturn


def run_cli() -> NoReturn:
    """``qvit`` console script; exit code 1 if numpy, scipy or the CLI stack is missing."""
    try:
        from qvit.cli import qvit_group
    except ImportError as exc:
        sys.stderr.write(f"error: qvit cannot start ({exc}); install it with `uv sync` or `pip install qvit-lab`\n")
        sys.exit(1)
    qvit_group(prog_name="qvit")
    sys.exit(0)


if __name__ == "__main__":
    run_cli()
