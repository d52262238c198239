"""Shared driver for the experiment scripts: build a config, run the solver
through the command line entry point, and echo the resulting table."""

import json
import sys
import tempfile
from pathlib import Path

from slabrank.cli import main as cli_main


def run_study(**config):
    """Write a config for the given study, solve it, and print table.csv."""
    output_dir = config.get("output_dir", "results")
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        path = fh.name
    code = cli_main(["solve", path])
    table = Path(output_dir) / "table.csv"
    if table.exists():
        print(table.read_text(), end="")
    print(f"artifacts written to {output_dir}/", file=sys.stderr)
    if code != 0:
        sys.exit(code)
