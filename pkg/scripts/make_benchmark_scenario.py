"""Regenerate the bundled scenario file.

    python scripts/make_benchmark_scenario.py [output.json]
"""

import json
import sys
from pathlib import Path

from iciblotto.benchmark import build_document

OUT = Path(__file__).resolve().parents[1] / "src" / "iciblotto" / "data" / "benchmark_scenario.json"

if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else OUT
    out.write_text(json.dumps(build_document(), indent=1) + "\n")
    print(f"wrote {out}")
