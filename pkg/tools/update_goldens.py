"""Regenerate tests/golden/ from the bundled fixture pipeline.

Run after an intentional change to feature definitions, the ANOVA or the
importance report, then review the diff before committing.
"""

import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from helpers import GOLDEN_ARTIFACTS, run_fixture_pipeline  # noqa: E402


def main():
    golden = ROOT / "tests" / "golden"
    with tempfile.TemporaryDirectory() as tmp:
        codes = run_fixture_pipeline(Path(tmp) / "run")
        if any(codes):
            sys.exit(f"pipeline failed with exit codes {codes}")
        for rel in GOLDEN_ARTIFACTS:
            dst = golden / rel
            dst.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(Path(tmp) / "run" / rel, dst)
            print("updated", dst.relative_to(ROOT))


if __name__ == "__main__":
    main()
