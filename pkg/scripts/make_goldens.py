"""Regenerate the golden files under tests/data from the bundled corpus.

Run only after checking the new output by hand:

    python scripts/make_goldens.py
"""

import json
from pathlib import Path

from stvrla.report import Settings, audit_election, canonical_json, run_batch
from stvrla.ballots import load_election

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "tests" / "data"


def main():
    DATA.mkdir(exist_ok=True)
    settings = Settings()
    _, _, report = audit_election(load_election(ROOT / "corpus" / "table1.txt"), settings)
    (DATA / "table1_audit.json").write_text(canonical_json(report), encoding="utf-8")
    expected = {}
    for r in run_batch(ROOT / "corpus", settings, jobs=4):
        row = r["row"]
        expected[r["instance"]] = {
            "seats": row["seats"],
            "winners_verified": row["winners_verified"],
            "kind": row["kind"],
        }
    (DATA / "corpus_expected.json").write_text(canonical_json(expected), encoding="utf-8")


if __name__ == "__main__":
    main()
