import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stvrla.ballots import parse_election  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
DATA = Path(__file__).parent / "data"

TABLE1 = """\
candidates: A,B,C,D,E
seats: 3
250 : A
120 : B,A,C
400 : C,D
350 : E
110 : C,E,D
"""


@pytest.fixture
def table1():
    return parse_election(TABLE1, name="table1")
