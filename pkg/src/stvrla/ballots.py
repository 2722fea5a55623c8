"""Ballot and election data model, file ingestion, and basic STV formulas."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, Decimal
from fractions import Fraction
from typing import Iterable, Optional, Sequence


class ElectionError(ValueError):
    """Raised for structurally invalid elections or ballot files."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def droop_quota(num_ballots: int, seats: int) -> int:
    if seats < 1:
        raise ValueError("seats must be positive")
    if num_ballots < 0:
        raise ValueError("num_ballots must be non-negative")
    return num_ballots // (seats + 1) + 1


def tau_max(seats: int) -> Fraction:
    """Largest transfer value any winner can have under the Droop quota."""
    if seats < 1:
        raise ValueError("seats must be positive")
    return Fraction(seats, seats + 1)


def projection(prefs: Sequence[int], keep: Iterable[int]) -> tuple:
    keep = keep if isinstance(keep, (set, frozenset)) else set(keep)
    return tuple(c for c in prefs if c in keep)


def first(prefs: Sequence[int]) -> Optional[int]:
    return prefs[0] if prefs else None


def truncate(value, precision: int) -> Decimal:
    """Truncate (round toward zero) to `precision` decimal places."""
    if not isinstance(value, Decimal):
        if isinstance(value, Fraction):
            value = Decimal(value.numerator) / Decimal(value.denominator)
        else:
            value = Decimal(value)
    return value.quantize(Decimal(1).scaleb(-precision), rounding=ROUND_DOWN)


def format_decimal(value) -> str:
    """Plain positional rendering without trailing zeros (``201.960`` -> ``201.96``)."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        d = value.denominator
        while d % 2 == 0:
            d //= 2
        while d % 5 == 0:
            d //= 5
        if d != 1:
            return f"{value.numerator}/{value.denominator}"
        value = Decimal(value.numerator) / Decimal(value.denominator)
    value = Decimal(value)
    return format(value.normalize(), "f")


@dataclass(frozen=True)
class Ballot:
    prefs: tuple
    count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "prefs", tuple(self.prefs))
        if not self.prefs:
            raise ElectionError("ballot ranks no candidates")
        if len(set(self.prefs)) != len(self.prefs):
            raise ElectionError("duplicate candidate within one ranking")
        if self.count < 1:
            raise ElectionError("ballot count must be positive")


@dataclass(frozen=True)
class Election:
    """An STV contest: candidate names, compressed ballot multiset, seats.

    Candidates are identified by their index into `candidates`. Ballots with
    identical rankings are merged so iteration is over ranking types.
    """

    candidates: tuple
    ballots: tuple
    seats: int
    name: str = ""
    _index: dict = field(default=None, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if len(set(self.candidates)) != len(self.candidates):
            raise ElectionError("candidate names must be unique")
        if self.seats < 1:
            raise ElectionError("seats must be positive")
        if self.seats >= len(self.candidates):
            raise ElectionError(
                f"need more candidates ({len(self.candidates)}) than seats ({self.seats})"
            )
        merged: dict = {}
        ncand = len(self.candidates)
        for b in self.ballots:
            if any(not 0 <= c < ncand for c in b.prefs):
                raise ElectionError(f"ballot references unknown candidate: {b.prefs}")
            merged[b.prefs] = merged.get(b.prefs, 0) + b.count
        if not merged:
            raise ElectionError("election has no ballots")
        object.__setattr__(
            self, "ballots", tuple(Ballot(p, n) for p, n in merged.items())
        )
        object.__setattr__(
            self, "_index", {name: i for i, name in enumerate(self.candidates)}
        )

    @property
    def total_ballots(self) -> int:
        return sum(b.count for b in self.ballots)

    @property
    def quota(self) -> int:
        return droop_quota(self.total_ballots, self.seats)

    @property
    def candidate_ids(self) -> range:
        return range(len(self.candidates))

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ElectionError(f"unknown candidate {name!r}") from None

    def name_of(self, c: int) -> str:
        return self.candidates[c]

    def names(self, cands: Iterable[int]) -> list:
        return [self.candidates[c] for c in cands]

    def with_ballots(self, ballots: Iterable[Ballot]) -> "Election":
        return Election(self.candidates, tuple(ballots), self.seats, self.name)


_HEADER = re.compile(r"^\s*(candidates|seats)\s*:\s*(.*)$", re.IGNORECASE)
_RANKING = re.compile(r"^\s*(\d+)\s*:\s*(.*)$")


def _split_names(text: str) -> list:
    if "," in text:
        parts = [p.strip() for p in text.split(",")]
    else:
        parts = text.split()
    return [p for p in parts if p]


def parse_election(content: str, seats: Optional[int] = None, name: str = "") -> Election:
    """Parse the canonical text format, or its JSON mirror.

    ``seats`` overrides the ``seats:`` header when given.
    """
    if content.lstrip().startswith("{"):
        return parse_election_json(content, seats, name)

    candidates = None
    file_seats = None
    counts: dict = {}
    for lineno, raw in enumerate(content.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _HEADER.match(line)
        if m:
            key, value = m.group(1).lower(), m.group(2)
            if key == "candidates":
                if candidates is not None:
                    raise ElectionError("candidates declared twice", lineno)
                candidates = _split_names(value)
                if len(set(candidates)) != len(candidates):
                    raise ElectionError("candidate names must be unique", lineno)
            else:
                try:
                    file_seats = int(value)
                except ValueError:
                    raise ElectionError(f"bad seats value {value!r}", lineno) from None
            continue
        m = _RANKING.match(line)
        if not m:
            raise ElectionError(f"malformed line {raw!r}", lineno)
        if candidates is None:
            raise ElectionError("ranking before candidates header", lineno)
        count = int(m.group(1))
        names = _split_names(m.group(2))
        if not names:
            raise ElectionError("empty ranking", lineno)
        if len(set(names)) != len(names):
            raise ElectionError("duplicate candidate within one ranking", lineno)
        if count < 1:
            raise ElectionError("ballot count must be positive", lineno)
        index = {c: i for i, c in enumerate(candidates)}
        try:
            prefs = tuple(index[n] for n in names)
        except KeyError as e:
            raise ElectionError(f"unknown candidate {e.args[0]!r}", lineno) from None
        counts[prefs] = counts.get(prefs, 0) + count

    if candidates is None:
        raise ElectionError("missing candidates header")
    seats = seats if seats is not None else file_seats
    if seats is None:
        raise ElectionError("number of seats not given")
    if not counts:
        raise ElectionError("ballot file contains no ballots")
    return Election(tuple(candidates), tuple(Ballot(p, n) for p, n in counts.items()), seats, name)


def parse_election_json(content: str, seats: Optional[int] = None, name: str = "") -> Election:
    try:
        data = json.loads(content)
    except json.JSONDecodeError as e:
        raise ElectionError(f"invalid JSON: {e.msg}", e.lineno) from None
    try:
        candidates = list(data["candidates"])
        seats = seats if seats is not None else int(data["seats"])
        index = {c: i for i, c in enumerate(candidates)}
        ballots = []
        for entry in data["ballots"]:
            names = list(entry["prefs"])
            if len(set(names)) != len(names):
                raise ElectionError("duplicate candidate within one ranking")
            ballots.append(Ballot(tuple(index[n] for n in names), int(entry["count"])))
    except KeyError as e:
        raise ElectionError(f"missing or unknown key {e.args[0]!r}") from None
    return Election(tuple(candidates), tuple(ballots), seats, name)


def serialize_election(election: Election) -> str:
    lines = [
        "candidates: " + ",".join(election.candidates),
        f"seats: {election.seats}",
    ]
    for b in election.ballots:
        lines.append(f"{b.count} : " + ",".join(election.names(b.prefs)))
    return "\n".join(lines) + "\n"


def election_to_json(election: Election) -> str:
    return json.dumps(
        {
            "candidates": list(election.candidates),
            "seats": election.seats,
            "ballots": [
                {"count": b.count, "prefs": election.names(b.prefs)} for b in election.ballots
            ],
        },
        indent=1,
    )


def parse_blt(content: str, name: str = "") -> Election:
    """Read the BLT format commonly used to distribute STV ballot data.

    Layout: ``<ncand> <seats>``, optional withdrawn line of negative ids,
    ``<weight> <c1> <c2> ... 0`` ballot lines terminated by a ``0`` line,
    then quoted candidate names and a quoted title.
    """
    tokens = re.findall(r'"[^"]*"|\S+', content)
    if len(tokens) < 2:
        raise ElectionError("BLT file too short")
    pos = 0
    ncand, seats = int(tokens[0]), int(tokens[1])
    pos = 2
    withdrawn = set()
    while pos < len(tokens) and tokens[pos].startswith("-"):
        withdrawn.add(-int(tokens[pos]) - 1)
        pos += 1
    counts: dict = {}
    while True:
        if pos >= len(tokens):
            raise ElectionError("unterminated BLT ballot section")
        weight = int(tokens[pos])
        pos += 1
        if weight == 0:
            break
        prefs = []
        while tokens[pos] != "0":
            tok = tokens[pos]
            pos += 1
            if tok == "-":
                continue
            c = int(tok.split("=")[0]) - 1
            if c not in withdrawn and c not in prefs:
                prefs.append(c)
        pos += 1
        if prefs:
            key = tuple(prefs)
            counts[key] = counts.get(key, 0) + weight
    names = [t.strip('"') for t in tokens[pos : pos + ncand]]
    if len(names) < ncand:
        names += [f"C{i + 1}" for i in range(len(names), ncand)]
    if pos + ncand < len(tokens) and not name:
        name = tokens[pos + ncand].strip('"')
    keep = [c for c in range(ncand) if c not in withdrawn]
    remap = {c: i for i, c in enumerate(keep)}
    ballots = [Ballot(tuple(remap[c] for c in p), n) for p, n in counts.items()]
    return Election(tuple(names[c] for c in keep), tuple(ballots), seats, name)


def load_election(path, seats: Optional[int] = None) -> Election:
    """Load an election file, choosing the reader by extension."""
    from pathlib import Path

    path = Path(path)
    content = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".blt":
        election = parse_blt(content, name=path.stem)
        if seats is not None and seats != election.seats:
            election = Election(election.candidates, election.ballots, seats, election.name)
        return election
    return parse_election(content, seats, name=path.stem)
