"""Weighted Inclusive Gregory STV tabulation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional

from .ballots import Election, format_decimal, projection, tau_max, truncate

ELECTED = "Elected"
ELIMINATED = "Eliminated"

DEFAULT_PRECISION = 5


@dataclass(frozen=True)
class RoundEvent:
    kind: str
    candidate: int
    round_number: int
    tallies_before: dict
    transfer_value: Optional[Decimal] = None

    def to_dict(self, election: Election) -> dict:
        return {
            "round": self.round_number,
            "kind": self.kind,
            "candidate": election.name_of(self.candidate),
            "transfer_value": None if self.transfer_value is None else format_decimal(self.transfer_value),
            "tallies": {election.name_of(c): format_decimal(t) for c, t in sorted(self.tallies_before.items())},
        }


@dataclass(frozen=True)
class TabulationOutcome:
    winners: tuple
    losers: frozenset
    first_round_winners: frozenset
    reported_transfer_values: dict
    rounds: tuple
    first_preference_tallies: dict
    tie_occurred: bool = False
    final_fill: tuple = ()
    precision: int = DEFAULT_PRECISION

    @property
    def num_rounds(self) -> int:
        return max((e.round_number for e in self.rounds), default=0)

    def round_log(self, election: Election) -> str:
        return "\n".join(json.dumps(e.to_dict(election), sort_keys=True) for e in self.rounds)


def check_first_winner_criterion(outcome: TabulationOutcome) -> bool:
    return bool(outcome.first_round_winners)


def first_preference_tallies(election: Election) -> dict:
    tallies = {c: 0 for c in election.candidate_ids}
    for b in election.ballots:
        tallies[b.prefs[0]] += b.count
    return tallies


def tabulate(election: Election, precision: int = DEFAULT_PRECISION) -> TabulationOutcome:
    """Count an election, one election or elimination per round.

    Candidates already holding a quota at the start of a round cannot receive
    transferred ballots. Transfer values and ballot weights are truncated to
    ``precision`` decimal places. Ties are broken toward the lowest index and
    reported through ``tie_occurred``.
    """
    seats = election.seats
    quota = Decimal(election.quota)
    one = Decimal(1)

    prefs = [b.prefs for b in election.ballots]
    counts = [b.count for b in election.ballots]
    weights = [one] * len(prefs)
    holder: list = [p[0] for p in prefs]

    standing = set(election.candidate_ids)
    elected: list = []
    eliminated: set = set()
    events: list = []
    tie = False
    final_fill: tuple = ()
    first_tallies = first_preference_tallies(election)
    first_round = frozenset(c for c, t in first_tallies.items() if t >= election.quota)
    reported_tv: dict = {}

    def tallies() -> dict:
        t = {c: Decimal(0) for c in standing}
        for i, h in enumerate(holder):
            if h is not None and h in t:
                t[h] += counts[i] * weights[i]
        return t

    def distribute(source: int, eligible: set, factor: Optional[Decimal]):
        for i, h in enumerate(holder):
            if h != source:
                continue
            if factor is not None:
                weights[i] = truncate(weights[i] * factor, precision)
            nxt = projection(prefs[i], eligible)
            holder[i] = nxt[0] if nxt else None

    rnd = 0
    while len(elected) < seats:
        rnd += 1
        t = tallies()
        unfilled = seats - len(elected)
        if len(standing) <= unfilled:
            order = sorted(standing, key=lambda c: (-t[c], c))
            if len({t[c] for c in order}) < len(order):
                tie = True
            for c in order:
                events.append(RoundEvent(ELECTED, c, rnd, dict(t)))
                elected.append(c)
            final_fill = tuple(order)
            standing.clear()
            break

        holders = [c for c in standing if t[c] >= quota]
        if holders:
            top = max(t[c] for c in holders)
            tied = sorted(c for c in holders if t[c] == top)
            tie = tie or len(tied) > 1
            c = tied[0]
            tv = truncate((t[c] - quota) / t[c], precision)
            if c in first_round:
                reported_tv[c] = tv
            standing.discard(c)
            elected.append(c)
            if len(elected) < seats:
                events.append(RoundEvent(ELECTED, c, rnd, dict(t), tv))
                distribute(c, standing - set(holders), tv)
            else:
                # last seat: nothing left to distribute
                events.append(RoundEvent(ELECTED, c, rnd, dict(t)))
        else:
            low = min(t[c] for c in standing)
            tied = sorted(c for c in standing if t[c] == low)
            tie = tie or len(tied) > 1
            c = tied[0]
            events.append(RoundEvent(ELIMINATED, c, rnd, dict(t)))
            standing.discard(c)
            eliminated.add(c)
            distribute(c, set(standing), None)

    for c, tv in reported_tv.items():
        assert 0 <= tv < tau_max(seats), (c, tv)
    winners = tuple(elected)
    return TabulationOutcome(
        winners=winners,
        losers=frozenset(election.candidate_ids) - frozenset(winners),
        first_round_winners=first_round,
        reported_transfer_values=reported_tv,
        rounds=tuple(events),
        first_preference_tallies=first_tallies,
        tie_occurred=tie,
        final_fill=final_fill,
        precision=precision,
    )
