"""Audit formation: the straight-IQX audit and the dual-loop neighbourhood search."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Optional

from .assertions import Assertion, ConversionError, Kind, TransferBounds, to_assorter, ut_threshold
from .ballots import Election, tau_max
from .risk import AsnEstimate, AsnParams, asn_of_set, estimate_asn
from .tabulate import TabulationOutcome

log = logging.getLogger(__name__)

FULL = "Full"
PARTIAL = "Partial"
NONE = "None"
STRAIGHT_IQX = "StraightIQX"
DUAL_LOOP = "DualLoop"

DEFAULT_DELTA = Decimal("0.005")

LOWER = "Lower"
UPPER = "Upper"


@dataclass(frozen=True)
class Priced:
    assertion: Assertion
    holds: bool
    margin: Optional[Fraction]
    asn: AsnEstimate

    @property
    def auditable(self) -> bool:
        return self.holds and self.margin is not None and self.margin > 0 and self.asn.feasible


class Pricer:
    """Prices assertions once per election; safe to share between threads."""

    def __init__(self, election: Election, params: AsnParams):
        self.election = election
        self.params = params
        self._cache: dict = {}
        self._lock = threading.Lock()

    def __call__(self, a: Assertion) -> Priced:
        with self._lock:
            hit = self._cache.get(a)
            if hit is None:
                hit = self._cache[a] = self._price(a)
            return hit

    def _price(self, a: Assertion) -> Priced:
        holds = a.holds(self.election)
        try:
            assorter = to_assorter(a, self.election)
        except ConversionError as e:
            return Priced(a, holds, None, AsnEstimate(None, reason=str(e)))
        margin = assorter.margin
        if not holds or margin <= 0:
            return Priced(a, holds, margin, AsnEstimate(None, reason="non-positive margin"))
        return Priced(a, holds, margin, estimate_asn(assorter, self.election, self.params))

    def auditable(self, a: Assertion) -> bool:
        return self(a).auditable

    def asn(self, assertions: Iterable[Assertion]) -> AsnEstimate:
        return asn_of_set(self(a).asn for a in assertions)

    @property
    def priced_count(self) -> int:
        return len(self._cache)


@dataclass(frozen=True)
class AuditPlan:
    assertions: tuple
    verified_winners: frozenset
    asn: AsnEstimate
    kind: str
    strategy: str

    @property
    def is_full(self) -> bool:
        return self.kind == FULL

    def __len__(self) -> int:
        return len(self.assertions)


def make_plan(assertions: Iterable[Assertion], verified, winners, strategy: str, pricer: Pricer) -> AuditPlan:
    assertions = tuple(sorted(set(assertions), key=Assertion.sort_key))
    verified = frozenset(verified)
    if verified and verified == frozenset(winners):
        kind = FULL
    elif verified:
        kind = PARTIAL
    else:
        kind = NONE
    return AuditPlan(assertions, verified, pricer.asn(assertions), kind, strategy)


def no_plan(strategy: str) -> AuditPlan:
    return AuditPlan((), frozenset(), AsnEstimate(None, reason="no audit"), NONE, strategy)


def _asn_key(plan: Optional[AuditPlan]) -> float:
    if plan is None or not plan.asn.feasible:
        return float("inf")
    return plan.asn.value


def plan_order(a: AuditPlan, b: AuditPlan) -> bool:
    """True iff ``a`` is strictly better than ``b``: more winners, else cheaper."""
    if len(a.verified_winners) != len(b.verified_winners):
        return len(a.verified_winners) > len(b.verified_winners)
    return _asn_key(a) < _asn_key(b)


@dataclass(frozen=True)
class BoundVector:
    values: tuple
    kind: str

    @classmethod
    def of(cls, values: dict, kind: str) -> "BoundVector":
        return cls(tuple(sorted((c, Fraction(v)) for c, v in values.items())), kind)

    def as_dict(self) -> dict:
        return dict(self.values)

    def __getitem__(self, c):
        return dict(self.values)[c]


def neighbours(v: BoundVector, delta, cap: Fraction) -> list:
    """One-coordinate moves of size ``delta``: down to 0 for lower bounds, up to ``cap`` for upper."""
    delta = Fraction(delta)
    out = []
    for i, (c, x) in enumerate(v.values):
        if v.kind == LOWER:
            if x <= 0:
                continue
            moved = max(Fraction(0), x - delta)
        else:
            if x >= cap:
                continue
            moved = min(cap, x + delta)
        values = list(v.values)
        values[i] = (c, moved)
        out.append(BoundVector(tuple(values), v.kind))
    return out


def straight_iqx_audit(election: Election, outcome: TabulationOutcome, pricer: Pricer) -> Optional[AuditPlan]:
    """A full audit of IQX assertions (plus their supporting AG*s), or None."""
    winners = outcome.winners
    losers = sorted(outcome.losers)
    assertions = []
    for w in winners:
        beaten = [Assertion.ag(w, l) for l in losers]
        beaten = [a for a in beaten if pricer.auditable(a)]
        iqx = Assertion.iqx(w, eliminated={a.opponent for a in beaten})
        if not pricer.auditable(iqx):
            return None
        assertions.append(iqx)
        if iqx.eliminated:
            assertions.extend(beaten)
    return make_plan(assertions, winners, winners, STRAIGHT_IQX, pricer)


@dataclass
class _Search:
    """Fixed inputs of one dual-loop search, plus its construct_audit cache."""

    election: Election
    outcome: TabulationOutcome
    pricer: Pricer
    delta: Fraction
    first_winners: tuple  # W', verified by IQ
    iq_assertions: tuple
    remaining: tuple  # R
    losers: tuple
    cap: Fraction
    cache: dict = field(default_factory=dict)
    stats: dict = field(default_factory=lambda: {"construct": 0, "outer": 0, "inner": 0})

    def iq_plan(self) -> AuditPlan:
        return make_plan(self.iq_assertions, self.first_winners, self.outcome.winners, DUAL_LOOP, self.pricer)

    def plan(self, assertions, verified) -> AuditPlan:
        return make_plan(assertions, verified, self.outcome.winners, DUAL_LOOP, self.pricer)


def search_context(election: Election, outcome: TabulationOutcome, pricer: Pricer, delta, iq) -> _Search:
    """Fixed inputs of a dual-loop search whose first-round winners are verified by ``iq``."""
    verified_first = tuple(a.subject for a in iq)
    return _Search(
        election=election,
        outcome=outcome,
        pricer=pricer,
        delta=Fraction(delta),
        first_winners=verified_first,
        iq_assertions=tuple(iq),
        remaining=tuple(w for w in outcome.winners if w not in verified_first),
        losers=tuple(sorted(outcome.losers)),
        cap=tau_max(election.seats),
    )


def verify_vo1(search: _Search, r: int, bounds: TransferBounds) -> tuple:
    """(auditable AG*s of r over losers, Vo1 set or empty)."""
    ags = [Assertion.ag(r, l, bounds) for l in search.losers]
    ags = [a for a in ags if search.pricer.auditable(a)]
    vo1 = set(ags) if len(ags) == len(search.losers) else set()
    return ags, vo1


def nl_fixed_point(search: _Search, r: int, bounds: TransferBounds, ags) -> tuple:
    """Grow NL* assertions for ``r`` until no new loser is covered.

    Returns (NL* assertions, covered losers, rounds that added assertions).
    Losers already beaten are assumed eliminated when testing the rest.
    """
    covered = {a.opponent for a in ags}
    nls: list = []
    iterations = 0
    while True:
        eliminated = frozenset(covered)
        new = []
        for l in search.losers:
            if l in covered:
                continue
            a = Assertion.nl(r, l, bounds, eliminated)
            if search.pricer.auditable(a):
                new.append(a)
        if not new:
            return nls, covered, iterations
        iterations += 1
        nls.extend(new)
        covered |= {a.opponent for a in new}


def verify_vo2(search: _Search, r: int, bounds: TransferBounds, ags) -> set:
    nls, covered, _ = nl_fixed_point(search, r, bounds, ags)
    if nls and covered >= set(search.losers):
        return set(nls) | set(ags)
    return set()


def verify_vo3(search: _Search, r: int, bounds: TransferBounds, ags) -> set:
    iqx = Assertion.iqx(r, bounds, {a.opponent for a in ags})
    if search.pricer.auditable(iqx):
        return {iqx} | set(ags)
    return set()


def _lt_set(search: _Search, lower: BoundVector) -> Optional[list]:
    out = []
    for w, lo in lower.values:
        if lo == 0:
            continue
        a = Assertion.lt(w, lo)
        if not search.pricer.auditable(a):
            return None
        out.append(a)
    return out


def _ut_needed(search: _Search, tau_bar: Fraction) -> bool:
    # pointless at or above tau_max, or once the threshold exceeds the ballot count
    if tau_bar >= search.cap:
        return False
    return ut_threshold(search.election.quota, tau_bar) <= search.election.total_ballots


def _ut_set(search: _Search, upper: BoundVector) -> Optional[list]:
    out = []
    for w, hi in upper.values:
        if not _ut_needed(search, hi):
            continue
        a = Assertion.ut(w, hi)
        if not search.pricer.auditable(a):
            return None
        out.append(a)
    return out


def construct_audit(search: _Search, lower: BoundVector, upper: BoundVector) -> tuple:
    """Candidate (full or None, partial) audit for one pair of bound vectors."""
    key = (lower, upper)
    if key in search.cache:
        return search.cache[key]
    search.stats["construct"] += 1
    result = _construct(search, lower, upper)
    search.cache[key] = result
    return result


def _construct(search: _Search, lower: BoundVector, upper: BoundVector) -> tuple:
    partial = search.iq_plan()
    lts = _lt_set(search, lower)
    if lts is None:
        return None, partial
    uts = _ut_set(search, upper)
    if uts is None:
        return None, partial
    bounds = TransferBounds.of(lower.as_dict(), upper.as_dict())
    chosen: list = []
    verified = []
    for r in search.remaining:
        ags, vo1 = verify_vo1(search, r, bounds)
        options = [vo1, verify_vo2(search, r, bounds, ags), verify_vo3(search, r, bounds, ags)]
        options = [o for o in options if o]
        if not options:
            continue
        best = min(options, key=lambda o: _asn_key_set(search, o))
        chosen.extend(best)
        verified.append(r)
    if not verified and search.remaining:
        return None, partial
    partial = search.plan(
        list(search.iq_assertions) + lts + uts + chosen, list(search.first_winners) + verified
    )
    full = partial if len(verified) == len(search.remaining) else None
    return full, partial


def _asn_key_set(search: _Search, assertions) -> float:
    est = search.pricer.asn(assertions)
    return float("inf") if not est.feasible else est.value


def _keep_searching(plan: AuditPlan, kind: Kind, bound_set: Optional[list], pricer: Pricer) -> bool:
    """Whether a bound search should move on to the next neighbourhood.

    It stops once every bound assertion of ``kind`` needed at the best vector
    is auditable and none of them is the costliest assertion of ``plan``.
    """
    if bound_set is None:
        return True
    mine = [pricer(a).asn.value for a in plan.assertions if a.kind is kind]
    if not mine:
        return False
    top = max(pricer(a).asn.value for a in plan.assertions)
    return max(mine) >= top


def inner_loop(search: _Search, lower: BoundVector) -> tuple:
    """Neighbourhood search over upper-bound vectors for a fixed lower-bound vector."""
    search.stats["inner"] += 1
    best_full: Optional[AuditPlan] = None
    best_partial = search.iq_plan()
    if _lt_set(search, lower) is None:
        # every construct_audit call would return (None, IQ-only partial)
        return best_full, best_partial
    reported = search.outcome.reported_transfer_values
    start = {w: min(search.cap, Fraction(reported[w]) + search.delta) for w in search.first_winners}
    hood = [BoundVector.of(start, UPPER)]
    while hood:
        best_vec = hood[0]
        for upper in hood:
            full, partial = construct_audit(search, lower, upper)
            if full is not None and _asn_key(full) < _asn_key(best_full):
                best_full, best_partial, best_vec = full, full, upper
            elif plan_order(partial, best_partial):
                best_partial, best_vec = partial, upper
        hood = neighbours(best_vec, search.delta, search.cap)
        if not _keep_searching(best_partial, Kind.UT, _ut_set(search, best_vec), search.pricer):
            break
    return best_full, best_partial


def dual_loop_audit(
    election: Election,
    outcome: TabulationOutcome,
    pricer: Pricer,
    delta=DEFAULT_DELTA,
    stats: Optional[dict] = None,
) -> AuditPlan:
    winners = outcome.winners
    first_winners = [w for w in winners if w in outcome.first_round_winners]
    iq = [Assertion.iq(w) for w in first_winners]
    iq = [a for a in iq if pricer.auditable(a)]
    if not iq:
        return no_plan(DUAL_LOOP)
    verified_first = tuple(a.subject for a in iq)
    if len(iq) == len(winners):
        return make_plan(iq, winners, winners, DUAL_LOOP, pricer)

    search = search_context(election, outcome, pricer, delta, iq)
    best_full: Optional[AuditPlan] = None
    best_partial = search.iq_plan()
    reported = outcome.reported_transfer_values
    start = {w: max(Fraction(0), Fraction(reported[w]) - search.delta) for w in verified_first}
    hood = [BoundVector.of(start, LOWER)]
    while hood:
        search.stats["outer"] += 1
        best_vec = hood[0]
        for lower in hood:
            full, partial = inner_loop(search, lower)
            if full is not None and _asn_key(full) < _asn_key(best_full):
                best_full, best_partial, best_vec = full, full, lower
            elif plan_order(partial, best_partial):
                best_partial, best_vec = partial, lower
        hood = neighbours(best_vec, search.delta, search.cap)
        if not _keep_searching(best_partial, Kind.LT, _lt_set(search, best_vec), search.pricer):
            break
    if stats is not None:
        stats.update(search.stats)
    log.debug("dual loop: %s", search.stats)
    return best_full if best_full is not None else best_partial


def plan_audit(
    election: Election,
    outcome: TabulationOutcome,
    params: AsnParams = AsnParams(),
    delta=DEFAULT_DELTA,
    pricer: Optional[Pricer] = None,
) -> AuditPlan:
    """Best audit for the reported outcome: cheapest full audit, else best dual-loop partial."""
    pricer = pricer or Pricer(election, params)
    straight = straight_iqx_audit(election, outcome, pricer)
    dual = dual_loop_audit(election, outcome, pricer, delta)
    if straight is not None and dual.is_full:
        return dual if _asn_key(dual) < _asn_key(straight) else straight
    if straight is not None:
        return straight
    return dual
