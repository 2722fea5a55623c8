"""Assertion types for first-winner STV audits and their conversion to assorters.

All tallies here are exact: contributions are 0, 1, or a transfer-value bound
held as a ``Fraction``, so sums never drift.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .ballots import Election, format_decimal

HALF = Fraction(1, 2)


class MalformedAssertion(ValueError):
    """An assertion was built with parameters that violate its preconditions."""


class ConversionError(ValueError):
    """An assertion cannot be expressed as a bounded assorter (vacuous or ill-posed)."""


class Kind(str, Enum):
    IQ = "IQ"
    UT = "UT"
    LT = "LT"
    AG = "AGstar"
    NL = "NLstar"
    IQX = "IQX"


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("transfer-value bounds must be exact, not float")
    return Fraction(value)


@dataclass(frozen=True)
class TransferBounds:
    """Lower and upper transfer-value bounds for candidates assumed seated on first preferences."""

    lower: tuple = ()
    upper: tuple = ()

    def __post_init__(self):
        lower = tuple(sorted((c, as_fraction(v)) for c, v in dict(self.lower).items()))
        upper = tuple(sorted((c, as_fraction(v)) for c, v in dict(self.upper).items()))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if [c for c, _ in lower] != [c for c, _ in upper]:
            raise MalformedAssertion("lower and upper bounds must cover the same candidates")
        for (c, lo), (_, hi) in zip(lower, upper):
            if not 0 <= lo < hi <= 1:
                raise MalformedAssertion(f"bad bounds for candidate {c}: {lo} .. {hi}")

    @classmethod
    def of(cls, lower: dict, upper: dict) -> "TransferBounds":
        return cls(tuple(lower.items()), tuple(upper.items()))

    @cached_property
    def lo(self) -> dict:
        return dict(self.lower)

    @cached_property
    def hi(self) -> dict:
        return dict(self.upper)

    @cached_property
    def domain(self) -> frozenset:
        return frozenset(c for c, _ in self.lower)

    @cached_property
    def denominator(self) -> int:
        """Common denominator D of every bound, so contributions scale to integers."""
        return math.lcm(1, *(v.denominator for _, v in self.lower + self.upper))

    @cached_property
    def lo_scaled(self) -> dict:
        d = self.denominator
        return {c: v.numerator * (d // v.denominator) for c, v in self.lower}

    @cached_property
    def hi_scaled(self) -> dict:
        d = self.denominator
        return {c: v.numerator * (d // v.denominator) for c, v in self.upper}


NO_BOUNDS = TransferBounds()


# Per-ballot contribution functions. Case analysis is ordered: first match wins.


def _first_outside(prefs: Sequence[int], excluded) -> Optional[int]:
    for c in prefs:
        if c not in excluded:
            return c
    return None


def score_iq(prefs: Sequence[int], c: int) -> int:
    return 1 if prefs and prefs[0] == c else 0


def min_contribution(prefs, w, bounds: TransferBounds, eliminated=frozenset(), scaled=False):
    """Minimum-tally contribution shared by AG* (empty ``eliminated``), NL*, and IQX.

    With ``scaled`` the result is multiplied by ``bounds.denominator`` and is an int.
    """
    if _first_outside(prefs, eliminated) == w:
        return bounds.denominator if scaled else 1
    W = bounds.domain
    if prefs[0] in W and _first_outside(prefs, W) == w:
        return (bounds.lo_scaled if scaled else bounds.lo)[prefs[0]]
    return 0


def max_contribution(prefs, w, l, bounds: TransferBounds, scaled=False):
    """Maximum-tally contribution of a ballot to loser ``l`` (AG* and NL*)."""
    if l not in prefs:
        return 0
    if w in prefs and prefs.index(w) < prefs.index(l):
        return 0
    if prefs[0] in bounds.domain:
        return (bounds.hi_scaled if scaled else bounds.hi)[prefs[0]]
    return bounds.denominator if scaled else 1


def score_ag_star(prefs, w, l, bounds: TransferBounds) -> tuple:
    return min_contribution(prefs, w, bounds), max_contribution(prefs, w, l, bounds)


def score_nl_star(prefs, w, l, bounds: TransferBounds, eliminated) -> tuple:
    return min_contribution(prefs, w, bounds, eliminated), max_contribution(prefs, w, l, bounds)


def score_iqx(prefs, w, bounds: TransferBounds, eliminated):
    return min_contribution(prefs, w, bounds, eliminated)


def ut_threshold(quota: int, tau_bar) -> Fraction:
    tau_bar = as_fraction(tau_bar)
    if not 0 <= tau_bar < 1:
        raise ValueError(f"transfer value bound must lie in [0, 1): {tau_bar}")
    return Fraction(quota) / (1 - tau_bar)


lt_threshold = ut_threshold


def _sum(election: Election, fn, denominator: int = 1) -> Fraction:
    """Exact sum over the ballot multiset of an integer-valued (scaled) contribution."""
    return Fraction(sum(fn(b.prefs) * b.count for b in election.ballots), denominator)


@dataclass(frozen=True)
class Assertion:
    kind: Kind
    subject: int
    opponent: Optional[int] = None
    bounds: TransferBounds = NO_BOUNDS
    eliminated: frozenset = frozenset()
    bound: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "eliminated", frozenset(self.eliminated))
        if self.bound is not None:
            object.__setattr__(self, "bound", as_fraction(self.bound))
        k = self.kind
        W = self.bounds.domain
        if k in (Kind.UT, Kind.LT):
            if self.bound is None or not 0 <= self.bound < 1:
                raise MalformedAssertion(f"{k.value} needs a transfer-value bound in [0, 1)")
        elif self.bound is not None:
            raise MalformedAssertion(f"{k.value} takes no scalar bound")
        if k in (Kind.AG, Kind.NL):
            if self.opponent is None or self.opponent == self.subject:
                raise MalformedAssertion(f"{k.value} needs a distinct opponent")
            if self.opponent in W:
                raise MalformedAssertion("opponent cannot be an assumed first-round winner")
        elif self.opponent is not None:
            raise MalformedAssertion(f"{k.value} takes no opponent")
        if k in (Kind.AG, Kind.NL, Kind.IQX) and self.subject in W:
            raise MalformedAssertion("subject cannot be an assumed first-round winner")
        if k not in (Kind.AG, Kind.NL, Kind.IQX) and W:
            raise MalformedAssertion(f"{k.value} takes no transfer bounds")
        if self.eliminated:
            if k not in (Kind.NL, Kind.IQX):
                raise MalformedAssertion(f"{k.value} takes no eliminated set")
            clash = self.eliminated & (W | {self.subject, self.opponent})
            if clash:
                raise MalformedAssertion(f"eliminated set overlaps protected candidates: {sorted(clash)}")

    # constructors

    @classmethod
    def iq(cls, c: int) -> "Assertion":
        return cls(Kind.IQ, c)

    @classmethod
    def ut(cls, c: int, tau_bar) -> "Assertion":
        return cls(Kind.UT, c, bound=tau_bar)

    @classmethod
    def lt(cls, c: int, tau_lo) -> "Assertion":
        return cls(Kind.LT, c, bound=tau_lo)

    @classmethod
    def ag(cls, w: int, l: int, bounds: TransferBounds = NO_BOUNDS) -> "Assertion":
        return cls(Kind.AG, w, l, bounds)

    @classmethod
    def nl(cls, w: int, l: int, bounds: TransferBounds, eliminated) -> "Assertion":
        return cls(Kind.NL, w, l, bounds, frozenset(eliminated))

    @classmethod
    def iqx(cls, w: int, bounds: TransferBounds = NO_BOUNDS, eliminated=frozenset()) -> "Assertion":
        return cls(Kind.IQX, w, None, bounds, frozenset(eliminated))

    # scoring

    def g(self, prefs) -> Fraction:
        """Raw per-ballot score whose sum is compared against :meth:`threshold`."""
        k = self.kind
        if k is Kind.IQ or k is Kind.LT:
            return score_iq(prefs, self.subject)
        if k is Kind.UT:
            return 1 - score_iq(prefs, self.subject)
        if k is Kind.IQX:
            return score_iqx(prefs, self.subject, self.bounds, self.eliminated)
        lo, hi = (
            score_ag_star(prefs, self.subject, self.opponent, self.bounds)
            if k is Kind.AG
            else score_nl_star(prefs, self.subject, self.opponent, self.bounds, self.eliminated)
        )
        return lo - hi

    @property
    def denominator(self) -> int:
        return self.bounds.denominator

    def g_scaled(self, prefs) -> int:
        """``g(prefs) * self.denominator``, computed in integers."""
        k = self.kind
        w = self.subject
        if k is Kind.IQ or k is Kind.LT:
            return score_iq(prefs, w)
        if k is Kind.UT:
            return 1 - score_iq(prefs, w)
        elim = self.eliminated if k is not Kind.AG else frozenset()
        lo = min_contribution(prefs, w, self.bounds, elim, scaled=True)
        if k is Kind.IQX:
            return lo
        return lo - max_contribution(prefs, w, self.opponent, self.bounds, scaled=True)

    @property
    def g_range(self) -> tuple:
        if self.kind in (Kind.AG, Kind.NL):
            return -1, 1
        return 0, 1

    @property
    def integral(self) -> bool:
        """Whether every per-ballot score is an integer."""
        if self.kind is Kind.IQX:
            return all(v == 0 for _, v in self.bounds.lower)
        return self.kind in (Kind.IQ, Kind.LT, Kind.UT)

    def threshold(self, election: Election) -> Fraction:
        """T such that the assertion is tested as sum(g) > T."""
        q = election.quota
        k = self.kind
        if k in (Kind.IQ, Kind.IQX):
            return Fraction(q) - HALF if self.integral else Fraction(q)
        if k is Kind.LT:
            return lt_threshold(q, self.bound)
        if k is Kind.UT:
            return election.total_ballots - ut_threshold(q, self.bound)
        return Fraction(0)

    def tallies(self, election: Election) -> tuple:
        """The quantities the assertion compares, as written in its definition.

        IQ/LT/UT: (first-preference tally,); IQX: (IQX tally,);
        AG*/NL*: (minimum tally of subject, maximum tally of opponent).
        """
        k = self.kind
        w = self.subject
        if k in (Kind.IQ, Kind.LT, Kind.UT):
            return (_sum(election, lambda p: score_iq(p, w)),)
        b, d = self.bounds, self.denominator
        if k is Kind.IQX:
            return (_sum(election, lambda p: min_contribution(p, w, b, self.eliminated, True), d),)
        elim = self.eliminated if k is Kind.NL else frozenset()
        lo = _sum(election, lambda p: min_contribution(p, w, b, elim, True), d)
        hi = _sum(election, lambda p: max_contribution(p, w, self.opponent, b, True), d)
        return lo, hi

    def holds(self, election: Election) -> bool:
        """Truth of the assertion's defining inequality on ``election``."""
        t = self.tallies(election)
        q = election.quota
        k = self.kind
        if k in (Kind.IQ, Kind.IQX):
            return t[0] >= q
        if k is Kind.LT:
            return t[0] > lt_threshold(q, self.bound)
        if k is Kind.UT:
            return t[0] < ut_threshold(q, self.bound)
        return t[0] > t[1]

    # identity

    @cached_property
    def key(self) -> str:
        def vec(pairs):
            return ",".join(f"{c}={v.numerator}/{v.denominator}" for c, v in pairs)

        bound = "" if self.bound is None else f"{self.bound.numerator}/{self.bound.denominator}"
        return "|".join(
            [
                self.kind.value,
                str(self.subject),
                "" if self.opponent is None else str(self.opponent),
                vec(self.bounds.lower),
                vec(self.bounds.upper),
                ",".join(map(str, sorted(self.eliminated))),
                bound,
            ]
        )

    @cached_property
    def digest(self) -> int:
        return int.from_bytes(hashlib.sha256(self.key.encode()).digest()[:8], "big")

    def sort_key(self):
        order = list(Kind).index(self.kind)
        return (order, self.subject, -1 if self.opponent is None else self.opponent, self.key)

    def to_dict(self, election: Election) -> dict:
        d = {"kind": self.kind.value, "subject": election.name_of(self.subject)}
        if self.opponent is not None:
            d["opponent"] = election.name_of(self.opponent)
        if self.bounds.domain:
            d["W"] = sorted(election.names(self.bounds.domain))
            d["lower"] = {election.name_of(c): format_decimal(v) for c, v in self.bounds.lower}
            d["upper"] = {election.name_of(c): format_decimal(v) for c, v in self.bounds.upper}
        if self.kind in (Kind.NL, Kind.IQX):
            d["eliminated"] = sorted(election.names(self.eliminated))
        if self.bound is not None:
            d["bound"] = format_decimal(self.bound)
        return d

    def describe(self, election: Election) -> str:
        name = election.name_of
        parts = [name(self.subject)]
        if self.opponent is not None:
            parts.append(name(self.opponent))
        if self.bound is not None:
            parts.append(format_decimal(self.bound))
        if self.eliminated:
            parts.append("O*={" + ",".join(sorted(map(name, self.eliminated))) + "}")
        return f"{self.kind.value}({', '.join(parts)})"


@dataclass(frozen=True)
class Assorter:
    """Assertion rewritten as a [0, u]-valued per-ballot score with mean > 1/2 iff it holds.

    For the raw form ``sum(g) > T`` with ``g`` in ``[g_lo, g_hi]`` the score is
    ``(g - g_lo) / (2 (T/|B| - g_lo))``.
    """

    assertion: Assertion
    g_lo: Fraction
    g_hi: Fraction
    threshold: Fraction
    population: int
    scaled: tuple = field(repr=False)  # g * denominator per ranking type
    counts: tuple = field(repr=False)
    denominator: int = 1

    @property
    def raw(self) -> tuple:
        return tuple(Fraction(g, self.denominator) for g in self.scaled)

    @cached_property
    def scale(self) -> Fraction:
        return 2 * (self.threshold / self.population - self.g_lo)

    @property
    def upper_bound(self) -> Fraction:
        return (self.g_hi - self.g_lo) / self.scale

    def normalize(self, g) -> Fraction:
        return (g - self.g_lo) / self.scale

    def score(self, prefs) -> Fraction:
        if hasattr(prefs, "prefs"):
            prefs = prefs.prefs
        return self.normalize(self.assertion.g(prefs))

    @cached_property
    def reported_mean(self) -> Fraction:
        total = sum(g * n for g, n in zip(self.scaled, self.counts))
        return self.normalize(Fraction(total, self.denominator * self.population))

    @property
    def margin(self) -> Fraction:
        return 2 * self.reported_mean - 1

    @cached_property
    def raw_array(self) -> np.ndarray:
        return np.array(self.scaled, dtype=float) / self.denominator

    @cached_property
    def count_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)

    @property
    def key(self) -> str:
        return self.assertion.key


def to_assorter(assertion: Assertion, election: Election) -> Assorter:
    g_lo, g_hi = (Fraction(x) for x in assertion.g_range)
    T = assertion.threshold(election)
    n = election.total_ballots
    if T / n <= g_lo:
        raise ConversionError(
            f"{assertion.kind.value} threshold {T} does not exceed the score floor; assertion is vacuous"
        )
    scaled = tuple(assertion.g_scaled(b.prefs) for b in election.ballots)
    counts = tuple(b.count for b in election.ballots)
    return Assorter(assertion, g_lo, g_hi, T, n, scaled, counts, assertion.denominator)
