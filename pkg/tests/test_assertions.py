import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stvrla.assertions import (
    NO_BOUNDS,
    Assertion,
    ConversionError,
    Kind,
    MalformedAssertion,
    TransferBounds,
    max_contribution,
    min_contribution,
    score_iq,
    to_assorter,
    ut_threshold,
)
from stvrla.ballots import Ballot, Election

from oracles import brute_max_tally, brute_min_tally, election_from, random_profile

F = Fraction
A, B, C, D, E = range(5)


def bounds_c(lo="0.39", hi="0.40"):
    return TransferBounds.of({C: F(lo)}, {C: F(hi)})


def test_iq_examples(table1):
    assert Assertion.iq(C).tallies(table1) == (510,)
    assert Assertion.iq(C).holds(table1)
    assert not Assertion.iq(A).holds(table1)
    assert score_iq((B, A, C), A) == 0


def test_ut_lt_examples(table1):
    assert ut_threshold(308, F("0.40")) == F(308) / F("0.6")
    assert Assertion.ut(C, F("0.40")).holds(table1)
    assert Assertion.lt(C, F("0.39")).holds(table1)
    assert ut_threshold(308, 0) == 308
    with pytest.raises(ValueError):
        ut_threshold(308, 1)


def test_ag_examples(table1):
    assert Assertion.ag(A, B).tallies(table1) == (250, 120)
    assert Assertion.ag(A, B).holds(table1)
    a = Assertion.ag(A, D, bounds_c())
    assert a.tallies(table1) == (250, F("0.40") * 510)
    assert a.holds(table1)


def test_ag_single_ballot_case():
    b = bounds_c()
    prefs = (C, E, D)
    assert min_contribution(prefs, D, b) == 0
    assert max_contribution(prefs, D, E, b) == F("0.40")


def test_nl_examples(table1):
    a = Assertion.nl(A, D, bounds_c(), {B})
    assert a.tallies(table1) == (370, 204)
    assert a.holds(table1)
    assert min_contribution((B, A, C), A, NO_BOUNDS, frozenset({B})) == 1


def test_iqx_examples(table1):
    assert Assertion.iqx(A, eliminated={B}).tallies(table1) == (370,)
    assert Assertion.iqx(A, eliminated={B}).holds(table1)
    a = Assertion.iqx(D, TransferBounds.of({C: F("0.39")}, {C: F("0.40")}))
    # [C,E,D] passes to E once C is set aside, so only the 400 [C,D] ballots count
    assert a.tallies(table1) == (F("0.39") * 400,)
    assert not a.holds(table1)


def test_iq_assorter_mean(table1):
    s = to_assorter(Assertion.iq(C), table1)
    assert s.reported_mean == F(510, 2) / F(615, 2)
    assert abs(float(s.reported_mean) - 0.8293) < 1e-4
    assert s.margin > 0


def test_ag_assorter_is_half_shift(table1):
    s = to_assorter(Assertion.ag(A, B), table1)
    assert s.upper_bound == 1
    for b in table1.ballots:
        assert s.score(b) == (Assertion.ag(A, B).g(b.prefs) + 1) / 2


def test_zero_margin_boundary():
    e = Election(("A", "B", "C"), (Ballot((0,), 5), Ballot((1,), 5), Ballot((2,), 1)), 1)
    # min tally of A equals max tally of B
    s = to_assorter(Assertion.ag(0, 1), e)
    assert s.reported_mean == F(1, 2)
    assert s.margin == 0


def test_conversion_error_when_vacuous():
    e = Election(("A", "B", "C"), (Ballot((0,), 10), Ballot((1,), 1)), 1)
    # UT with tau_bar so large that Q/(1-tau_bar) exceeds |B|: threshold below the score floor
    with pytest.raises(ConversionError):
        to_assorter(Assertion.ut(0, F("0.9")), e)


@pytest.mark.parametrize(
    "build",
    [
        lambda: Assertion(Kind.AG, A),
        lambda: Assertion(Kind.AG, A, A),
        lambda: Assertion(Kind.UT, A),
        lambda: Assertion(Kind.LT, A, bound=F(1)),
        lambda: Assertion(Kind.IQ, A, bound=F("0.1")),
        lambda: Assertion.ag(C, D, bounds_c()),
        lambda: Assertion.ag(A, C, bounds_c()),
        lambda: Assertion.nl(A, D, bounds_c(), {C}),
        lambda: Assertion.nl(A, D, NO_BOUNDS, {A}),
        lambda: Assertion(Kind.AG, A, B, NO_BOUNDS, frozenset({D})),
        lambda: Assertion(Kind.IQ, A, bounds=bounds_c()),
        lambda: TransferBounds.of({C: F("0.5")}, {C: F("0.4")}),
        lambda: TransferBounds.of({C: F("0.1")}, {D: F("0.4")}),
        lambda: Assertion.ut(A, 0.3),
    ],
)
def test_malformed_assertions(build):
    with pytest.raises((MalformedAssertion, TypeError)):
        build()


def test_assertions_deduplicate():
    x = Assertion.nl(A, D, bounds_c(), {B})
    y = Assertion.nl(A, D, TransferBounds.of({C: F(39, 100)}, {C: F(2, 5)}), frozenset([B]))
    assert x == y and hash(x) == hash(y) and x.key == y.key
    assert len({x, y, Assertion.ag(A, D, bounds_c())}) == 2


# collapse identities over every ranking of up to 5 candidates


def all_rankings(n):
    for k in range(1, n + 1):
        yield from itertools.permutations(range(n), k)


def test_collapse_identities():
    b = bounds_c()
    for prefs in all_rankings(5):
        for w, l in [(A, D), (D, A), (B, E), (E, D)]:
            assert min_contribution(prefs, w, b, frozenset()) == Assertion.ag(w, l, b).g(prefs) + max_contribution(
                prefs, w, l, b
            )
            # no seated candidates: the upper bound never enters
            assert max_contribution(prefs, w, l, NO_BOUNDS) in (0, 1)
        assert Assertion.iqx(A).g(prefs) == Assertion.iq(A).g(prefs)


def test_min_contribution_cases_exclusive():
    b = TransferBounds.of({C: F("0.3"), E: F("0.2")}, {C: F("0.5"), E: F("0.4")})
    for prefs in all_rankings(5):
        for w in (A, B, D):
            for elim in (frozenset(), frozenset({B if w != B else D})):
                v = min_contribution(prefs, w, b, elim)
                case1 = [c for c in prefs if c not in elim][:1] == [w]
                case2 = prefs[0] in (C, E) and [c for c in prefs if c not in (C, E)][:1] == [w]
                expect = 1 if case1 else (b.lo[prefs[0]] if case2 else 0)
                assert v == expect


@st.composite
def bound_pair(draw):
    lo = draw(st.integers(0, 70))
    hi = draw(st.integers(lo + 1, 75))
    return F(lo, 100), F(hi, 100)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(0, 5), unique=True, min_size=1, max_size=6).map(tuple),
    bound_pair(),
    st.integers(0, 20),
)
def test_monotonicity(prefs, pair, raise_by):
    w, l, s = 0, 1, 2
    base = TransferBounds.of({s: pair[0]}, {s: pair[1]})
    # raising the upper bound
    higher_hi = TransferBounds.of({s: pair[0]}, {s: min(F(3, 4), pair[1] + F(raise_by, 100))})
    assert max_contribution(prefs, w, l, higher_hi) >= max_contribution(prefs, w, l, base)
    # raising the lower bound (kept below the upper bound)
    new_lo = min(pair[0] + F(raise_by, 100), pair[1] - F(1, 100))
    if new_lo >= pair[0]:
        higher_lo = TransferBounds.of({s: new_lo}, {s: pair[1]})
        assert min_contribution(prefs, w, higher_lo) >= min_contribution(prefs, w, base)
    # enlarging the eliminated set
    for small, big in [(frozenset(), frozenset({3})), (frozenset({3}), frozenset({3, 4}))]:
        assert min_contribution(prefs, w, base, big) >= min_contribution(prefs, w, base, small)


def random_assertions(rng: random.Random, ncand: int, seats: int):
    """A batch of well-formed assertions of every kind for a random W and bounds."""
    cands = list(range(ncand))
    W = rng.sample(cands, rng.randint(0, min(2, seats)))
    lower, upper = {}, {}
    for c in W:
        lo = F(rng.randint(0, 600), 1000)
        hi = lo + F(rng.randint(1, 150), 1000)
        lower[c], upper[c] = lo, hi
    bounds = TransferBounds.of(lower, upper)
    rest = [c for c in cands if c not in W]
    out = []
    for c in cands:
        out.append(Assertion.iq(c))
        out.append(Assertion.ut(c, F(rng.randint(0, 700), 1000)))
        out.append(Assertion.lt(c, F(rng.randint(0, 700), 1000)))
    for w in rest:
        for l in rest:
            if l == w:
                continue
            out.append(Assertion.ag(w, l, bounds))
            pool = [c for c in rest if c not in (w, l)]
            elim = frozenset(rng.sample(pool, rng.randint(0, len(pool))))
            out.append(Assertion.nl(w, l, bounds, elim))
        pool = [c for c in rest if c != w]
        out.append(Assertion.iqx(w, bounds, frozenset(rng.sample(pool, rng.randint(0, len(pool))))))
    return out, lower, upper


def brute_tallies(a: Assertion, profile, ncand, lower, upper):
    items = list(profile.items())
    cands = range(ncand)
    if a.kind in (Kind.IQ, Kind.UT, Kind.LT):
        return (sum(n for r, n in items if r[0] == a.subject),)
    lo = lower if a.bounds.domain else {}
    hi = upper if a.bounds.domain else {}
    if a.kind is Kind.IQX:
        return (brute_min_tally(items, cands, a.subject, lo, a.eliminated),)
    elim = a.eliminated if a.kind is Kind.NL else frozenset()
    return (
        brute_min_tally(items, cands, a.subject, lo, elim),
        brute_max_tally(items, a.subject, a.opponent, hi),
    )


def test_engine_tallies_match_brute_force_small():
    rng = random.Random(99)
    for _ in range(40):
        ncand = rng.randint(3, 6)
        seats = rng.randint(1, ncand - 1)
        profile = random_profile(rng, ncand, rng.randint(1, 8))
        e = election_from(profile, ncand, seats)
        assertions, lower, upper = random_assertions(rng, ncand, seats)
        for a in assertions:
            assert a.tallies(e) == brute_tallies(a, profile, ncand, lower, upper), a.describe(e)


def test_assorter_equivalence_random():
    rng = random.Random(7)
    checked = 0
    for _ in range(60):
        ncand = rng.randint(3, 6)
        seats = rng.randint(1, ncand - 1)
        e = election_from(random_profile(rng, ncand, rng.randint(1, 8)), ncand, seats)
        assertions, _, _ = random_assertions(rng, ncand, seats)
        for a in assertions:
            try:
                s = to_assorter(a, e)
            except ConversionError:
                continue
            scores = [s.score(b) for b in e.ballots]
            assert all(0 <= x <= s.upper_bound for x in scores)
            mean = sum(x * b.count for x, b in zip(scores, e.ballots)) / e.total_ballots
            assert mean == s.reported_mean
            raw = sum(a.g(b.prefs) * b.count for b in e.ballots)
            assert (mean > F(1, 2)) == (raw > a.threshold(e))
            if a.kind in (Kind.AG, Kind.NL, Kind.LT, Kind.UT) or a.integral:
                # strict forms coincide with the defining inequality
                assert (mean > F(1, 2)) == a.holds(e), a.describe(e)
            elif mean > F(1, 2):
                # fractional IQX is tested conservatively
                assert a.holds(e)
            checked += 1
    assert checked > 1000


def test_to_dict_fields(table1):
    a = Assertion.nl(A, D, bounds_c(), {B})
    d = a.to_dict(table1)
    assert d == {
        "kind": "NLstar",
        "subject": "A",
        "opponent": "D",
        "W": ["C"],
        "lower": {"C": "0.39"},
        "upper": {"C": "0.4"},
        "eliminated": ["B"],
    }
    assert Assertion.ut(E, F("0.23")).to_dict(table1) == {"kind": "UT", "subject": "E", "bound": "0.23"}
