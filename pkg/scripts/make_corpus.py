"""Generate the bundled sample corpus of synthetic first-winner STV contests.

Rankings are drawn from a Plackett-Luce model over candidate strengths with
truncated ballot lengths, then aggregated by ranking. Contests that do not
seat anyone on first preferences are redrawn.

    python scripts/make_corpus.py corpus/
"""

import argparse
from pathlib import Path

import numpy as np

from stvrla.ballots import Ballot, Election, serialize_election
from stvrla.tabulate import check_first_winner_criterion, tabulate

# (name, seats, candidates, ballots, seed)
CONTESTS = [
    ("ward01", 3, 5, 3000, 11),
    ("ward02", 3, 6, 4200, 12),
    ("ward03", 3, 7, 5200, 13),
    ("ward04", 4, 6, 4800, 14),
    ("ward05", 4, 7, 5500, 15),
    ("ward06", 4, 8, 6100, 16),
    ("ward07", 3, 6, 3600, 17),
    ("ward08", 4, 7, 5000, 18),
]


def draw_contest(seats, ncand, nballots, rng):
    strength = rng.dirichlet(np.full(ncand, 1.2))
    strength[rng.integers(ncand)] += rng.uniform(0.2, 0.6)
    strength /= strength.sum()
    counts = {}
    for _ in range(nballots):
        length = min(ncand, 1 + rng.geometric(0.35))
        remaining = list(range(ncand))
        ranking = []
        for _ in range(length):
            w = strength[remaining] / strength[remaining].sum()
            pick = remaining[rng.choice(len(remaining), p=w)]
            ranking.append(pick)
            remaining.remove(pick)
        key = tuple(ranking)
        counts[key] = counts.get(key, 0) + 1
    names = [chr(ord("A") + i) for i in range(ncand)]
    ballots = [Ballot(p, n) for p, n in sorted(counts.items())]
    return Election(tuple(names), tuple(ballots), seats)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=Path)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, seats, ncand, nballots, seed in CONTESTS:
        rng = np.random.default_rng(seed)
        while True:
            election = draw_contest(seats, ncand, nballots, rng)
            outcome = tabulate(election)
            if check_first_winner_criterion(outcome) and not outcome.tie_occurred:
                break
        (args.out / f"{name}.txt").write_text(f"# synthetic contest {name}\n" + serialize_election(election))
        print(name, len(election.ballots), "ranking types", election.names(outcome.winners))


if __name__ == "__main__":
    main()
