"""ALPHA supermartingale risk measurement and simulated sample-size estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .assertions import Assorter
from .ballots import Election


@dataclass(frozen=True)
class AsnParams:
    risk_limit: float = 0.05
    error_rate: float = 0.002
    reps: int = 20
    seed: int = 12345
    max_sample: int = 2500
    alpha_d: float = 100.0
    alpha_eps: Optional[float] = None  # None: u / (2 * population)

    def __post_init__(self):
        if not 0 < self.risk_limit < 1:
            raise ValueError("risk limit must lie in (0, 1)")
        if not 0 <= self.error_rate < 1:
            raise ValueError("error rate must lie in [0, 1)")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.max_sample < 1:
            raise ValueError("max sample must be at least 1")
        if self.alpha_d <= 0:
            raise ValueError("alpha_d must be positive")


@dataclass(frozen=True)
class AsnEstimate:
    value: Optional[int]
    per_rep: tuple = ()
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.value is not None

    def __lt__(self, other: "AsnEstimate") -> bool:
        return _order(self) < _order(other)

    def __str__(self) -> str:
        return "INFEASIBLE" if self.value is None else str(self.value)


def _order(est: AsnEstimate) -> float:
    return math.inf if est.value is None else est.value


INFEASIBLE = AsnEstimate(None, reason="infeasible")


def alpha_martingale(
    samples,
    u: float,
    population: int,
    eta0: float,
    params: AsnParams = AsnParams(),
) -> np.ndarray:
    """Running p-values of the ALPHA test of H0: population mean <= 1/2.

    Samples are draws without replacement from a population of values in
    ``[0, u]``; the alternative is estimated by shrink-trunc toward ``eta0``.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        return np.ones(0)
    if np.any(x < 0) or np.any(x > u):
        raise ValueError(f"sample values must lie in [0, {u}]")
    if len(x) > population:
        raise ValueError("more draws than population without replacement")
    if not 0 < eta0 <= u:
        raise ValueError("eta0 must lie in (0, u]")
    return _p_values(x[np.newaxis, :], u, population, eta0, params)[0]


def _p_values(x: np.ndarray, u: float, population: int, eta0: float, params: AsnParams) -> np.ndarray:
    """Row-wise ALPHA p-value sequences for a (reps, draws) array."""
    d = params.alpha_d
    eps = params.alpha_eps if params.alpha_eps is not None else u / (2 * population)
    n = x.shape[1]
    j = np.arange(1, n + 1)
    S = np.cumsum(x, axis=1) - x
    mu = (population * 0.5 - S) / (population - j + 1)
    eta = np.minimum(u - eps, np.maximum(mu + eps, (d * eta0 + S) / (d + j - 1)))

    def first_index(mask):
        return np.where(mask.any(axis=1), mask.argmax(axis=1), n)

    # mu <= 0: null already impossible, p drops to 0; mu >= u: null can no longer be rejected
    stop_dead = first_index(mu <= 0)
    stop_frozen = first_index(mu >= u)
    stop = np.minimum(stop_dead, stop_frozen)[:, np.newaxis]
    live = (j - 1) < stop
    with np.errstate(all="ignore"):
        factor = (x * eta / mu + (u - x) * (u - eta) / (u - mu)) / u
        T = np.cumprod(np.where(live, factor, 1.0), axis=1)
        p = np.minimum(1.0, 1.0 / T)
    killed = ((j - 1) >= stop_dead[:, np.newaxis]) & (stop_dead < stop_frozen)[:, np.newaxis]
    p[killed] = 0.0
    return p


def _population_index(counts: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(len(counts)), counts)


def rep_rng(seed: int, rep: int, digest: int) -> np.random.Generator:
    entropy = [seed & 0xFFFFFFFFFFFFFFFF, rep, digest >> 32, digest & 0xFFFFFFFF]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def estimate_asn(assorter: Assorter, election: Election, params: AsnParams = AsnParams()) -> AsnEstimate:
    """Average simulated sample size for the assorter to reach the risk limit.

    Each repetition shuffles the ballot population, injects one-vote
    overstatements at ``params.error_rate``, and walks the draws until the
    ALPHA p-value falls to the risk limit. A repetition that needs more than
    ``min(max_sample, population)`` draws makes the whole estimate infeasible.
    """
    if assorter.margin <= 0:
        return AsnEstimate(None, reason="non-positive margin")
    population = election.total_ballots
    limit = min(params.max_sample, population)
    u = float(assorter.upper_bound)
    g_lo = float(assorter.g_lo)
    scale = float(assorter.scale)
    eta0 = min(float(assorter.reported_mean), u)
    raw = assorter.raw_array
    index = _population_index(assorter.count_array)
    digest = assorter.assertion.digest

    def draws(rep):
        rng = rep_rng(params.seed, rep, digest)
        g = raw[index[rng.permutation(population)[:limit]]]
        if params.error_rate > 0:
            errors = rng.random(limit) < params.error_rate
            g = np.where(errors, np.maximum(g_lo, g - 1.0), g)
        return np.clip((g - g_lo) / scale, 0.0, u)

    sizes = []
    # the first repetition alone settles most infeasible assertions cheaply
    for batch in ([0], range(1, params.reps)):
        if not batch:
            continue
        x = np.stack([draws(rep) for rep in batch])
        for first_hit in _first_hits(x, u, population, eta0, params):
            if first_hit < 0:
                return AsnEstimate(None, tuple(sizes), reason=f"risk limit not met within {limit} draws")
            sizes.append(first_hit + 1)
    return AsnEstimate(math.ceil(sum(sizes) / len(sizes)), tuple(sizes))


def _first_hits(x: np.ndarray, u, population, eta0, params) -> list:
    """Index of the first draw with p <= risk limit, per row (-1 if never).

    The recurrence is causal, so it is evaluated on growing prefixes and only
    rows that have not yet crossed are extended.
    """
    n = x.shape[1]
    result = [-1] * x.shape[0]
    pending = np.arange(x.shape[0])
    length = min(n, 256)
    while True:
        hit = _p_values(x[pending, :length], u, population, eta0, params) <= params.risk_limit
        crossed = hit.any(axis=1)
        for row, idx in zip(pending[crossed], hit[crossed].argmax(axis=1)):
            result[row] = int(idx)
        pending = pending[~crossed]
        if pending.size == 0 or length == n:
            return result
        length = min(n, length * 4)


def asn_of_set(estimates: Iterable[AsnEstimate]) -> AsnEstimate:
    estimates = list(estimates)
    if not estimates:
        return AsnEstimate(0)
    for e in estimates:
        if not e.feasible:
            return AsnEstimate(None, reason=e.reason or "member infeasible")
    return AsnEstimate(max(e.value for e in estimates))
