"""Shared test helpers: forced streams and exact rational oracles."""

from fractions import Fraction

import numpy as np
import pytest

from couplekit.analysis import random_pair
from couplekit.distributions import DiscreteDistribution
from couplekit.randomness import SharedRandomSource


class FixedSource:
    """Stream double returning forced values, for hand-traced protocols.

    ``subsources`` maps sublabels to nested FixedSource instances so
    protocol steps that derive party-local streams can be forced too.
    """

    def __init__(self, values, subsources=None):
        self.values = [float(v) for v in values]
        self.subsources = subsources or {}

    def uniform_at(self, k):
        return self.values[k]

    def uniform_block(self, start, count):
        return np.array(self.values[start : start + count])

    def derive(self, sublabel):
        return self.subsources[sublabel]

    def derive_index(self, i):
        return self.subsources[f"#{i}"]


def fractions_of(dist: DiscreteDistribution) -> list[Fraction]:
    return [Fraction(p) for p in dist.probs]


def frac_tv(p, q) -> Fraction:
    return sum(abs(a - b) for a, b in zip(p, q)) / 2


def frac_wmh(p, q) -> Fraction:
    tv = frac_tv(p, q)
    corr = sum(abs(a - b) * min(a, b) for a, b in zip(p, q))
    return (1 - tv + corr) / (1 + tv)


def frac_gumbel(p, q) -> Fraction:
    total = Fraction(0)
    for j in range(len(p)):
        if min(p[j], q[j]) > 0:
            denom = sum(max(pi / p[j], qi / q[j]) for pi, qi in zip(p, q))
            total += Fraction(1) / denom
    return total


GOLDEN_P = DiscreteDistribution([0.5, 0.5, 0.0])
GOLDEN_Q = DiscreteDistribution([1.0, 1.0, 1.0])


@pytest.fixture
def golden_pair():
    """The worked three-item example with tv 1/3."""
    return GOLDEN_P, GOLDEN_Q


def seeded_pairs(count, n_max=32, seed=2024, zero_chance=0.25):
    """Deterministic random pairs for property loops."""
    root = SharedRandomSource(seed, "test-pairs")
    pairs = []
    for t in range(count):
        src = root.derive_index(t)
        n = 2 + int(src.uniform_at(0) * (n_max - 1))
        pairs.append(random_pair(n, src.derive("pair"), zero_chance=zero_chance))
    return pairs
