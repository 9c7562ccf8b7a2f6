"""Single-shot sampling protocols factored into per-party procedures.

The two communication-free procedures (`wmh_sample`, `gumbel_sample`)
take nothing derived from the counterpart's distribution: one party's
distribution plus a shared random source fully determine its sample.
`optimal_coupling` is the with-communication baseline, where the
responder sees the proposer's sample and distribution.

These are the scalar reference implementations; the batch kernels in
:mod:`couplekit._kernels` replicate them trial for trial.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .distributions import DiscreteDistribution, _check_same_n
from .errors import PathologicalInput, WMH_SCAN_CAP
from .randomness import SharedRandomSource


class ProtocolKind(Enum):
    OPTIMAL_COUPLING = "optimal"
    WEIGHTED_MINHASH = "wmh"
    GUMBEL = "gumbel"


@dataclass(frozen=True)
class CouplingOutcome:
    """One coupled draw: both parties' items plus stream consumption."""

    a: int
    b: int
    matched: bool
    alice_draws: int
    bob_draws: int

    def __post_init__(self):
        if self.matched != (self.a == self.b):
            raise ValueError("matched flag inconsistent with samples")
        if self.a < 1 or self.b < 1:
            raise ValueError("items are 1-based")


def inverse_cdf_index(cdf: np.ndarray, mass: np.ndarray, u: float) -> int:
    """First cell whose running sum exceeds ``u`` (0-based).

    Clamped to the last cell and walked back off zero-mass tail cells,
    mirroring the vectorized kernel helper exactly.
    """
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= cdf.size:
        idx = cdf.size - 1
    while idx > 0 and mass[idx] == 0:
        idx -= 1
    return idx


def gumbel_sample(p: DiscreteDistribution, rand: SharedRandomSource) -> int:
    """Exponential-race sample: the item minimizing -ln(u_i)/p_i.

    Reads exactly ``n`` stream positions (0..n-1).  Items with zero
    probability score +inf and can never win; float ties break toward
    the smallest index, identically for every party on the stream.
    """
    u = rand.uniform_block(0, p.n)
    with np.errstate(divide="ignore"):
        scores = -np.log(u) / p.probs
    scores[p.probs == 0.0] = np.inf
    scores[u == 0.0] = np.inf
    return int(np.argmin(scores)) + 1


def wmh_sample(p: DiscreteDistribution, rand: SharedRandomSource) -> tuple[int, int]:
    """Dart scan over ``[0, n)``: first dart landing under an item's bar.

    Draw k is ``n * uniform_at(k)``; cell j is hit when the dart's
    offset within the cell falls below p_j (half-open on the right).
    Returns ``(item, draws_consumed)``.
    """
    n = p.n
    probs = p.probs
    for k in range(WMH_SCAN_CAP):
        u = rand.uniform_at(k) * float(n)
        cell = min(int(u), n - 1)
        if u - cell < probs[cell]:
            return cell + 1, k + 1
    raise PathologicalInput(f"dart scan exceeded {WMH_SCAN_CAP} draws; mass must not sum to 1")


def residual_distribution(
    target: DiscreteDistribution, source: DiscreteDistribution
) -> DiscreteDistribution | None:
    """The excess of ``target`` over ``source``, renormalized.

    Returns None when the excess is empty (the two laws coincide).
    """
    excess = np.maximum(0.0, target.probs - source.probs)
    if not excess.any():
        return None
    return DiscreteDistribution(excess)


def optimal_coupling(
    p: DiscreteDistribution, q: DiscreteDistribution, rand: SharedRandomSource
) -> CouplingOutcome:
    """With-communication coupling achieving the optimal match rate.

    The proposer samples at stream position 0; the responder keeps the
    proposed item when the position-1 coin clears ``min(1, q_a / p_a)``
    (evaluated cross-multiplied, so no division), otherwise resamples
    from the excess of Q over P using a responder-local derived stream.
    """
    _check_same_n(p, q)
    a0 = inverse_cdf_index(p.cumulative(), p.probs, rand.uniform_at(0))
    p_a = p.probs[a0]
    assert p_a > 0.0, "proposer cannot emit a zero-probability item"
    coin = rand.uniform_at(1)
    bob_draws = 1
    if coin * p_a <= q.probs[a0]:
        b0 = a0
    else:
        residual = residual_distribution(q, p)
        if residual is None:
            b0 = a0
        else:
            bob_draws = 2
            u = rand.derive("bob-residual").uniform_at(0)
            b0 = inverse_cdf_index(residual.cumulative(), residual.probs, u)
    a, b = a0 + 1, b0 + 1
    return CouplingOutcome(a=a, b=b, matched=a == b, alice_draws=1, bob_draws=bob_draws)


def couple(
    kind: ProtocolKind,
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    rand: SharedRandomSource,
) -> CouplingOutcome:
    """Run both parties of the chosen protocol against one shared source."""
    _check_same_n(p, q)
    if kind is ProtocolKind.OPTIMAL_COUPLING:
        return optimal_coupling(p, q, rand)
    if kind is ProtocolKind.WEIGHTED_MINHASH:
        a, draws_a = wmh_sample(p, rand)
        b, draws_b = wmh_sample(q, rand)
        return CouplingOutcome(a=a, b=b, matched=a == b, alice_draws=draws_a, bob_draws=draws_b)
    if kind is ProtocolKind.GUMBEL:
        a = gumbel_sample(p, rand)
        b = gumbel_sample(q, rand)
        return CouplingOutcome(a=a, b=b, matched=a == b, alice_draws=p.n, bob_draws=q.n)
    raise ValueError(f"unknown protocol kind: {kind!r}")
