"""Discrete distributions, total-variation machinery, and grid rounding.

Items are indexed 1..n in all public interfaces; the underlying arrays
are 0-based.  Instances are immutable after construction and safe to
share between concurrent tasks.
"""

import csv
import json
import math
from typing import Iterable, Sequence

import numpy as np

from .errors import DistributionError

# Absolute tolerance on the post-construction sum; construction
# renormalizes, so this only guards against pathological float dust.
SUM_TOLERANCE = 1e-9

# Relative guard applied before flooring so that values sitting on a
# grid boundary up to double-rounding error (0.1 stored as 0.0999...)
# land on the boundary instead of one step below it.
_FLOOR_GUARD = 1e-12


def _as_weight_array(weights: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(weights, dtype=np.float64)
    if arr.ndim != 1:
        raise DistributionError(f"weights must be one-dimensional, got shape {arr.shape}")
    if arr.size < 1:
        raise DistributionError("a distribution needs at least one item")
    for i in np.flatnonzero(~np.isfinite(arr) | (arr < 0.0)):
        raise DistributionError(f"weight at index {int(i) + 1} is invalid: {arr[i]!r}")
    if not arr.any():
        raise DistributionError("all weights are zero; at least one must be positive")
    return arr


class DiscreteDistribution:
    """A normalized probability vector p_1..p_n over items 1..n.

    Arbitrary non-negative finite weights are accepted and divided by
    their sum, so callers may pass unnormalized scores.
    """

    __slots__ = ("_probs", "_cdf")

    def __init__(self, weights: Sequence[float] | np.ndarray):
        arr = _as_weight_array(weights)
        probs = arr / math.fsum(arr.tolist())
        assert abs(math.fsum(probs.tolist()) - 1.0) <= SUM_TOLERANCE
        probs.setflags(write=False)
        object.__setattr__(self, "_probs", probs)
        object.__setattr__(self, "_cdf", None)

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteDistribution is immutable")

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def n(self) -> int:
        return self._probs.size

    def __len__(self) -> int:
        return self._probs.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return self.n == other.n and bool(np.all(self._probs == other._probs))

    def __repr__(self) -> str:
        body = ", ".join(f"{p:.6g}" for p in self._probs[:8])
        tail = ", ..." if self.n > 8 else ""
        return f"DiscreteDistribution([{body}{tail}])"

    def prob(self, item: int) -> float:
        """Probability of item ``item`` (1-based)."""
        if not 1 <= item <= self.n:
            raise DistributionError(f"item {item} outside 1..{self.n}")
        return float(self._probs[item - 1])

    def cumulative(self) -> np.ndarray:
        """Running sums of ``probs`` (cached, used for inverse-CDF sampling)."""
        if self._cdf is None:
            cdf = np.cumsum(self._probs)
            cdf.setflags(write=False)
            object.__setattr__(self, "_cdf", cdf)
        return self._cdf

    def support(self) -> np.ndarray:
        """1-based indices of items with positive probability."""
        return np.flatnonzero(self._probs > 0.0) + 1

    def to_json_dict(self) -> dict:
        return {"probs": [float(p) for p in self._probs]}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DiscreteDistribution":
        if "probs" not in doc:
            raise DistributionError("distribution document must contain 'probs'")
        return cls(doc["probs"])


def make_distribution(weights: Iterable[float]) -> DiscreteDistribution:
    """Normalize non-negative weights into a :class:`DiscreteDistribution`."""
    return DiscreteDistribution(list(weights))


def _check_same_n(p: DiscreteDistribution, q: DiscreteDistribution) -> None:
    if p.n != q.n:
        raise DistributionError(f"dimension mismatch: {p.n} vs {q.n}")


def tv_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Total variation distance, half the L1 gap between the vectors."""
    _check_same_n(p, q)
    return 0.5 * math.fsum(np.abs(p.probs - q.probs).tolist())


def sum_min(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Sum of entrywise minima; equals ``1 - tv_distance(p, q)``."""
    _check_same_n(p, q)
    return math.fsum(np.minimum(p.probs, q.probs).tolist())


def sum_max(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Sum of entrywise maxima; equals ``1 + tv_distance(p, q)``."""
    _check_same_n(p, q)
    return math.fsum(np.maximum(p.probs, q.probs).tolist())


class GridDistribution:
    """A distribution whose probabilities are exact integer multiples of 1/D.

    The integer numerators are authoritative: they sum to the
    denominator exactly, and all message-level arithmetic in the
    low-communication protocol stays on them.
    """

    __slots__ = ("_numerators", "_denominator", "_cum")

    def __init__(self, numerators: Sequence[int] | np.ndarray, denominator: int):
        nums = np.array(numerators, dtype=np.int64)  # copy: freezing must not alias the caller
        if nums.ndim != 1 or nums.size < 1:
            raise DistributionError("numerators must be a non-empty vector")
        if denominator < 1:
            raise DistributionError(f"denominator must be >= 1, got {denominator}")
        if np.any(nums < 0):
            bad = int(np.flatnonzero(nums < 0)[0]) + 1
            raise DistributionError(f"numerator at index {bad} is negative")
        total = int(nums.sum())
        if total != denominator:
            raise DistributionError(
                f"numerators sum to {total}, expected denominator {denominator}"
            )
        nums.setflags(write=False)
        object.__setattr__(self, "_numerators", nums)
        object.__setattr__(self, "_denominator", int(denominator))
        object.__setattr__(self, "_cum", None)

    def __setattr__(self, name, value):
        raise AttributeError("GridDistribution is immutable")

    @property
    def numerators(self) -> np.ndarray:
        return self._numerators

    @property
    def denominator(self) -> int:
        return self._denominator

    @property
    def n(self) -> int:
        return self._numerators.size

    def __len__(self) -> int:
        return self._numerators.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridDistribution):
            return NotImplemented
        return self._denominator == other._denominator and bool(
            np.all(self._numerators == other._numerators)
        )

    def __repr__(self) -> str:
        return f"GridDistribution(denominator={self._denominator}, n={self.n})"

    def cumulative_numerators(self) -> np.ndarray:
        """Running integer sums of the numerators (cached)."""
        if self._cum is None:
            cum = np.cumsum(self._numerators)
            cum.setflags(write=False)
            object.__setattr__(self, "_cum", cum)
        return self._cum

    def to_distribution(self) -> DiscreteDistribution:
        return DiscreteDistribution(self._numerators / self._denominator)

    def tv_to(self, other: "GridDistribution") -> float:
        """TV distance to another grid distribution, in integer arithmetic."""
        if not isinstance(other, GridDistribution):
            raise DistributionError("tv_to expects another GridDistribution")
        if other.n != self.n or other.denominator != self._denominator:
            raise DistributionError("grid distributions must share n and denominator")
        gap = int(np.abs(self._numerators - other._numerators).sum())
        return gap / (2 * self._denominator)

    def to_json_dict(self) -> dict:
        return {
            "numerators": [int(k) for k in self._numerators],
            "denominator": self._denominator,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GridDistribution":
        try:
            return cls(doc["numerators"], doc["denominator"])
        except KeyError as exc:
            raise DistributionError(f"grid document missing key {exc}") from exc


def grid_denominator(n: int, epsilon: float) -> int:
    """Number of grid cells for step ``epsilon / n``.

    Uses a guarded ceiling so the cell width never exceeds epsilon/n
    (which the rounding error bound needs), while exact quotients such
    as 64 / 0.0125 still land on the integer they name.
    """
    if not 0.0 < epsilon < 1.0:
        raise DistributionError(f"epsilon must be in (0, 1), got {epsilon}")
    quotient = n / epsilon
    if quotient > 2**52:
        raise DistributionError(f"grid too fine: n/epsilon = {quotient:.3g}")
    return math.ceil(quotient * (1.0 - _FLOOR_GUARD))


def discretize(p: DiscreteDistribution, epsilon: float) -> GridDistribution:
    """Round ``p`` down onto the grid of step ``epsilon / n``.

    Each probability is floored to the grid, and the leftover mass is
    added back to the first item so the numerators sum exactly to the
    denominator.  The result is within ``epsilon`` of ``p`` in total
    variation.
    """
    d = grid_denominator(p.n, epsilon)
    scaled = p.probs * float(d)
    nums = np.floor(scaled * (1.0 + _FLOOR_GUARD)).astype(np.int64)
    remainder = d - int(nums.sum())
    if remainder < 0:
        raise DistributionError("flooring overshot the grid; input sums above 1")
    nums[0] += remainder
    return GridDistribution(nums, d)


def load_distribution(path: str) -> DiscreteDistribution:
    """Read a distribution from a JSON document or an entry-per-row CSV.

    JSON files carry ``{"probs": [...]}``.  CSV rows hold either a bare
    weight or an explicit ``index,weight`` pair with 1-based indices.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return DiscreteDistribution.from_json_dict(json.loads(text))
    rows = [row for row in csv.reader(text.splitlines()) if row]
    if not rows:
        raise DistributionError(f"no entries found in {path}")
    if len(rows[0]) == 1:
        return DiscreteDistribution([float(row[0]) for row in rows])
    weights = [0.0] * len(rows)
    for row in rows:
        idx = int(row[0])
        if not 1 <= idx <= len(rows):
            raise DistributionError(f"CSV index {idx} outside 1..{len(rows)}")
        weights[idx - 1] = float(row[1])
    return DiscreteDistribution(weights)


def save_distribution(dist: DiscreteDistribution, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dist.to_json_dict(), fh)
        fh.write("\n")
