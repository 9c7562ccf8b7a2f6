"""Drafter-invariant speculative decoding over toy autoregressive models.

A draft model proposes each next token and the target model samples its
own; matches measure how far ahead drafting could run.  When both sides
sample through a communication-free protocol from a stream keyed by
``(seed, position)``, the target's token is a pure function of the
seed, the target model, and the position, so the emitted sequence never
depends on which drafter ran.  A sequential stream (standard mode)
breaks that: a different drafter shifts downstream randomness.

Toy models are order-1: the next-token distribution depends only on the
last emitted token (a designated start token stands in for the empty
prefix).
"""

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels
from .distributions import DiscreteDistribution, tv_distance
from .errors import DistributionError
from .protocols import (
    ProtocolKind,
    gumbel_sample,
    inverse_cdf_index,
    residual_distribution,
    wmh_sample,
)
from .randomness import SharedRandomSource, child_keys, label_keys, uniforms_at


class GenerationMode(Enum):
    STANDARD = "standard"
    DRAFTER_INVARIANT_GUMBEL = "invariant-gumbel"
    DRAFTER_INVARIANT_WMH = "invariant-wmh"
    NO_DRAFTER = "no-drafter"


_INVARIANT_MODES = {
    ProtocolKind.GUMBEL: GenerationMode.DRAFTER_INVARIANT_GUMBEL,
    ProtocolKind.WEIGHTED_MINHASH: GenerationMode.DRAFTER_INVARIANT_WMH,
}


class ToyLanguageModel:
    """Deterministic map from a token prefix to a next-token law."""

    def __init__(self, vocab_size: int, name: str, start_token: int = 1):
        if vocab_size < 2:
            raise DistributionError(f"vocab_size must be >= 2, got {vocab_size}")
        if not 1 <= start_token <= vocab_size:
            raise DistributionError(f"start_token {start_token} outside 1..{vocab_size}")
        self.vocab_size = vocab_size
        self.name = name
        self.start_token = start_token

    def row_for(self, token: int) -> DiscreteDistribution:
        raise NotImplementedError

    def next_distribution(self, prefix: Sequence[int]) -> DiscreteDistribution:
        for t in prefix:
            if not 1 <= t <= self.vocab_size:
                raise DistributionError(f"token {t} outside 1..{self.vocab_size}")
        last = prefix[-1] if prefix else self.start_token
        return self.row_for(last)

    def materialize(self) -> "MarkovModel":
        """Snapshot the conditional rows into a plain table model."""
        rows = [self.row_for(t) for t in range(1, self.vocab_size + 1)]
        return MarkovModel(rows, name=self.name, start_token=self.start_token)


class MarkovModel(ToyLanguageModel):
    """Order-1 model backed by an explicit row-stochastic table.

    Accepts a square array of weights (rows are normalized) or a list
    of already-built distributions (kept as-is).
    """

    def __init__(self, table, name: str = "markov", start_token: int = 1):
        if isinstance(table, (list, tuple)) and all(
            isinstance(row, DiscreteDistribution) for row in table
        ):
            rows = tuple(table)
            if any(row.n != len(rows) for row in rows):
                raise DistributionError("row lengths must equal the number of rows")
        else:
            arr = np.asarray(table, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise DistributionError(f"table must be square, got shape {arr.shape}")
            rows = tuple(DiscreteDistribution(row) for row in arr)
        super().__init__(len(rows), name, start_token)
        self._rows = rows

    def row_for(self, token: int) -> DiscreteDistribution:
        if not 1 <= token <= self.vocab_size:
            raise DistributionError(f"token {token} outside 1..{self.vocab_size}")
        return self._rows[token - 1]

    def to_json_dict(self) -> dict:
        return {
            "vocab": self.vocab_size,
            "rows": [[float(p) for p in row.probs] for row in self._rows],
            "name": self.name,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MarkovModel":
        if "vocab" not in doc or "rows" not in doc:
            raise DistributionError("model document must contain 'vocab' and 'rows'")
        model = cls(doc["rows"], name=doc.get("name", "markov"))
        if model.vocab_size != doc["vocab"]:
            raise DistributionError(
                f"vocab field {doc['vocab']} does not match {model.vocab_size} rows"
            )
        return model


class PerturbedModel(ToyLanguageModel):
    """A base model with deterministic pseudo-random noise mixed into
    each conditional row (then renormalized).

    With ``noise_scale`` 0 the base rows are returned untouched.
    """

    def __init__(
        self,
        base: ToyLanguageModel,
        noise_scale: float,
        noise_seed: int,
        name: str | None = None,
    ):
        if noise_scale < 0:
            raise DistributionError(f"noise_scale must be >= 0, got {noise_scale}")
        super().__init__(base.vocab_size, name or f"{base.name}+noise", base.start_token)
        self.base = base
        self.noise_scale = noise_scale
        self.noise_seed = noise_seed
        self._cache: dict[int, DiscreteDistribution] = {}

    def row_for(self, token: int) -> DiscreteDistribution:
        if not 1 <= token <= self.vocab_size:
            raise DistributionError(f"token {token} outside 1..{self.vocab_size}")
        base_row = self.base.row_for(token)
        if self.noise_scale == 0:
            return base_row
        cached = self._cache.get(token)
        if cached is None:
            noise = SharedRandomSource(self.noise_seed, f"noise/#{token}").uniform_block(
                0, self.vocab_size
            )
            cached = DiscreteDistribution(base_row.probs + self.noise_scale * noise)
            self._cache[token] = cached
        return cached


def random_markov_model(
    vocab_size: int, seed: int, name: str = "markov", start_token: int = 1
) -> MarkovModel:
    """Rows of normalized i.i.d. exponentials; deterministic in the seed."""
    root = SharedRandomSource(seed, "toy-model")
    rows = []
    for t in range(1, vocab_size + 1):
        u = root.derive(f"row-{t}").uniform_block(0, vocab_size)
        rows.append(-np.log1p(-u))
    return MarkovModel(np.vstack(rows), name=name, start_token=start_token)


def load_model(path: str) -> MarkovModel:
    with open(path, "r", encoding="utf-8") as fh:
        return MarkovModel.from_json_dict(json.load(fh))


def save_model(model: ToyLanguageModel, path: str) -> None:
    table = model if isinstance(model, MarkovModel) else model.materialize()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table.to_json_dict(), fh)
        fh.write("\n")


@dataclass(frozen=True)
class GenerationResult:
    mode: GenerationMode
    tokens: tuple[int, ...]
    draft_tokens: tuple[int, ...] = ()
    accepted: tuple[bool, ...] = ()
    tvs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.mode is GenerationMode.NO_DRAFTER:
            if self.accepted or self.draft_tokens:
                raise ValueError("a drafter-free run carries no acceptance flags")
        elif len(self.accepted) != len(self.tokens):
            raise ValueError("one acceptance flag per emitted token required")


def _generation_source(seed: "int | SharedRandomSource", label: str) -> SharedRandomSource:
    if isinstance(seed, int):
        return SharedRandomSource(seed, label)
    return seed


def _free_sample(row: DiscreteDistribution, src: SharedRandomSource, method: ProtocolKind) -> int:
    if method is ProtocolKind.GUMBEL:
        return gumbel_sample(row, src)
    if method is ProtocolKind.WEIGHTED_MINHASH:
        return wmh_sample(row, src)[0]
    raise ValueError(f"{method} is not communication-free")


def generate_no_drafter(
    target: ToyLanguageModel,
    length: int,
    seed: "int | SharedRandomSource",
    method: ProtocolKind = ProtocolKind.GUMBEL,
) -> GenerationResult:
    """Plain autoregressive sampling from position-keyed streams."""
    if length < 1:
        raise ValueError("length must be >= 1")
    src = _generation_source(seed, "specdec")
    tokens: list[int] = []
    for i in range(length):
        row = target.next_distribution(tokens)
        tokens.append(_free_sample(row, src.derive(f"pos-{i}"), method))
    return GenerationResult(mode=GenerationMode.NO_DRAFTER, tokens=tuple(tokens))


def generate_drafter_invariant(
    target: ToyLanguageModel,
    drafter: ToyLanguageModel,
    length: int,
    seed: "int | SharedRandomSource",
    method: ProtocolKind = ProtocolKind.GUMBEL,
) -> GenerationResult:
    """Both models sample each position from the same position-keyed
    stream via a communication-free protocol; the target token is
    emitted regardless of acceptance, so the sequence matches the
    drafter-free run with the same method exactly."""
    if target.vocab_size != drafter.vocab_size:
        raise DistributionError(
            f"vocab mismatch: {target.vocab_size} vs {drafter.vocab_size}"
        )
    if length < 1:
        raise ValueError("length must be >= 1")
    src = _generation_source(seed, "specdec")
    tokens: list[int] = []
    drafts: list[int] = []
    flags: list[bool] = []
    tvs: list[float] = []
    for i in range(length):
        target_row = target.next_distribution(tokens)
        drafter_row = drafter.next_distribution(tokens)
        pos = src.derive(f"pos-{i}")
        draft = _free_sample(drafter_row, pos, method)
        token = _free_sample(target_row, pos, method)
        tokens.append(token)
        drafts.append(draft)
        flags.append(draft == token)
        tvs.append(tv_distance(drafter_row, target_row))
    return GenerationResult(
        mode=_INVARIANT_MODES[method],
        tokens=tuple(tokens),
        draft_tokens=tuple(drafts),
        accepted=tuple(flags),
        tvs=tuple(tvs),
    )


def generate_standard(
    target: ToyLanguageModel,
    drafter: ToyLanguageModel,
    length: int,
    seed: "int | SharedRandomSource",
) -> GenerationResult:
    """Drafter-dependent baseline: the target verifies each draft token
    through the with-communication coupling, consuming a sequential
    stream whose offsets depend on earlier rejections."""
    if target.vocab_size != drafter.vocab_size:
        raise DistributionError(
            f"vocab mismatch: {target.vocab_size} vs {drafter.vocab_size}"
        )
    if length < 1:
        raise ValueError("length must be >= 1")
    src = _generation_source(seed, "specdec-standard")
    offset = 0
    tokens: list[int] = []
    drafts: list[int] = []
    flags: list[bool] = []
    tvs: list[float] = []
    for _ in range(length):
        p = drafter.next_distribution(tokens)
        q = target.next_distribution(tokens)
        draft0 = inverse_cdf_index(p.cumulative(), p.probs, src.uniform_at(offset))
        coin = src.uniform_at(offset + 1)
        offset += 2
        if coin * p.probs[draft0] <= q.probs[draft0]:
            token0 = draft0
        else:
            residual = residual_distribution(q, p)
            if residual is None:
                token0 = draft0
            else:
                u = src.uniform_at(offset)
                offset += 1
                token0 = inverse_cdf_index(residual.cumulative(), residual.probs, u)
        tokens.append(token0 + 1)
        drafts.append(draft0 + 1)
        flags.append(draft0 == token0)
        tvs.append(tv_distance(p, q))
    return GenerationResult(
        mode=GenerationMode.STANDARD,
        tokens=tuple(tokens),
        draft_tokens=tuple(drafts),
        accepted=tuple(flags),
        tvs=tuple(tvs),
    )


@dataclass(frozen=True)
class AcceptanceReport:
    aggregate: float
    per_position: tuple[float, ...]


def acceptance_report(result: GenerationResult) -> AcceptanceReport:
    """Per-position and aggregate acceptance of one drafted run."""
    if result.mode is GenerationMode.NO_DRAFTER:
        raise ValueError("acceptance requires a drafted run")
    flags = [float(f) for f in result.accepted]
    return AcceptanceReport(
        aggregate=math.fsum(flags) / len(flags), per_position=tuple(flags)
    )


def accepted_run_lengths(accepted: Sequence[bool], window: int) -> list[int]:
    """Longest accepted prefix inside each drafting window of the run."""
    if window < 1:
        raise ValueError("window must be >= 1")
    lengths = []
    for start in range(0, len(accepted), window):
        run = 0
        for flag in accepted[start : start + window]:
            if not flag:
                break
            run += 1
        lengths.append(run)
    return lengths


GENERATION_CSV_HEADER = ("position", "token", "draft_token", "accepted", "tv")


def generation_csv_rows(result: GenerationResult) -> list[tuple]:
    rows = []
    drafted = result.mode is not GenerationMode.NO_DRAFTER
    for i, token in enumerate(result.tokens):
        if drafted:
            rows.append(
                (i, token, result.draft_tokens[i], int(result.accepted[i]), result.tvs[i])
            )
        else:
            rows.append((i, token, "", "", ""))
    return rows


@dataclass(frozen=True)
class SpecdecStats:
    """Monte Carlo aggregates over many generation seeds."""

    mode: GenerationMode
    trials: int
    length: int
    acceptance_per_position: np.ndarray
    mean_acceptance: float
    mean_optimal: float
    mean_bound: float
    first_token_freqs: np.ndarray


def _row_tables(target: ToyLanguageModel, drafter: ToyLanguageModel):
    n = target.vocab_size
    t_rows = [target.row_for(t) for t in range(1, n + 1)]
    d_rows = [drafter.row_for(t) for t in range(1, n + 1)]
    tv_by_state = np.array([tv_distance(d, t) for d, t in zip(d_rows, t_rows)])
    return t_rows, d_rows, tv_by_state


def _single_batch(method: ProtocolKind, row: DiscreteDistribution, keys: np.ndarray) -> np.ndarray:
    if method is ProtocolKind.GUMBEL:
        return _kernels.gumbel_single(row.probs, keys)
    if method is ProtocolKind.WEIGHTED_MINHASH:
        return _kernels.wmh_single(row.probs, keys)[0]
    raise ValueError(f"{method} is not communication-free")


def drafter_invariant_stats(
    target: ToyLanguageModel,
    drafter: ToyLanguageModel,
    length: int,
    trials: int,
    base_seed: int,
    method: ProtocolKind = ProtocolKind.GUMBEL,
) -> SpecdecStats:
    """Batch acceptance statistics for the drafter-invariant mode.

    Trial t matches ``generate_drafter_invariant`` run with the source
    ``SharedRandomSource(base_seed, "specdec-mc").derive_index(t)``.
    """
    root = SharedRandomSource(base_seed, "specdec-mc")
    keys = child_keys(root.key, trials)
    t_rows, d_rows, tv_by_state = _row_tables(target, drafter)
    state = np.full(trials, target.start_token, dtype=np.int64)
    acc = np.zeros(length)
    opt_sum = 0.0
    bound_sum = 0.0
    first_hist = None
    for i in range(length):
        pos_keys = label_keys(keys, f"pos-{i}")
        tokens = np.empty(trials, dtype=np.int64)
        hits = 0
        for s in np.unique(state):
            group = np.flatnonzero(state == s)
            gk = pos_keys[group]
            draft = _single_batch(method, d_rows[s - 1], gk)
            toks = _single_batch(method, t_rows[s - 1], gk)
            hits += int((draft == toks).sum())
            tokens[group] = toks
        acc[i] = hits / trials
        tv_here = tv_by_state[state - 1]
        opt_sum += float((1.0 - tv_here).sum())
        bound_sum += float(((1.0 - tv_here) / (1.0 + tv_here)).sum())
        if i == 0:
            first_hist = np.bincount(tokens - 1, minlength=target.vocab_size) / trials
        state = tokens
    total = trials * length
    return SpecdecStats(
        mode=_INVARIANT_MODES[method],
        trials=trials,
        length=length,
        acceptance_per_position=acc,
        mean_acceptance=float(acc.mean()),
        mean_optimal=opt_sum / total,
        mean_bound=bound_sum / total,
        first_token_freqs=first_hist,
    )


def standard_stats(
    target: ToyLanguageModel,
    drafter: ToyLanguageModel,
    length: int,
    trials: int,
    base_seed: int,
) -> SpecdecStats:
    """Batch acceptance statistics for the standard (drafter-dependent)
    mode; trial t matches ``generate_standard`` with the source
    ``SharedRandomSource(base_seed, "specdec-std-mc").derive_index(t)``."""
    root = SharedRandomSource(base_seed, "specdec-std-mc")
    keys = child_keys(root.key, trials)
    t_rows, d_rows, tv_by_state = _row_tables(target, drafter)
    residuals = [residual_distribution(qr, pr) for pr, qr in zip(d_rows, t_rows)]
    state = np.full(trials, target.start_token, dtype=np.int64)
    offsets = np.zeros(trials, dtype=np.int64)
    acc = np.zeros(length)
    opt_sum = 0.0
    bound_sum = 0.0
    first_hist = None
    for i in range(length):
        tokens = np.empty(trials, dtype=np.int64)
        hits = 0
        for s in np.unique(state):
            group = np.flatnonzero(state == s)
            gk = keys[group]
            p, q = d_rows[s - 1], t_rows[s - 1]
            draft = _kernels.pick_vec(p.cumulative(), p.probs, uniforms_at(gk, offsets[group]))
            coin = uniforms_at(gk, offsets[group] + 1)
            accept = coin * p.probs[draft] <= q.probs[draft]
            toks = draft.copy()
            rejected = np.flatnonzero(~accept)
            if rejected.size and residuals[s - 1] is not None:
                resid = residuals[s - 1]
                ur = uniforms_at(gk[rejected], offsets[group][rejected] + 2)
                toks[rejected] = _kernels.pick_vec(resid.cumulative(), resid.probs, ur)
            offsets[group] += 2 + (~accept)
            hits += int((draft == toks).sum())
            tokens[group] = toks + 1
        acc[i] = hits / trials
        tv_here = tv_by_state[state - 1]
        opt_sum += float((1.0 - tv_here).sum())
        bound_sum += float(((1.0 - tv_here) / (1.0 + tv_here)).sum())
        if i == 0:
            first_hist = np.bincount(tokens - 1, minlength=target.vocab_size) / trials
        state = tokens
    total = trials * length
    return SpecdecStats(
        mode=GenerationMode.STANDARD,
        trials=trials,
        length=length,
        acceptance_per_position=acc,
        mean_acceptance=float(acc.mean()),
        mean_optimal=opt_sum / total,
        mean_bound=bound_sum / total,
        first_token_freqs=first_hist,
    )


def position_pairs(
    target: ToyLanguageModel,
    drafter: ToyLanguageModel,
    length: int,
    seed: "int | SharedRandomSource",
) -> list[tuple[DiscreteDistribution, DiscreteDistribution]]:
    """Per-position (drafter row, target row) pairs along one
    drafter-free target generation; the raw material for collision
    scatter data."""
    result = generate_no_drafter(target, length, seed)
    pairs = []
    prefix: list[int] = []
    for token in result.tokens:
        pairs.append((drafter.next_distribution(prefix), target.next_distribution(prefix)))
        prefix.append(token)
    return pairs
