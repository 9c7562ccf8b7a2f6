"""Bounded-communication coupling over an explicit message channel.

One session: the proposer (Alice) samples from her grid distribution and
sends the item with its grid numerator; the responder (Bob) either
approves (match) or rejects and starts throwing darts at his own
cumulative bar chart, sending each dart's cell and cell base; Alice
approves the first dart that clears her own bar in that cell, which is
exactly a dart landing where Bob's mass exceeds hers.  All decision
comparisons are between one float (the shared uniform scaled by the
grid denominator) and exact integers, so both parties agree on every
boundary.

The full pipeline rounds both inputs onto the epsilon/4 grid, runs a
session on the rounded pair, then each party locally transports its
grid sample back to its true distribution.  The match-rate loss of the
two roundings and two transports totals at most epsilon.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterator

import numpy as np

from . import _kernels
from .distributions import (
    DiscreteDistribution,
    GridDistribution,
    discretize,
    grid_denominator,
    tv_distance,
)
from .errors import DART_ROUND_CAP, DistributionError, PathologicalInput, ProtocolViolation
from .protocols import inverse_cdf_index
from .randomness import SharedRandomSource, child_keys, label_keys


class Party(Enum):
    ALICE = "alice"
    BOB = "bob"


class MessageType(Enum):
    PROPOSE = "propose"
    APPROVE = "approve"
    REJECT = "reject"
    DART = "dart"


@dataclass(frozen=True)
class Message:
    """One logical wire message.

    ``numerator`` carries the proposed item's grid probability for
    PROPOSE and the dart cell's cumulative base for DART; both lie in
    ``[0, D]`` for the session denominator D.
    """

    type: MessageType
    index: int | None = None
    numerator: int | None = None

    def __post_init__(self):
        payload = self.type in (MessageType.PROPOSE, MessageType.DART)
        if payload and (self.index is None or self.numerator is None):
            raise ValueError(f"{self.type.value} message needs index and numerator")
        if not payload and (self.index is not None or self.numerator is not None):
            raise ValueError(f"{self.type.value} message carries no payload")

    def to_json_dict(self, sender: Party) -> dict:
        doc = {"sender": sender.value, "type": self.type.value}
        if self.index is not None:
            doc["index"] = self.index
            doc["numerator"] = self.numerator
        return doc


APPROVE = Message(MessageType.APPROVE)
REJECT = Message(MessageType.REJECT)


def index_bits(n: int) -> int:
    """Bits for an item index: ceil(log2 n)."""
    return (n - 1).bit_length()


def numerator_bits(denominator: int) -> int:
    """Bits for a grid numerator in [0, D]: ceil(log2(D + 1))."""
    return denominator.bit_length()


def encode_message(msg: Message, n: int, denominator: int) -> str:
    """Big-endian bit encoding; verdicts cost one tag bit, payload
    messages are fixed-width (their type is implied by protocol turn)."""
    if msg.type is MessageType.APPROVE:
        return "1"
    if msg.type is MessageType.REJECT:
        return "0"
    ib, nb = index_bits(n), numerator_bits(denominator)
    return format(msg.index - 1, f"0{ib}b") + format(msg.numerator, f"0{nb}b")


@dataclass
class Transcript:
    """Ordered message log of one session, with logical bit accounting."""

    n: int
    denominator: int
    messages: list[tuple[Party, Message]] = field(default_factory=list)
    complete: bool = False

    def record(self, sender: Party, msg: Message) -> None:
        self.messages.append((sender, msg))

    @property
    def message_count(self) -> int:
        return len(self.messages)

    @property
    def dart_rounds(self) -> int:
        return sum(1 for _, m in self.messages if m.type is MessageType.DART)

    @property
    def total_bits(self) -> int:
        return sum(len(encode_message(m, self.n, self.denominator)) for _, m in self.messages)

    def json_lines(self) -> Iterator[str]:
        """One JSON document per message plus a summary trailer."""
        for sender, msg in self.messages:
            yield json.dumps(msg.to_json_dict(sender))
        yield json.dumps({"dart_rounds": self.dart_rounds, "total_bits": self.total_bits})

    def write(self, fh: IO[str]) -> None:
        for line in self.json_lines():
            fh.write(line + "\n")


def bit_cost(transcript: Transcript, n: int, epsilon: float) -> int:
    """Total logical bits of a complete session at tolerance ``epsilon``.

    The session grid has step epsilon/4 over n items, so payload
    messages cost ceil(log2 n) + ceil(log2(D + 1)) bits with
    D = grid_denominator(n, epsilon / 4); verdicts cost one bit.
    """
    if not transcript.complete:
        raise ValueError("transcript is incomplete")
    d = grid_denominator(n, epsilon / 4.0)
    payload = index_bits(n) + numerator_bits(d)
    total = 0
    for _, msg in transcript.messages:
        if msg.type in (MessageType.PROPOSE, MessageType.DART):
            total += payload
        else:
            total += 1
    return total


class AliceEndpoint:
    """Proposer state machine.

    Shared stream layout: position 0 seeds the proposal sample,
    position 1 the responder's acceptance check, positions 1+k the dart
    throws.  ``step(None)`` opens the session; afterwards the incoming
    message drives the transitions.
    """

    def __init__(self, grid: GridDistribution, shared: SharedRandomSource):
        self._grid = grid
        self._shared = shared
        self._cum = grid.cumulative_numerators().astype(np.float64)
        self._phase = "start"
        self._round = 0
        self.result: int | None = None

    def step(self, incoming: Message | None) -> Message | None:
        if self._phase == "start":
            if incoming is not None:
                raise ProtocolViolation("proposer speaks first; unexpected incoming message")
            x = self._shared.uniform_at(0) * float(self._grid.denominator)
            idx = inverse_cdf_index(self._cum, self._grid.numerators, x)
            self.result = idx + 1
            self._phase = "verdict"
            return Message(
                MessageType.PROPOSE, index=idx + 1, numerator=int(self._grid.numerators[idx])
            )
        if self._phase == "verdict":
            if incoming is None or incoming.type not in (MessageType.APPROVE, MessageType.REJECT):
                raise ProtocolViolation("expected a verdict on the proposal")
            if incoming.type is MessageType.APPROVE:
                self._phase = "done"
            else:
                self._phase = "dart"
            return None
        if self._phase == "dart":
            if incoming is None or incoming.type is not MessageType.DART:
                raise ProtocolViolation("expected a dart")
            self._round += 1
            x = self._shared.uniform_at(1 + self._round) * float(self._grid.denominator)
            if x > incoming.numerator + int(self._grid.numerators[incoming.index - 1]):
                self._phase = "done"
                return APPROVE
            return REJECT
        raise ProtocolViolation("session already finished")


class BobEndpoint:
    """Responder state machine.

    Accepts the proposal when the position-1 uniform clears
    ``min(1, q_a / p_a)`` (cross-multiplied against the received
    numerator); otherwise throws darts at its cumulative bar chart,
    one per round, until the proposer approves one.
    """

    def __init__(self, grid: GridDistribution, shared: SharedRandomSource):
        self._grid = grid
        self._shared = shared
        self._cum = grid.cumulative_numerators().astype(np.float64)
        self._phase = "propose"
        self._round = 0
        self._dart_cell: int | None = None
        self.result: int | None = None

    def step(self, incoming: Message | None) -> Message | None:
        if self._phase == "propose":
            if incoming is None or incoming.type is not MessageType.PROPOSE:
                raise ProtocolViolation("expected a proposal")
            u0 = self._shared.uniform_at(1)
            if u0 * incoming.numerator <= int(self._grid.numerators[incoming.index - 1]):
                self.result = incoming.index
                self._phase = "done"
                return APPROVE
            self._phase = "throw"
            return REJECT
        if self._phase == "throw":
            if incoming is not None:
                raise ProtocolViolation("responder throws without input here")
            return self._throw()
        if self._phase == "await-verdict":
            if incoming is None or incoming.type not in (MessageType.APPROVE, MessageType.REJECT):
                raise ProtocolViolation("expected a verdict on the dart")
            if incoming.type is MessageType.APPROVE:
                self.result = self._dart_cell
                self._phase = "done"
                return None
            return self._throw()
        raise ProtocolViolation("session already finished")

    def _throw(self) -> Message:
        self._round += 1
        if self._round > DART_ROUND_CAP:
            raise PathologicalInput(f"dart loop exceeded {DART_ROUND_CAP} rounds")
        x = self._shared.uniform_at(1 + self._round) * float(self._grid.denominator)
        idx = inverse_cdf_index(self._cum, self._grid.numerators, x)
        base = int(self._cum[idx]) - int(self._grid.numerators[idx])
        self._dart_cell = idx + 1
        self._phase = "await-verdict"
        return Message(MessageType.DART, index=idx + 1, numerator=base)


def _session_source(seed: "int | SharedRandomSource") -> SharedRandomSource:
    if isinstance(seed, int):
        return SharedRandomSource(seed, "session")
    return seed


def run_grid_session(
    grid_p: GridDistribution,
    grid_q: GridDistribution,
    seed: "int | SharedRandomSource",
) -> tuple[int, int, Transcript]:
    """Drive one session over an in-process alternating-turn channel."""
    if grid_p.n != grid_q.n:
        raise DistributionError(f"dimension mismatch: {grid_p.n} vs {grid_q.n}")
    if grid_p.denominator != grid_q.denominator:
        raise DistributionError(
            f"grid denominators differ: {grid_p.denominator} vs {grid_q.denominator}"
        )
    shared = _session_source(seed)
    alice = AliceEndpoint(grid_p, shared)
    bob = BobEndpoint(grid_q, shared)
    transcript = Transcript(n=grid_p.n, denominator=grid_p.denominator)

    proposal = alice.step(None)
    transcript.record(Party.ALICE, proposal)
    verdict = bob.step(proposal)
    transcript.record(Party.BOB, verdict)
    if verdict.type is MessageType.REJECT:
        alice.step(verdict)
        dart = bob.step(None)
        while True:
            transcript.record(Party.BOB, dart)
            ruling = alice.step(dart)
            transcript.record(Party.ALICE, ruling)
            reply = bob.step(ruling)
            if ruling.type is MessageType.APPROVE:
                break
            dart = reply
    transcript.complete = True
    return alice.result, bob.result, transcript


@dataclass(frozen=True)
class LowCommResult:
    a: int
    b: int
    a_grid: int
    b_grid: int
    transcript: Transcript


def _grid_probs(grid: GridDistribution) -> np.ndarray:
    """The exact grid rationals k_i / D as floats (no renormalization)."""
    return grid.numerators / float(grid.denominator)


def _correction_residual(
    target: DiscreteDistribution, source_probs: np.ndarray
) -> DiscreteDistribution | None:
    excess = np.maximum(0.0, target.probs - source_probs)
    if not excess.any():
        return None
    return DiscreteDistribution(excess)


def _transport(
    item: int,
    source_probs: np.ndarray,
    target: DiscreteDistribution,
    stream: SharedRandomSource,
) -> int:
    """Locally map a sample of the grid law onto the true law.

    Keeps the item when the position-0 coin clears the acceptance
    ratio, otherwise draws from the excess of the target over the grid
    at position 1.
    """
    idx = item - 1
    coin = stream.uniform_at(0)
    if coin * source_probs[idx] <= target.probs[idx]:
        return item
    residual = _correction_residual(target, source_probs)
    if residual is None:
        return item
    u = stream.uniform_at(1)
    return inverse_cdf_index(residual.cumulative(), residual.probs, u) + 1


def run_lowcomm(
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    epsilon: float,
    seed: "int | SharedRandomSource",
) -> LowCommResult:
    """Full pipeline: round to the epsilon/4 grid, run one session on
    the rounded pair, transport both samples back to the true laws."""
    if p.n != q.n:
        raise DistributionError(f"dimension mismatch: {p.n} vs {q.n}")
    grid_p = discretize(p, epsilon / 4.0)
    grid_q = discretize(q, epsilon / 4.0)
    shared = _session_source(seed)
    a_grid, b_grid, transcript = run_grid_session(grid_p, grid_q, shared)
    a = _transport(a_grid, _grid_probs(grid_p), p, shared.derive("alice-correction"))
    b = _transport(b_grid, _grid_probs(grid_q), q, shared.derive("bob-correction"))
    return LowCommResult(a=a, b=b, a_grid=a_grid, b_grid=b_grid, transcript=transcript)


@dataclass(frozen=True)
class SessionStats:
    """Aggregates over many full-pipeline sessions with derived seeds."""

    sessions: int
    epsilon: float
    denominator: int
    tv: float
    tv_grid: float
    match_rate: float
    grid_match_rate: float
    mean_darts: float
    mean_messages: float
    mean_rounds: float
    mean_bits: float
    marginal_a: np.ndarray
    marginal_b: np.ndarray
    marginal_a_grid: np.ndarray
    marginal_b_grid: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "sessions": self.sessions,
            "epsilon": self.epsilon,
            "denominator": self.denominator,
            "tv": self.tv,
            "tv_grid": self.tv_grid,
            "match_rate": self.match_rate,
            "grid_match_rate": self.grid_match_rate,
            "mean_darts": self.mean_darts,
            "mean_messages": self.mean_messages,
            "mean_rounds": self.mean_rounds,
            "mean_bits": self.mean_bits,
        }


def session_keys(base_seed: int, sessions: int) -> np.ndarray:
    """Per-session stream keys; session t matches
    ``SharedRandomSource(base_seed, "sessions").derive_index(t)``."""
    root = SharedRandomSource(base_seed, "sessions")
    return child_keys(root.key, sessions)


def simulate_sessions(
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    epsilon: float,
    sessions: int,
    base_seed: int,
) -> SessionStats:
    """Run many sessions through the batch kernel and aggregate.

    Equals looping :func:`run_lowcomm` over the derived per-session
    sources; order-independent by construction.
    """
    if sessions < 1:
        raise ValueError("sessions must be >= 1")
    grid_p = discretize(p, epsilon / 4.0)
    grid_q = discretize(q, epsilon / 4.0)
    gp_probs, gq_probs = _grid_probs(grid_p), _grid_probs(grid_q)
    resid_p = _correction_residual(p, gp_probs)
    resid_q = _correction_residual(q, gq_probs)
    keys = session_keys(base_seed, sessions)
    a, b, a_grid, b_grid, darts = _kernels.lowcomm_pair(
        grid_p.numerators,
        grid_q.numerators,
        grid_p.cumulative_numerators().astype(np.float64),
        grid_q.cumulative_numerators().astype(np.float64),
        grid_p.denominator,
        gp_probs,
        gq_probs,
        p.probs,
        q.probs,
        resid_p.probs if resid_p is not None else None,
        resid_p.cumulative() if resid_p is not None else None,
        resid_q.probs if resid_q is not None else None,
        resid_q.cumulative() if resid_q is not None else None,
        keys,
        label_keys(keys, "alice-correction"),
        label_keys(keys, "bob-correction"),
    )
    payload = index_bits(p.n) + numerator_bits(grid_p.denominator)
    bits = (payload + 1) + darts * (payload + 1)
    return SessionStats(
        sessions=sessions,
        epsilon=epsilon,
        denominator=grid_p.denominator,
        tv=tv_distance(p, q),
        tv_grid=grid_p.tv_to(grid_q),
        match_rate=float((a == b).mean()),
        grid_match_rate=float((a_grid == b_grid).mean()),
        mean_darts=float(darts.mean()),
        mean_messages=float((2 + 2 * darts).mean()),
        mean_rounds=float((1 + darts).mean()),
        mean_bits=float(bits.mean()),
        marginal_a=np.bincount(a - 1, minlength=p.n) / sessions,
        marginal_b=np.bincount(b - 1, minlength=q.n) / sessions,
        marginal_a_grid=np.bincount(a_grid - 1, minlength=p.n) / sessions,
        marginal_b_grid=np.bincount(b_grid - 1, minlength=q.n) / sessions,
    )
