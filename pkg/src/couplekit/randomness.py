"""Deterministic, indexable shared-randomness streams.

Two logically separate parties that construct a source from the same
``(seed, stream_label)`` pair observe the exact same stream of uniforms,
and any position in the stream can be read without generating earlier
ones.  That random-access property is load-bearing: the sampling
protocols let both parties scan the *same* indexed stream to different
stopping points, and the decoding simulator keys streams by position.

Construction (stable within a major release)
--------------------------------------------
All arithmetic is on 64-bit unsigned integers with wraparound.

* ``mix64`` is the splitmix64 finalizer (Steele, Lea & Flood's
  SplittableRandom constants).
* A stream key is built by mixing the seed and then absorbing each
  ``/``-separated label segment.  A segment of the form ``#<int>`` is
  absorbed through the integer path (so ``derive_index(i)`` and
  ``derive("#<i>")`` agree); any other segment is absorbed through an
  FNV-1a hash of its UTF-8 bytes.  The two paths are domain-separated
  by distinct constants.
* ``uniform_at(k)`` returns the top 53 bits of
  ``mix64(key + (k + 1) * GOLDEN)`` scaled to ``[0, 1)``.  For a fixed
  key this is exactly the splitmix64 output sequence.

The same formulas are re-implemented in the batch kernels
(:mod:`couplekit._kernels`); golden-value tests pin them together.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

# splitmix64 constants
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_B = 0xBF58476D1CE4E5B9
_MIX_C = 0x94D049BB133111EB

# domain separators for label/index absorption (hex digits of pi)
_LABEL_DOMAIN = 0x452821E638D01377
_INDEX_DOMAIN = 0x243F6A8885A308D3

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_INV_2_53 = 2.0 ** -53

# numpy copies of the constants, pre-cast so array code never mixes dtypes
_U64 = np.uint64
_NP_GOLDEN = _U64(_GOLDEN)
_NP_MIX_B = _U64(_MIX_B)
_NP_MIX_C = _U64(_MIX_C)
_NP_INDEX_DOMAIN = _U64(_INDEX_DOMAIN)
_NP_S30 = _U64(30)
_NP_S27 = _U64(27)
_NP_S31 = _U64(31)
_NP_S11 = _U64(11)


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_B) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_C) & _MASK64
    return z ^ (z >> 31)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    # wraparound is the intended modular arithmetic
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _NP_S30)) * _NP_MIX_B
        z = (z ^ (z >> _NP_S27)) * _NP_MIX_C
    return z ^ (z >> _NP_S31)


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def label_key(key: int, segment: str) -> int:
    """Absorb one textual label segment into a stream key."""
    return mix64(key ^ _LABEL_DOMAIN ^ mix64(_fnv1a(segment.encode("utf-8"))))


def index_key(key: int, i: int) -> int:
    """Absorb one integer label segment into a stream key."""
    if i < 0:
        raise ValueError(f"stream index must be >= 0, got {i}")
    return mix64(key ^ _INDEX_DOMAIN ^ mix64(((i + 1) * _GOLDEN) & _MASK64))


def stream_key(seed: int, stream_label: str) -> int:
    """Stream key for a (seed, label) pair; pure function of its inputs."""
    key = mix64(seed)
    if stream_label:
        for segment in stream_label.split("/"):
            if _is_index_segment(segment):
                key = index_key(key, int(segment[1:]))
            else:
                key = label_key(key, segment)
    return key


def _is_index_segment(segment: str) -> bool:
    return len(segment) > 1 and segment[0] == "#" and segment[1:].isdigit()


def child_keys(key: int, count: int) -> np.ndarray:
    """Vectorized ``index_key(key, i)`` for ``i`` in ``0..count-1``."""
    i = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        mixed = _mix64_np(i * _NP_GOLDEN)
    return _mix64_np(_U64(key) ^ _NP_INDEX_DOMAIN ^ mixed)


def label_keys(keys: np.ndarray, segment: str) -> np.ndarray:
    """Vectorized ``label_key`` over an array of parent keys."""
    mixed = _U64(_LABEL_DOMAIN ^ mix64(_fnv1a(segment.encode("utf-8"))))
    return _mix64_np(keys.astype(np.uint64) ^ mixed)


def uniforms_at(keys, indices) -> np.ndarray:
    """Vectorized ``uniform_at``: keys and indices broadcast elementwise."""
    keys = np.asarray(keys, dtype=np.uint64)
    indices = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        counter = keys + (indices + _U64(1)) * _NP_GOLDEN
    return (_mix64_np(counter) >> _NP_S11) * _INV_2_53


class SharedRandomSource:
    """A seeded, indexable stream of uniforms on ``[0, 1)``.

    Sources are immutable; ``uniform_at`` is a pure function of
    ``(seed, stream_label, k)``, so they are safe to share across
    concurrent tasks.
    """

    __slots__ = ("seed", "stream_label", "_key")

    def __init__(self, seed: int, stream_label: str = ""):
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise TypeError(f"seed must be an int, got {type(seed).__name__}")
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "stream_label", stream_label)
        object.__setattr__(self, "_key", stream_key(seed, stream_label))

    def __setattr__(self, name, value):
        raise AttributeError("SharedRandomSource is immutable")

    def __repr__(self) -> str:
        return f"SharedRandomSource(seed={self.seed}, stream_label={self.stream_label!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, SharedRandomSource):
            return NotImplemented
        return self.seed == other.seed and self.stream_label == other.stream_label

    def __hash__(self) -> int:
        return hash((self.seed, self.stream_label))

    @property
    def key(self) -> int:
        """The mixed 64-bit stream key (consumed by the batch kernels)."""
        return self._key

    def uniform_at(self, k: int) -> float:
        """The k-th uniform of the stream, computable in O(1) for any k."""
        if k < 0:
            raise ValueError(f"stream position must be >= 0, got {k}")
        bits = mix64((self._key + (k + 1) * _GOLDEN) & _MASK64)
        return (bits >> 11) * _INV_2_53

    def uniform_block(self, start: int, count: int) -> np.ndarray:
        """Uniforms at positions ``start .. start+count-1`` as a float64 array."""
        if start < 0 or count < 0:
            raise ValueError("block bounds must be non-negative")
        positions = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            counter = _U64(self._key) + positions * _NP_GOLDEN
        return (_mix64_np(counter) >> _NP_S11) * _INV_2_53

    def derive(self, sublabel: str) -> "SharedRandomSource":
        """A child source statistically independent of the parent and of
        siblings derived under different sublabels."""
        if "/" in sublabel:
            raise ValueError("sublabel must not contain '/'")
        if not sublabel:
            raise ValueError("sublabel must be non-empty")
        label = f"{self.stream_label}/{sublabel}" if self.stream_label else sublabel
        return SharedRandomSource(self.seed, label)

    def derive_index(self, i: int) -> "SharedRandomSource":
        """Child source for integer-keyed fan-out (trial or position ids)."""
        if i < 0:
            raise ValueError(f"child index must be >= 0, got {i}")
        return self.derive(f"#{i}")
