"""Batch kernels must reproduce the scalar protocols trial for trial,
and the compiled backend must match the NumPy backend bit for bit."""

import importlib.util

import numpy as np
import pytest

from conftest import seeded_pairs
from couplekit import _kernels
from couplekit._kernels import _purepy
from couplekit.analysis import _couple_batch, trial_keys
from couplekit.distributions import discretize, make_distribution
from couplekit.lowcomm import run_lowcomm, run_grid_session, session_keys, simulate_sessions
from couplekit.protocols import ProtocolKind, couple, inverse_cdf_index
from couplekit.randomness import SharedRandomSource, child_keys, label_keys

HAS_NATIVE = importlib.util.find_spec("couplekit._kernels._native") is not None
if HAS_NATIVE:
    from couplekit._kernels import _native

TRIALS = 2000


@pytest.mark.parametrize("kind", list(ProtocolKind))
def test_batch_equals_scalar_loop(kind):
    p = make_distribution([0.2, 0.3, 0.05, 0.45, 0.0])
    q = make_distribution([0.1, 0.1, 0.4, 0.2, 0.2])
    base_seed = 8080
    a, b = _couple_batch(kind, p, q, trial_keys(base_seed, TRIALS))
    root = SharedRandomSource(base_seed, "collision")
    for t in range(0, TRIALS, 17):
        out = couple(kind, p, q, root.derive_index(t))
        assert (out.a, out.b) == (int(a[t]), int(b[t]))


def test_wmh_batch_draw_counts_match_scalar():
    p = make_distribution([1, 2, 3, 4])
    q = make_distribution([4, 3, 2, 1])
    keys = child_keys(123, 500)
    a, b, da, db = _kernels.wmh_pair(p.probs, q.probs, keys)
    root_keys = [int(k) for k in keys]
    for t in range(0, 500, 41):
        src = _KeyedSource(root_keys[t])
        out = couple(ProtocolKind.WEIGHTED_MINHASH, p, q, src)
        assert (out.a, out.b, out.alice_draws, out.bob_draws) == (
            int(a[t]),
            int(b[t]),
            int(da[t]),
            int(db[t]),
        )


class _KeyedSource:
    """Source addressed directly by kernel key (bypasses labels)."""

    def __init__(self, key):
        self.key = key

    def uniform_at(self, k):
        from couplekit.randomness import uniforms_at

        return float(uniforms_at(self.key, k))

    def uniform_block(self, start, count):
        from couplekit.randomness import uniforms_at

        return uniforms_at(self.key, np.arange(start, start + count))

    def derive(self, sublabel):
        from couplekit.randomness import label_key

        return _KeyedSource(label_key(self.key, sublabel))

    def derive_index(self, i):
        from couplekit.randomness import index_key

        return _KeyedSource(index_key(self.key, i))


def test_pick_vec_matches_scalar_pick():
    root = SharedRandomSource(66, "pick")
    for t in range(50):
        src = root.derive_index(t)
        n = 1 + int(src.uniform_at(0) * 20)
        weights = np.where(src.derive("w").uniform_block(0, n) < 0.3, 0.0, 1.0)
        if not weights.any():
            weights[0] = 1.0
        d = make_distribution(weights)
        u = src.derive("u").uniform_block(0, 64)
        vec = _kernels.pick_vec(d.cumulative(), d.probs, u)
        for i in range(64):
            assert int(vec[i]) == inverse_cdf_index(d.cumulative(), d.probs, u[i])


def test_grid_session_batch_equals_scalar_sessions():
    p = make_distribution([0.2, 0.3, 0.05, 0.45])
    q = make_distribution([0.1, 0.1, 0.4, 0.4])
    gp, gq = discretize(p, 0.0125), discretize(q, 0.0125)
    keys = session_keys(2222, 400)
    a, b, darts = _kernels.grid_session_pair(
        gp.numerators,
        gq.numerators,
        gp.cumulative_numerators().astype(np.float64),
        gq.cumulative_numerators().astype(np.float64),
        gp.denominator,
        keys,
    )
    root = SharedRandomSource(2222, "sessions")
    for t in range(0, 400, 23):
        sa, sb, transcript = run_grid_session(gp, gq, root.derive_index(t))
        assert (sa, sb, transcript.dart_rounds) == (int(a[t]), int(b[t]), int(darts[t]))


def test_simulate_sessions_equals_scalar_pipeline():
    p = make_distribution([0.2, 0.3, 0.05, 0.45])
    q = make_distribution([0.1, 0.1, 0.4, 0.4])
    stats = simulate_sessions(p, q, 0.05, 300, 9999)
    root = SharedRandomSource(9999, "sessions")
    matches = grid_matches = darts_total = 0
    for t in range(300):
        r = run_lowcomm(p, q, 0.05, root.derive_index(t))
        matches += r.a == r.b
        grid_matches += r.a_grid == r.b_grid
        darts_total += r.transcript.dart_rounds
    assert stats.match_rate == matches / 300
    assert stats.grid_match_rate == grid_matches / 300
    assert stats.mean_darts == darts_total / 300


@pytest.mark.skipif(not HAS_NATIVE, reason="compiled backend not built")
class TestNativeParity:
    """The compiled backend draws the very same samples as NumPy."""

    def setup_method(self):
        self.keys = child_keys(777, 20_000)

    def _pair(self):
        return seeded_pairs(1, n_max=24, seed=88)[0]

    def test_gumbel(self):
        p, q = self._pair()
        for x, y in zip(
            _purepy.gumbel_pair(p.probs, q.probs, self.keys),
            _native.gumbel_pair(p.probs, q.probs, self.keys),
        ):
            assert np.array_equal(x, y)
        assert np.array_equal(
            _purepy.gumbel_single(p.probs, self.keys),
            _native.gumbel_single(p.probs, self.keys),
        )

    def test_wmh(self):
        p, q = self._pair()
        for x, y in zip(
            _purepy.wmh_pair(p.probs, q.probs, self.keys),
            _native.wmh_pair(p.probs, q.probs, self.keys),
        ):
            assert np.array_equal(x, y)

    def test_optimal(self):
        from couplekit.protocols import residual_distribution

        p, q = self._pair()
        resid = residual_distribution(q, p)
        args = (
            p.probs,
            p.cumulative(),
            q.probs,
            resid.probs if resid else None,
            resid.cumulative() if resid else None,
            self.keys,
            label_keys(self.keys, "bob-residual"),
        )
        for x, y in zip(_purepy.optimal_pair(*args), _native.optimal_pair(*args)):
            assert np.array_equal(x, y)

    def test_grid_session_and_lowcomm(self):
        p, q = self._pair()
        gp, gq = discretize(p, 0.0125), discretize(q, 0.0125)
        base = (
            gp.numerators,
            gq.numerators,
            gp.cumulative_numerators().astype(np.float64),
            gq.cumulative_numerators().astype(np.float64),
            gp.denominator,
        )
        for x, y in zip(
            _purepy.grid_session_pair(*base, self.keys), _native.grid_session_pair(*base, self.keys)
        ):
            assert np.array_equal(x, y)

        from couplekit.lowcomm import _correction_residual, _grid_probs

        gp_probs, gq_probs = _grid_probs(gp), _grid_probs(gq)
        rp = _correction_residual(p, gp_probs)
        rq = _correction_residual(q, gq_probs)
        args = base + (
            gp_probs,
            gq_probs,
            p.probs,
            q.probs,
            rp.probs if rp else None,
            rp.cumulative() if rp else None,
            rq.probs if rq else None,
            rq.cumulative() if rq else None,
            self.keys,
            label_keys(self.keys, "alice-correction"),
            label_keys(self.keys, "bob-correction"),
        )
        for x, y in zip(_purepy.lowcomm_pair(*args), _native.lowcomm_pair(*args)):
            assert np.array_equal(x, y)
