"""Exact collision formulas against rational oracles, bounds, and the
adversarial family."""

import logging
import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import frac_gumbel, frac_tv, frac_wmh, fractions_of, seeded_pairs
from couplekit.analysis import (
    CollisionReport,
    MonteCarloEstimate,
    adversarial_family,
    collision_report,
    exact_collision_gumbel,
    exact_collision_wmh,
    log_strictness_gap,
    monte_carlo_collision,
    random_pair,
    worst_case_bound,
)
from couplekit.distributions import DiscreteDistribution, make_distribution, tv_distance
from couplekit.errors import DistributionError
from couplekit.protocols import ProtocolKind
from couplekit.randomness import SharedRandomSource

TOL = 1e-12


# --- dart-scan formula -----------------------------------------------------


def test_wmh_identical_distributions(golden_pair):
    p, _ = golden_pair
    assert exact_collision_wmh(p, p) == pytest.approx(1.0, abs=TOL)


def test_wmh_golden_pair_is_seven_twelfths(golden_pair):
    assert abs(exact_collision_wmh(*golden_pair) - 7 / 12) <= TOL


def test_wmh_disjoint_supports():
    assert exact_collision_wmh(make_distribution([1, 0]), make_distribution([0, 1])) == 0.0


# --- exponential-race formula ----------------------------------------------


def test_gumbel_golden_pair_is_two_thirds(golden_pair):
    assert abs(exact_collision_gumbel(*golden_pair) - 2 / 3) <= TOL


def test_gumbel_equals_optimal_for_two_items():
    # worked instance plus random pairs
    p = make_distribution([0.25, 0.75])
    q = make_distribution([0.5, 0.5])
    assert abs(exact_collision_gumbel(p, q) - 0.75) <= TOL
    for p, q in seeded_pairs(100, n_max=2, seed=20, zero_chance=0.0):
        assert abs(exact_collision_gumbel(p, q) - (1 - tv_distance(p, q))) <= TOL


def test_gumbel_uniform_subsets_give_jaccard():
    root = SharedRandomSource(30, "subsets")
    universe = 32
    for t in range(50):
        src = root.derive_index(t)
        mask_a = src.derive("a").uniform_block(0, universe) < 0.4
        mask_b = src.derive("b").uniform_block(0, universe) < 0.4
        mask_a[0] = True
        mask_b[universe - 1] = True
        ua = make_distribution(mask_a.astype(float))
        ub = make_distribution(mask_b.astype(float))
        jaccard = (mask_a & mask_b).sum() / (mask_a | mask_b).sum()
        assert abs(exact_collision_gumbel(ua, ub) - jaccard) <= TOL


def test_exact_formulas_match_rational_oracles():
    for p, q in seeded_pairs(40, n_max=4, seed=40):
        pf, qf = fractions_of(p), fractions_of(q)
        assert abs(tv_distance(p, q) - float(frac_tv(pf, qf))) <= TOL
        assert abs(exact_collision_wmh(p, q) - float(frac_wmh(pf, qf))) <= TOL
        assert abs(exact_collision_gumbel(p, q) - float(frac_gumbel(pf, qf))) <= TOL


# --- bounds and report ------------------------------------------------------


def test_worst_case_bound_values(golden_pair):
    p, q = golden_pair
    assert worst_case_bound(p, p) == 1.0
    assert abs(worst_case_bound(p, q) - 0.5) <= TOL
    disjoint = make_distribution([1, 0]), make_distribution([0, 1])
    assert worst_case_bound(*disjoint) == 0.0


def test_collision_report_golden_values(golden_pair):
    rep = collision_report(*golden_pair)
    expected = (1 / 3, 1 / 2, 7 / 12, 2 / 3, 2 / 3)
    for got, want in zip(rep.to_csv_row(), expected):
        assert abs(got - want) <= TOL


def test_collision_report_identical_pair(golden_pair):
    p, _ = golden_pair
    rep = collision_report(p, p)
    assert rep.to_csv_row() == (0.0, 1.0, 1.0, 1.0, 1.0)


def test_collision_report_rejects_bad_ordering():
    with pytest.raises(ValueError):
        CollisionReport(
            tv=0.5, worst_case_bound=0.9, exact_wmh=0.5, exact_gumbel=0.6, exact_optimal=0.7
        )


def test_pareto_dominance_and_sandwich():
    for p, q in seeded_pairs(300, seed=50):
        rep = collision_report(p, q)
        assert rep.worst_case_bound <= rep.exact_wmh + TOL
        assert rep.exact_wmh <= rep.exact_gumbel + TOL
        assert rep.exact_gumbel <= 1.0 - rep.tv + TOL


def test_strictness_logged_not_fatal(caplog):
    # a pair with three differing entries where the race and the dart
    # scan tie exactly; the gap check must log, not raise
    p = make_distribution([0.5, 0.5, 0.0, 0.0])
    q = make_distribution([0.0, 0.5, 0.25, 0.25])
    with caplog.at_level(logging.WARNING, logger="couplekit.analysis"):
        gap = log_strictness_gap(p, q)
    assert abs(gap) <= TOL
    assert any("strict improvement" in rec.message for rec in caplog.records)


def test_strict_improvement_on_golden_pair(golden_pair):
    assert log_strictness_gap(*golden_pair) > TOL


# --- Monte Carlo ------------------------------------------------------------


def test_monte_carlo_identical_pair_is_certain(golden_pair):
    p, _ = golden_pair
    est = monte_carlo_collision(ProtocolKind.GUMBEL, p, p, 2000, 1)
    assert est.estimate == 1.0
    assert est.std_error == 0.0


def test_monte_carlo_deterministic_in_seed(golden_pair):
    p, q = golden_pair
    est1 = monte_carlo_collision(ProtocolKind.WEIGHTED_MINHASH, p, q, 5000, 7)
    est2 = monte_carlo_collision(ProtocolKind.WEIGHTED_MINHASH, p, q, 5000, 7)
    est3 = monte_carlo_collision(ProtocolKind.WEIGHTED_MINHASH, p, q, 5000, 8)
    assert est1 == est2
    assert est1 != est3


def test_monte_carlo_estimate_validation():
    with pytest.raises(ValueError):
        MonteCarloEstimate(estimate=0.5, trials=100, std_error=0.4)
    with pytest.raises(ValueError):
        MonteCarloEstimate(estimate=0.5, trials=0, std_error=0.05)


def test_monte_carlo_tracks_exact_formula(golden_pair):
    p, q = golden_pair
    trials = 50_000
    for kind, exact in [
        (ProtocolKind.OPTIMAL_COUPLING, 2 / 3),
        (ProtocolKind.WEIGHTED_MINHASH, 7 / 12),
        (ProtocolKind.GUMBEL, 2 / 3),
    ]:
        est = monte_carlo_collision(kind, p, q, trials, 2718)
        assert abs(est.estimate - exact) <= 3 * est.std_error


# --- adversarial family -----------------------------------------------------


def test_family_d2_is_the_three_element_warmup():
    family = adversarial_family(2)
    rows = [tuple(dist.probs) for dist in family]
    assert rows == [(0.0, 0.5, 0.5), (0.5, 0.0, 0.5), (0.5, 0.5, 0.0)]


def test_family_pairwise_tv_is_exactly_one_over_d():
    for d in range(2, 11):
        family = adversarial_family(d)
        assert len(family) == d + 1
        for i in range(d + 1):
            for j in range(i + 1, d + 1):
                assert tv_distance(family[i], family[j]) == 1.0 / d


def test_family_saturates_the_bound():
    for d in range(2, 11):
        family = adversarial_family(d)
        bound = (1 - 1 / d) / (1 + 1 / d)
        gumbel = [
            exact_collision_gumbel(family[i], family[j])
            for i in range(d + 1)
            for j in range(i + 1, d + 1)
        ]
        wmh = [
            exact_collision_wmh(family[i], family[j])
            for i in range(d + 1)
            for j in range(i + 1, d + 1)
        ]
        assert min(gumbel) <= bound + TOL
        assert min(wmh) <= bound + TOL


def test_family_rejects_small_d():
    with pytest.raises(ValueError):
        adversarial_family(1)


# --- random generators ------------------------------------------------------


def test_random_pair_is_deterministic_and_valid():
    src = SharedRandomSource(13, "pairgen")
    p1, q1 = random_pair(16, src)
    p2, q2 = random_pair(16, src)
    assert p1 == p2 and q1 == q2
    assert p1.n == q1.n == 16


def test_random_pair_produces_zero_support_cases():
    zeroed = 0
    root = SharedRandomSource(14, "pairgen")
    for t in range(200):
        p, q = random_pair(12, root.derive_index(t))
        if (p.probs == 0).any() or (q.probs == 0).any():
            zeroed += 1
    assert zeroed > 20
