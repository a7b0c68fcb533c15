import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fslab.content import max_frostman
from fslab.dyadic import GridSet1D
from fslab.inverse import (
    BranchingProfile,
    NonUniform,
    PigeonholeFailure,
    branching_profile,
    good_scale_count,
    inverse_hypothesis_check,
    ladder_length,
    pigeonhole_branching_scale,
    regularize_uniform_subset,
    scale_ladder,
)
from fslab.measures import DeltaMeasure, conditional_entropy, convolve, l2_norm
from fslab.regularity import (
    FROSTMAN_MODE,
    SET_MODE,
    gen_random_cantor,
    gen_self_similar,
    minimal_constant,
)
from fslab.lab import heavy_subset, omega_for


def test_full_set_branches_fully():
    assert branching_profile(GridSet1D.full(6), 2, 3) == BranchingProfile(2, 3, (4, 4, 4))


def test_single_cell_never_branches():
    assert branching_profile(GridSet1D(6, [37]), 3, 2).counts == (1, 1)


@pytest.mark.parametrize("b,m,N", [(3, 2, 5), (4, 4, 3), (1, 3, 4), (5, 3, 3), (2, 1, 8)])
def test_self_similar_profile(b, m, N):
    U, _ = gen_self_similar(b, m, N)
    profile = branching_profile(U, m, N)
    assert profile.counts == (b,) * N
    assert profile.size() == len(U) == b**N


def test_profile_level_mismatch():
    with pytest.raises(ValueError):
        branching_profile(GridSet1D(5, [1]), 2, 3)


def test_non_uniform_report():
    out = branching_profile(GridSet1D(4, [0, 1, 4]), 2, 2)
    assert isinstance(out, NonUniform)
    assert out.distributions[0] == {2: 1}
    assert out.distributions[1] == {1: 1, 2: 1}


def test_regularize_uniform_set_is_identity():
    U, _ = gen_self_similar(3, 2, 4)
    subset, profile, fraction = regularize_uniform_subset(U, 2, 4)
    assert subset == U and fraction == 1 and profile.counts == (3,) * 4


def test_regularize_takes_modal_count_deterministically():
    # children per level-2 ancestor: {2, 2, 1}; modal count 2 wins
    U = GridSet1D(4, [0, 1, 4, 5, 8])
    subset, profile, fraction = regularize_uniform_subset(U, 2, 2)
    assert profile.counts == (2, 2)
    assert subset.cells.tolist() == [0, 1, 4, 5]
    assert fraction == Fraction(4, 5)
    assert regularize_uniform_subset(U, 2, 2)[0] == subset
    # a surplus child is trimmed from the top
    subset, profile, _ = regularize_uniform_subset(GridSet1D(4, [0, 1, 2, 4, 5, 9, 10]), 2, 2)
    assert profile.counts == (3, 2) and subset.cells.tolist() == [0, 1, 4, 5, 9, 10]


def test_regularize_tie_prefers_smaller_count():
    U = GridSet1D(4, [0, 1, 4])
    subset, profile, _ = regularize_uniform_subset(U, 2, 2)
    assert isinstance(branching_profile(subset, 2, 2), BranchingProfile)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 6), (1, 8), (3, 3)]))
def test_regularized_output_is_uniform(seed, shape):
    m, N = shape
    U = gen_random_cantor(m * N, 0.8, seed)
    if len(U) == 0:
        return
    subset, profile, fraction = regularize_uniform_subset(U, m, N)
    assert subset.issubset(U)
    assert branching_profile(subset, m, N) == profile
    assert len(subset) == math.prod(profile.counts)
    assert fraction == Fraction(len(subset), len(U))
    assert fraction >= Fraction(1, 2 ** (m * N))


def test_dirac_hypothesis_holds_at_every_kappa():
    eta1 = DeltaMeasure.uniform(gen_random_cantor(8, 0.8, 3))
    dirac = DeltaMeasure.point(8, 0)
    for kappa in (0.0, 0.1, 1.0):
        holds, lhs, rhs = inverse_hypothesis_check(eta1, dirac, kappa)
        assert holds and lhs == pytest.approx(l2_norm(eta1), rel=1e-12)


def test_uniform_hypothesis_against_direct_sum():
    level = 7
    full = DeltaMeasure.uniform(GridSet1D.full(level))
    holds, lhs, rhs = inverse_hypothesis_check(full, full, 0.25)
    n = 2**level
    direct = math.sqrt(sum((min(k + 1, 2 * n - 1 - k) / n**2) ** 2 for k in range(2 * n - 1)))
    assert lhs == pytest.approx(direct, rel=1e-12)
    assert rhs == pytest.approx(2 ** (-level * 0.25) * n**-0.5, rel=1e-12)
    assert holds


def test_hypothesis_support_checked():
    far = DeltaMeasure.point(3, 20)
    with pytest.raises(ValueError):
        inverse_hypothesis_check(far, DeltaMeasure.point(3, 0), 0.1)


@given(st.integers(0, 2**32 - 1))
def test_kappa_zero_needs_equality(seed):
    eta1 = DeltaMeasure.uniform(gen_random_cantor(7, 0.8, seed) or GridSet1D(7, [1]))
    eta2 = DeltaMeasure.uniform(gen_random_cantor(7, 0.8, seed + 1) or GridSet1D(7, [2]))
    holds, lhs, rhs = inverse_hypothesis_check(eta1, eta2, 0.0)
    assert lhs <= rhs + 1e-12
    if len(eta2) == 1:
        assert holds


def _regular(b, m, N):
    U, mu = gen_self_similar(b, m, N)
    alpha = math.log2(b) / m
    c = max(minimal_constant((U, mu), alpha, SET_MODE),
            minimal_constant((U, mu), alpha, FROSTMAN_MODE))
    return U, mu, alpha, c


def test_full_support_has_all_scales_good():
    U, mu, alpha, c = _regular(16, 4, 3)
    report = good_scale_count(mu, U, 4, 3, 0.9, 1e-9, alpha, c)
    assert report.threshold <= 16
    assert report.good == frozenset(range(3))
    assert report.satisfied


def test_single_cell_has_no_good_scales():
    U, mu, alpha, c = _regular(4, 2, 4)
    cell = U.with_cells(U.cells[:1])
    report = good_scale_count(mu, cell, 2, 4, 0.5, omega_for(mu, cell), alpha, c)
    assert report.good == frozenset()
    assert report.bound <= 0 and report.satisfied


def test_good_scale_precondition_names_witness():
    U = GridSet1D(4, [0, 1, 2, 3])
    mu = DeltaMeasure.uniform(U)
    with pytest.raises(ValueError, match="witness"):
        good_scale_count(mu, U, 2, 2, 0.5, 0.5, 1.0, 1.0)


@pytest.mark.parametrize("seed", range(10))
def test_good_scale_bound_on_heavy_subsets(seed):
    U, mu, alpha, c = _regular(3, 2, 6)
    heavy = heavy_subset(U, seed)
    report = good_scale_count(mu, heavy, 2, 6, 0.3, omega_for(mu, heavy), alpha, c)
    assert report.satisfied
    assert report.stated_bound >= report.bound


def test_ladder():
    assert ladder_length(0.25, 0.5) == 8
    assert scale_ladder(20, 0.25, 8)[0] == 13
    assert all(a >= b for a, b in zip(scale_ladder(20, 0.25, 8), scale_ladder(20, 0.25, 8)[1:]))


def test_uniform_measure_pigeonhole():
    nu = DeltaMeasure.uniform(GridSet1D.full(10))
    out = pigeonhole_branching_scale(nu, 0.25, 0.5, 0.0)
    assert out.chosen_index == int(np.argmax(out.entropies))
    ladder = out.ladder
    for j, h in enumerate(out.entropies):
        gap = ladder[j] - ladder[j + 1]
        assert h == pytest.approx(gap, abs=1e-12)
        if gap:  # rounding can merge neighbouring ladder levels at small depth
            assert h >= out.entropy_threshold
    assert out.frostman_bound_witness == pytest.approx(2.0 ** -(out.fine_scale - out.coarse_scale))


def test_point_mass_is_not_frostman():
    with pytest.raises(PigeonholeFailure):
        pigeonhole_branching_scale(DeltaMeasure.point(10, 5), 0.25, 0.5, 0.0)


@pytest.mark.parametrize("seed", range(12))
def test_pigeonhole_on_frostman_measures(seed):
    S = gen_random_cantor(14, 0.8, seed)
    if len(S) == 0:
        return
    mu, mass = max_frostman(S, Fraction(1, 2))
    nu = mu.as_float().normalized()
    try:
        out = pigeonhole_branching_scale(nu, 0.25, 0.5, 0.0, 1 / float(mass))
    except PigeonholeFailure:
        return
    # non-concentration of the restriction, recomputed directly
    fine = nu.restrict(np.ones(len(nu), bool)).coarsen(out.fine_scale)
    restricted = out.restricted.coarsen(out.fine_scale)
    parents = restricted.cells >> (out.fine_scale - out.coarse_scale)
    for parent in np.unique(parents):
        inside = restricted.weights[parents == parent]
        assert (inside / inside.sum()).max() <= out.frostman_bound_witness + 1e-12
    assert len(fine) >= len(restricted)
    floor = out.tau_bar * nu.level / 2
    assert conditional_entropy(out.first_restriction, out.fine_scale, out.coarse_scale) >= floor - 1e-9
    a = out.tau_bar * nu.level / 4
    worst_case = min(a / m + math.log2(m) for m in np.linspace(1e-3, 1, 2000))
    assert conditional_entropy(out.restricted, out.fine_scale, out.coarse_scale) >= worst_case - 1e-6


def test_convolution_norm_never_grows():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = DeltaMeasure(8, rng.choice(256, 30, replace=False), rng.random(30))
        b = DeltaMeasure(8, rng.choice(256, 10, replace=False), rng.random(10))
        a, b = a.normalized(), b.normalized()
        assert l2_norm(convolve(a, b)) <= l2_norm(a) + 1e-12
