import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fslab.dyadic import Direction, GridSet1D
from fslab.measures import (
    DeltaMeasure,
    conditional_entropy,
    convolve,
    entropy,
    l2_norm,
    product_measure,
    push_project,
    restrict_normalize,
    scale_round,
)
from fslab.regularity import gen_random_cantor

from oracles import coarse_masses, convolve_dict, entropy_of


def random_measure(rng, level, n, exact=False, low=0):
    cells = rng.choice(np.arange(low, 1 << level), size=min(n, (1 << level) - low), replace=False)
    if exact:
        raw = [Fraction(int(w)) for w in rng.integers(1, 10, size=len(cells))]
        total = sum(raw)
        weights = [w / total for w in raw]
    else:
        raw = rng.random(len(cells)) + 1e-3
        weights = raw / raw.sum()
    return DeltaMeasure(level, cells, weights)


@st.composite
def measures(draw, level=8, exact=False):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(1, 60))
    return random_measure(np.random.default_rng(seed), level, n, exact)


def test_point_mass_entropy_is_zero():
    assert entropy(DeltaMeasure.point(6, 3), 6) == 0.0


def test_uniform_entropy_counts_bits():
    mu = DeltaMeasure.uniform(GridSet1D.full(5))
    assert entropy(mu, 5) == pytest.approx(5.0, abs=1e-12)


def test_entropy_of_half_quarter_quarter():
    mu = DeltaMeasure(4, [0, 1, 2], [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)])
    assert entropy(mu, 4) == pytest.approx(1.5, abs=1e-15)


def test_entropy_needs_probability():
    with pytest.raises(ValueError):
        entropy(DeltaMeasure(3, [1], [0.5]), 3)


@given(measures(), st.integers(0, 8))
def test_entropy_matches_oracle_and_jensen(mu, target):
    masses = coarse_masses(mu.cells, mu.weights, mu.level - target)
    h = entropy(mu, target)
    assert h == pytest.approx(entropy_of(masses.values()), abs=1e-9)
    assert 0 <= h <= math.log2(len(masses)) + 1e-9


def test_conditional_entropy_same_scale_is_zero():
    mu = random_measure(np.random.default_rng(2), 8, 30)
    assert conditional_entropy(mu, 5, 5) == 0.0


def test_conditional_entropy_of_uniform():
    mu = DeltaMeasure.uniform(GridSet1D.full(6))
    assert conditional_entropy(mu, 6, 0) == pytest.approx(6.0, abs=1e-12)


@given(measures(), st.integers(0, 8), st.integers(0, 8))
def test_chain_rule(mu, a, b):
    coarse, fine = sorted((a, b))
    lhs = conditional_entropy(mu, fine, coarse)
    assert abs(lhs - (entropy(mu, fine) - entropy(mu, coarse))) <= 1e-9


def test_restrict_superset_is_identity():
    mu = random_measure(np.random.default_rng(3), 6, 10, exact=True)
    assert restrict_normalize(mu, GridSet1D.full(6)) == mu


def test_restrict_uniform_to_half():
    mu = DeltaMeasure.uniform(GridSet1D(4, [1, 2, 3, 4]))
    out = restrict_normalize(mu, GridSet1D(4, [2, 4]))
    assert out.cells.tolist() == [2, 4]
    assert list(out.weights) == [Fraction(1, 2), Fraction(1, 2)]


def test_restrict_to_null_set():
    mu = DeltaMeasure.uniform(GridSet1D(4, [1, 2]))
    with pytest.raises(ValueError, match="restriction to null set"):
        restrict_normalize(mu, GridSet1D(4, [7]))


@given(measures(exact=True), st.integers(0, 2**32 - 1))
def test_restrict_preserves_ratios(mu, seed):
    rng = np.random.default_rng(seed)
    S = GridSet1D(mu.level, rng.choice(mu.cells, size=max(1, len(mu) // 2), replace=False))
    out = restrict_normalize(mu, S)
    scale = mu.mass_of(S)
    for c, w in zip(out.cells, out.weights):
        assert w * scale == mu.weight_of(int(c))


def test_restrict_coarser_set():
    mu = DeltaMeasure.uniform(GridSet1D.full(4))
    out = restrict_normalize(mu, GridSet1D(1, [1]))
    assert out.cells.tolist() == list(range(8, 16))


def test_l2_norm_examples():
    assert l2_norm(DeltaMeasure.point(5, 2)) == 1.0
    assert l2_norm(DeltaMeasure.uniform(GridSet1D.full(4))) == pytest.approx(0.25)


def test_l2_norm_of_uniform_is_inverse_root_size():
    A = gen_random_cantor(9, 0.8, 17)
    assert l2_norm(DeltaMeasure.uniform(A)) == pytest.approx(len(A) ** -0.5, rel=1e-12)


def test_convolve_with_dirac():
    nu = random_measure(np.random.default_rng(4), 6, 12, exact=True)
    assert convolve(DeltaMeasure.point(6, 0), nu) == nu


def test_convolve_two_coins():
    coin = DeltaMeasure.uniform(GridSet1D(3, [0, 1]))
    out = convolve(coin, coin)
    assert out.cells.tolist() == [0, 1, 2]
    assert list(out.weights) == [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]


def test_convolve_level_mismatch():
    with pytest.raises(ValueError):
        convolve(DeltaMeasure.point(3, 0), DeltaMeasure.point(4, 0))


@given(measures(level=7, exact=True), measures(level=7, exact=True))
def test_convolution_exact_identities(mu, nu):
    out = convolve(mu, nu)
    assert out == convolve(nu, mu)
    assert out.mass() == mu.mass() * nu.mass()
    expected = convolve_dict(dict(zip(mu.cells.tolist(), mu.weights)),
                             dict(zip(nu.cells.tolist(), nu.weights)))
    assert dict(zip(out.cells.tolist(), out.weights)) == expected


@given(measures(), measures())
def test_young_bound(mu, nu):
    assert l2_norm(convolve(mu, nu)) <= l2_norm(mu) + 1e-12


def test_fft_and_direct_agree():
    rng = np.random.default_rng(5)
    mu = random_measure(rng, 12, 400)
    nu = random_measure(rng, 12, 300)
    a = convolve(mu, nu, method="direct")
    b = convolve(mu, nu, method="fft")
    assert np.array_equal(a.cells, b.cells)
    assert np.max(np.abs(a.weights - b.weights)) <= 1e-10


def test_auto_convolution_picks_fft_for_large_float_supports():
    rng = np.random.default_rng(6)
    mu = random_measure(rng, 12, 1000)
    out = convolve(mu, mu)
    assert out.mass() == pytest.approx(1.0, abs=1e-10)


def test_push_project_theta_zero_is_first_coordinate():
    rng = np.random.default_rng(7)
    cells = rng.integers(0, 32, size=(20, 2))
    mu = DeltaMeasure(5, cells, np.full(20, 1 / 20))
    out = push_project(mu, Direction(0, 0))
    expected = coarse_masses(cells[:, 0], np.full(20, 1 / 20), 0)
    assert dict(zip(out.cells.tolist(), out.weights)) == pytest.approx(expected)


def test_push_project_point_mass():
    mu = DeltaMeasure(6, [[5, 9]], [Fraction(1)])
    out = push_project(mu, Direction(3, 2))
    assert out.cells.tolist() == [5 + (3 * 9) // 4]


@pytest.mark.parametrize("seed", range(50))
def test_push_project_equals_convolution_route(seed):
    rng = np.random.default_rng(seed)
    mu_a = random_measure(rng, 6, int(rng.integers(1, 20)), exact=True)
    mu_b = random_measure(rng, 6, int(rng.integers(1, 20)), exact=True)
    theta = Direction(int(rng.integers(0, 17)), 4)
    lhs = push_project(product_measure(mu_a, mu_b), theta)
    rhs = convolve(mu_a, scale_round(mu_b, theta))
    assert lhs == rhs


def test_measure_validation():
    with pytest.raises(ValueError):
        DeltaMeasure(3, [1, 2], [0.5])
    with pytest.raises(ValueError):
        DeltaMeasure(3, [1], [-0.5])
    mu = DeltaMeasure(3, [1, 1, 2], [Fraction(1, 4), Fraction(1, 4), 0])
    assert mu.cells.tolist() == [1] and mu.weights[0] == Fraction(1, 2)
