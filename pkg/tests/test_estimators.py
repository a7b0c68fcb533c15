from fractions import Fraction

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from fslab.dyadic import GridSet1D
from fslab.estimators import (
    BoxCountingDimension,
    DirectionScan,
    DyadicFrostman,
    UniformBranchingSelector,
)
from fslab.regularity import gen_random_cantor, gen_self_similar


def test_box_counting_on_self_similar_set():
    S, _ = gen_self_similar(4, 4, 4)
    est = BoxCountingDimension(ladder=[0, 4, 8, 12, 16]).fit(S)
    assert est.dimension_ == pytest.approx(0.5, abs=1e-9)
    assert est.counts_ == [1, 4, 16, 64, 256]


def test_raw_cells_need_a_level():
    with pytest.raises(ValueError):
        BoxCountingDimension().fit(np.arange(8))
    est = BoxCountingDimension(level=3).fit(np.arange(8))
    assert est.dimension_ == pytest.approx(1.0)


def test_params_round_trip_through_clone():
    est = DyadicFrostman(tau=Fraction(1, 3))
    assert clone(est).get_params() == {"tau": Fraction(1, 3), "exact": None, "level": None}


def test_frostman_transform():
    S = gen_random_cantor(8, 0.8, 2)
    est = DyadicFrostman(tau=0.5).fit(S)
    assert est.mass_ == est.content_.value
    weights = est.transform(S)
    assert weights.sum() == pytest.approx(1.0)
    assert (weights > 0).all()
    outside = GridSet1D(8, [int(c) for c in range(256) if c not in set(S.cells.tolist())][:3])
    assert (est.transform(outside) == 0).all()


def test_unfitted_transform_raises():
    with pytest.raises(NotFittedError):
        DyadicFrostman().transform(GridSet1D(2, [1]))


def test_branching_selector():
    U = gen_random_cantor(12, 0.8, 4)
    sel = UniformBranchingSelector(m=2, n_stages=6).fit(U)
    assert sel.transform(U) == sel.subset_
    assert sel.profile_.size() == len(sel.subset_)


def test_direction_scan_predict():
    _, mu = gen_self_similar(2, 2, 3)
    scan = DirectionScan(sigma=0.0, eta=50.0, theta_level=3, R=0).fit((mu, mu))
    assert scan.predict(range(8)).all()
    with pytest.raises(TypeError):
        DirectionScan().fit((1, 2))
