"""Scikit-learn style wrappers around the estimation-like procedures.

The inputs are grid sets (or raw integer cell arrays plus a ``level``
parameter) rather than feature matrices; parameters live on the estimator and
fitted quantities carry a trailing underscore.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from fslab.content import dyadic_content, max_frostman
from fslab.dyadic import GridSet1D, covering_number
from fslab.inverse import branching_profile, regularize_uniform_subset
from fslab.lab import dimension_estimate
from fslab.measures import DeltaMeasure
from fslab.projections import ScaleWindow, hm_scan


def as_grid_set(X, level=None) -> GridSet1D:
    if isinstance(X, GridSet1D):
        if level is not None and level != X.level:
            raise ValueError(f"level parameter {level} disagrees with the set level {X.level}")
        return X
    if level is None:
        raise ValueError("raw cell arrays need the level parameter")
    return GridSet1D(level, np.asarray(X, dtype=np.int64).reshape(-1))


class BoxCountingDimension(BaseEstimator):
    def __init__(self, ladder=None, level=None):
        self.ladder = ladder
        self.level = level

    def fit(self, X, y=None):
        S = as_grid_set(X, self.level)
        self.levels_ = list(range(S.level + 1)) if self.ladder is None else list(self.ladder)
        self.counts_ = [covering_number(S, lvl) for lvl in self.levels_]
        self.dimension_ = dimension_estimate(S, self.levels_)
        return self


class DyadicFrostman(TransformerMixin, BaseEstimator):
    """Maximal Frostman measure of a set; ``transform`` returns normalized weights."""

    def __init__(self, tau=0.5, exact=None, level=None):
        self.tau = tau
        self.exact = exact
        self.level = level

    def fit(self, X, y=None):
        S = as_grid_set(X, self.level)
        self.measure_, self.mass_ = max_frostman(S, self.tau, self.exact)
        self.content_ = dyadic_content(S, self.tau, self.exact)
        return self

    def transform(self, X):
        check_is_fitted(self, "measure_")
        S = as_grid_set(X, self.level)
        mu = self.measure_.normalized().as_float()
        pos = np.searchsorted(mu.cells, S.cells)
        pos = np.minimum(pos, len(mu) - 1)
        hit = mu.cells[pos] == S.cells
        return np.where(hit, mu.weights[pos], 0.0)


class UniformBranchingSelector(TransformerMixin, BaseEstimator):
    """Prune a set to exactly uniform base-2^m branching over N stages."""

    def __init__(self, m=2, n_stages=6):
        self.m = m
        self.n_stages = n_stages

    def fit(self, X, y=None):
        S = as_grid_set(X, self.m * self.n_stages)
        self.subset_, self.profile_, self.retained_fraction_ = regularize_uniform_subset(
            S, self.m, self.n_stages)
        self.input_profile_ = branching_profile(S, self.m, self.n_stages)
        return self

    def transform(self, X):
        check_is_fitted(self, "subset_")
        S = as_grid_set(X, self.m * self.n_stages)
        return S.intersection(self.subset_)


class DirectionScan(BaseEstimator):
    """Scan dyadic directions for high-multiplicity mass of a product measure.

    ``fit`` takes the pair ``(mu_a, mu_b)``; ``predict`` flags exceptional
    directions given as numerators over ``2^theta_level``.
    """

    def __init__(self, sigma=0.55, eta=0.05, tau=0.5, theta_level=6, r=None, R=0, jobs=1):
        self.sigma = sigma
        self.eta = eta
        self.tau = tau
        self.theta_level = theta_level
        self.r = r
        self.R = R
        self.jobs = jobs

    def fit(self, X, y=None):
        mu_a, mu_b = X
        if not isinstance(mu_a, DeltaMeasure) or not isinstance(mu_b, DeltaMeasure):
            raise TypeError("DirectionScan.fit expects a pair of line measures")
        r = mu_a.level if self.r is None else self.r
        self.result_ = hm_scan(mu_a, mu_b, self.sigma, self.eta, ScaleWindow(r, self.R),
                               self.theta_level, self.tau, self.jobs)
        self.exceptional_set_ = self.result_.exceptional_set
        self.exceptional_content_ = self.result_.exceptional_content
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        numerators = np.asarray(X, dtype=np.int64).reshape(-1)
        return np.isin(numerators, self.exceptional_set_.cells)
