"""Branching structure of dyadic sets and the inverse-theorem side checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from fslab.dyadic import GridSet1D
from fslab.measures import (
    DeltaMeasure,
    aggregate,
    conditional_entropy,
    convolve,
    l2_norm,
)
from fslab.regularity import (
    FROSTMAN_MODE,
    SET_MODE,
    RegularityParams,
    check_regularity,
)

ENTROPY_TOL = 1e-12


@dataclass(frozen=True)
class BranchingProfile:
    base: int  # m: cells split 2^m-fold per stage
    length: int  # N
    counts: tuple

    def __post_init__(self):
        if len(self.counts) != self.length:
            raise ValueError("one count per stage is required")
        top = 1 << self.base
        if any(not 1 <= c <= top for c in self.counts):
            raise ValueError(f"branching counts must lie in [1, {top}]")

    def size(self) -> int:
        return math.prod(self.counts)


@dataclass(frozen=True)
class NonUniform:
    """Per stage, how many ancestors have each child count."""

    distributions: tuple  # one dict {child count: number of ancestors} per stage


def _children_per_ancestor(cells: np.ndarray, m: int, N: int, s: int):
    """Child counts of the level-ms ancestors of the given level-mN cells."""
    children = np.unique(cells >> (m * (N - s - 1)))
    _, counts = np.unique(children >> m, return_counts=True)
    return counts


def _check_levels(U: GridSet1D, m: int, N: int) -> None:
    if m < 1 or N < 0:
        raise ValueError("need m >= 1 and N >= 0")
    if U.level != m * N:
        raise ValueError(f"level mismatch: set level {U.level} != m*N = {m * N}")


def branching_profile(U: GridSet1D, m: int, N: int):
    _check_levels(U, m, N)
    if len(U) == 0:
        raise ValueError("empty set has no branching profile")
    uniform, dists = [], []
    for s in range(N):
        counts = _children_per_ancestor(U.cells, m, N, s)
        values, freq = np.unique(counts, return_counts=True)
        dists.append({int(v): int(f) for v, f in zip(values, freq)})
        uniform.append(int(values[0]) if values.size == 1 else None)
    if all(c is not None for c in uniform):
        return BranchingProfile(m, N, tuple(uniform))
    return NonUniform(tuple(dists))


def regularize_uniform_subset(U: GridSet1D, m: int, N: int):
    """Largest-mode pruning to a subset with exactly uniform branching.

    Stages are processed from the finest to the coarsest, so pruning an
    ancestor never disturbs the stages already made uniform.  At each stage
    the most common child count is kept (smaller count on ties); ancestors
    with fewer children are dropped and the others keep their lowest-index
    children.
    """
    _check_levels(U, m, N)
    if len(U) == 0:
        raise ValueError("empty set")
    leaves = U.cells
    counts_kept = [0] * N
    for s in range(N - 1, -1, -1):
        shift = m * (N - s - 1)
        children = np.unique(leaves >> shift)
        parents = children >> m
        uniq, first, per_parent = np.unique(parents, return_index=True, return_counts=True)
        values, freq = np.unique(per_parent, return_counts=True)
        keep_count = int(values[np.argmax(freq)])  # argmax picks the smallest among ties
        counts_kept[s] = keep_count
        rank = np.arange(children.size) - np.repeat(first, per_parent)
        full = np.repeat(per_parent >= keep_count, per_parent)
        kept_children = children[(rank < keep_count) & full]
        leaves = leaves[np.isin(leaves >> shift, kept_children)]
    subset = U.with_cells(leaves)
    profile = BranchingProfile(m, N, tuple(counts_kept))
    return subset, profile, Fraction(len(subset), len(U))


# --------------------------------------------------------------- hypotheses


def _check_unit_support(mu: DeltaMeasure, name: str) -> None:
    if mu.dim != 1:
        raise ValueError(f"{name} must be a measure on the line")
    bound = 1 << mu.level
    if len(mu) and (mu.cells[0] < -bound or mu.cells[-1] > bound):
        raise ValueError(f"{name} has support outside [-1, 1]")
    if not mu.is_probability():
        raise ValueError(f"{name} must be a probability measure")


def inverse_hypothesis_check(eta1: DeltaMeasure, eta2: DeltaMeasure, kappa: float):
    """Whether ``||eta1 * eta2||_2 >= delta^kappa ||eta1||_2``; returns (holds, lhs, rhs)."""
    _check_unit_support(eta1, "eta1")
    _check_unit_support(eta2, "eta2")
    lhs = l2_norm(convolve(eta1, eta2))
    rhs = 2.0 ** (-eta1.level * float(kappa)) * l2_norm(eta1)
    return lhs >= rhs, lhs, rhs


@dataclass(frozen=True)
class GoodScaleReport:
    good: frozenset
    bound: float
    satisfied: bool
    stated_bound: float  # same bound with the constant 2 in place of 5
    stated_satisfied: bool
    threshold: float
    heaviness: float  # mu_A(U)


def good_scale_count(mu_a: DeltaMeasure, U: GridSet1D, m: int, N: int, rho: float,
                     omega: float, alpha: float, c_alpha: float,
                     scales=None) -> GoodScaleReport:
    """Count the scales s where some level-ms cell holds many level-m(s+1) cells of U.

    A scale is good when that maximum reaches ``2^((1 - rho) alpha m + 3)``.
    The count is compared with ``(1 - omega/(alpha rho) - 5 c_alpha/(alpha rho m)) N``.
    """
    _check_levels(U, m, N)
    if mu_a.level != U.level:
        raise ValueError("measure and set levels differ")
    params = RegularityParams(alpha, c_alpha)
    for mode in (SET_MODE, FROSTMAN_MODE):
        report = check_regularity(mu_a, params, mode, scales)
        if not report.satisfied:
            raise ValueError(f"regularity precondition fails ({mode}): ratio "
                             f"{report.worst_ratio:.6g} > {c_alpha} at witness {report.witness}")
    heaviness = float(mu_a.mass_of(U))
    if heaviness < 2.0 ** (-U.level * omega) * (1 - 1e-12):
        raise ValueError(f"mu_A(U) = {heaviness:.6g} is below delta^omega")
    threshold = 2.0 ** ((1 - rho) * alpha * m + 3)
    good = frozenset(s for s in range(N)
                     if len(U) and _children_per_ancestor(U.cells, m, N, s).max() >= threshold)
    loss = omega / (alpha * rho)
    bound = (1 - (loss + 5 * c_alpha / (alpha * rho * m))) * N
    stated = (1 - (loss + 2 * c_alpha / (alpha * rho * m))) * N
    return GoodScaleReport(good, bound, len(good) >= bound, stated, len(good) >= stated,
                           threshold, heaviness)


# --------------------------------------------------------------- pigeonhole


@dataclass(frozen=True)
class PigeonholeOutcome:
    chosen_index: int
    coarse_scale: int
    fine_scale: int
    restricted: DeltaMeasure
    frostman_bound_witness: float
    ladder: tuple = field(default=())
    entropies: tuple = field(default=())
    entropy_threshold: float = 0.0
    tau_bar: float = 0.0
    target: float = 0.0  # delta^(tau_bar / 4)
    first_restriction: DeltaMeasure | None = None


class PigeonholeFailure(ValueError):
    pass


def ladder_length(epsilon: float, tau: float) -> int:
    """Smallest n >= 1 with 1 / (2 (1 + epsilon)^(n - 1)) <= tau / 4."""
    n = 1
    while 1.0 / (2.0 * (1.0 + epsilon) ** (n - 1)) > tau / 4.0:
        n += 1
    return n


def scale_ladder(level: int, epsilon: float, n: int) -> tuple:
    """Levels of delta_j = delta^((1/2)(1+epsilon)^-(j-1)), j = 0..n, rounded."""
    out = []
    for j in range(n + 1):
        exact = level * 0.5 * (1.0 + epsilon) ** (-(j - 1))
        out.append(min(level, max(0, math.floor(exact + 0.5))))
    return tuple(out)


def _conditional_masses(mu: DeltaMeasure, fine: int, coarse: int):
    """(fine cells, their masses, masses of their coarse parents) as floats."""
    fine_mu = mu.coarsen(fine)
    parents = fine_mu.cells >> (fine - coarse)
    uniq, parent_mass = aggregate(parents, fine_mu.float_weights())
    pos = np.searchsorted(uniq, parents)
    return fine_mu.cells, fine_mu.float_weights(), parent_mass[pos], parents


def pigeonhole_branching_scale(nu: DeltaMeasure, epsilon: float, tau: float, eta: float,
                               frostman_constant: float = 1.0) -> PigeonholeOutcome:
    """Find a scale pair where nu branches, then prune it to non-concentration."""
    if nu.dim != 1 or not nu.is_probability():
        raise ValueError("nu must be a probability measure on the line")
    L = nu.level
    if len(nu) and (nu.cells[0] < 0 or nu.cells[-1] >= 1 << L):
        raise ValueError("nu must live on [0, 1)")
    allowed = frostman_constant * 2.0 ** (L * eta)
    report = check_regularity(nu, RegularityParams(tau, max(1.0, allowed)), FROSTMAN_MODE,
                              [(s, s) for s in range(L + 1)], ball="dyadic")
    if report.worst_ratio > allowed * (1 + 1e-12):
        raise PigeonholeFailure(f"nu is not ({tau}, C delta^-eta)-Frostman: ratio "
                                f"{report.worst_ratio:.6g} at {report.witness}")
    n = ladder_length(epsilon, tau)
    ladder = scale_ladder(L, epsilon, n)
    entropies = tuple(conditional_entropy(nu, ladder[j], ladder[j + 1]) for j in range(n))
    threshold = tau * L / (4 * n)
    j = int(np.argmax(entropies))
    if entropies[j] < threshold - ENTROPY_TOL:
        raise PigeonholeFailure("Frostman precondition too weak at this resolution")
    fine, coarse = ladder[j], ladder[j + 1]
    tau_bar = tau / (4 * n)

    cells, own, parent_mass, parents = _conditional_masses(nu, fine, coarse)
    cond = own / parent_mass
    # entropy of each normalized coarse restriction
    terms = -cond * np.log2(cond)
    coarse_cells, coarse_entropy = aggregate(parents, terms)
    high = coarse_cells[coarse_entropy >= tau_bar * L / 2 - ENTROPY_TOL]
    nu_first_mask = np.isin(nu.cells >> (L - coarse), high)
    if not nu_first_mask.any():
        raise PigeonholeFailure("Frostman precondition too weak at this resolution")
    first = nu.restrict(nu_first_mask).normalized()

    target = 2.0 ** (-tau_bar * L / 4)
    light = cells[np.isin(parents, high) & (cond > 0) & (cond < target)]
    mask = np.isin(nu.cells >> (L - fine), light)
    if not mask.any():
        raise PigeonholeFailure("Frostman precondition too weak at this resolution")
    restricted = nu.restrict(mask).normalized()
    _, r_own, r_parent, _ = _conditional_masses(restricted, fine, coarse)
    witness = float(np.max(r_own / r_parent))
    return PigeonholeOutcome(j, coarse, fine, restricted, witness, ladder, entropies,
                             threshold, tau_bar, target, first)
