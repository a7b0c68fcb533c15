"""Experiment configs, runners and CSV/JSON emission for the command line."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from fslab.config import max_level
from fslab.content import dyadic_content, max_frostman
from fslab.dyadic import Direction, GridSet1D, covering_number
from fslab.inverse import (
    PigeonholeFailure,
    branching_profile,
    BranchingProfile,
    good_scale_count,
    inverse_hypothesis_check,
    pigeonhole_branching_scale,
    regularize_uniform_subset,
)
from fslab.measures import DeltaMeasure, conditional_entropy, l2_norm, product_measure
from fslab.projections import (
    ScaleWindow,
    affine_sumset,
    fiber_decomposition_check,
    hm_scan,
    prop3_probe,
)
from fslab.regularity import (
    FROSTMAN_MODE,
    SET_MODE,
    gen_ap_family,
    gen_random_cantor,
    gen_self_similar,
    minimal_constant,
)

log = logging.getLogger(__name__)

KINDS = (
    "ap-counterexample",
    "direction-scan",
    "content-duality",
    "branching-audit",
    "inverse-probe",
    "prop3-probe",
    "generate",
    "dimension",
)
RANDOMIZED = {"content-duality", "branching-audit", "inverse-probe", "prop3-probe"}
GENERATORS = ("self-similar", "cantor", "ap")

COLUMNS = {
    "ap-counterexample": ("n", "kappa", "count", "bound", "slack", "pass"),
    "direction-scan": ("row_type", "theta", "hm_mass", "covering", "dimension_ratio",
                       "exceptional", "exceptional_count", "exceptional_content",
                       "low_fraction", "pass"),
    "content-duality": ("index", "seed", "size", "content", "frostman_mass", "pass"),
    "branching-audit": ("source", "index", "size", "profile", "product", "retained_fraction",
                        "good_scales", "bound", "pass"),
    "inverse-probe": ("index", "seed", "lhs", "norm_eta1", "rhs", "holds", "young_gap",
                      "chosen_index", "coarse_scale", "fine_scale", "witness", "target",
                      "restricted_entropy", "entropy_floor", "pass"),
    "prop3-probe": ("index", "seed", "theta", "lhs", "rhs1", "rhs2", "holds", "c1_min",
                    "c2_min", "pass"),
    "generate": ("cell", "left_endpoint", "weight"),
    "dimension": ("row_type", "level", "covering", "log2_covering", "slope"),
}


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"invalid config field {field_name!r}: {message}")
        self.field_name = field_name


@dataclass
class ExperimentConfig:
    kind: str
    seed: int | None = None
    level: int = 12
    theta_level: int = 8
    sigma: float = 0.55
    eta: float = 0.05
    tau: float = 0.5
    epsilon: float = 0.25
    rho: float = 0.5
    kappa: str = "1/4"
    window_r: int | None = None  # defaults to level
    window_R: int | None = 0
    generator: str = "self-similar"
    branches: int = 4
    contraction: int = 4
    depth: int = 3
    survival: float = 0.75
    count: int = 20
    n_values: tuple = (16, 64, 256)
    multiplicity_M: int = 2
    multiplicity_N: int = 8
    probe_c: float = 1.0
    probe_C: float = 1.0
    probe_R: int = 4
    median_floor: float = 0.58
    low_cut: float = 0.55
    low_fraction: float = 0.10
    jobs: int = 1
    out: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError("kind", f"unknown experiment kind {self.kind!r}")
        top = max_level()
        for name in ("level", "theta_level", "window_r", "probe_R"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= top:
                raise ConfigError(name, f"{value} outside [0, {top}]")
        if self.window_R is not None and not -top <= self.window_R <= top:
            raise ConfigError("window_R", f"{self.window_R} outside [-{top}, {top}]")
        for name in ("sigma", "eta", "tau", "rho"):
            value = getattr(self, name)
            if not 0 < value <= 2:
                raise ConfigError(name, f"exponent {value} outside (0, 2]")
        if not 0 < self.epsilon <= 1:
            raise ConfigError("epsilon", f"{self.epsilon} outside (0, 1]")
        if not 0 < self.survival <= 1:
            raise ConfigError("survival", f"{self.survival} outside (0, 1]")
        try:
            Fraction(self.kappa)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError("kappa", str(exc)) from None
        if self.kind in RANDOMIZED or (self.generator == "cantor"
                                      and self.kind in ("generate", "dimension")):
            if self.seed is None:
                raise ConfigError("seed", f"{self.kind} needs a seed")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        if self.generator not in GENERATORS:
            raise ConfigError("generator", f"unknown generator {self.generator!r}")
        if self.count < 1:
            raise ConfigError("count", "must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs", "must be positive")
        if self.branches < 1 or self.contraction < 1 or self.depth < 0:
            raise ConfigError("branches", "generator parameters must be positive")
        if self.branches > 1 << self.contraction:
            raise ConfigError("branches", "more branches than children")
        return self

    def canonical(self) -> dict:
        """Fields that determine the CSV body (jobs and out do not)."""
        data = asdict(self)
        data.pop("jobs")
        data.pop("out")
        data["n_values"] = list(self.n_values)
        return data

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def config_fields() -> dict:
    return {f.name: f for f in fields(ExperimentConfig)}


def build_config(values: dict) -> ExperimentConfig:
    """Config from a flat mapping; unknown keys are rejected by name."""
    known = config_fields()
    clean = {}
    for key, value in values.items():
        name = key.replace("-", "_")
        if name not in known:
            raise ConfigError(key, "unknown key")
        clean[name] = value
    if "kind" not in clean:
        raise ConfigError("kind", "missing")
    if "n_values" in clean:
        clean["n_values"] = tuple(int(v) for v in clean["n_values"])
    for name in ("seed", "level", "theta_level", "window_r", "window_R", "branches",
                 "contraction", "depth", "count", "jobs", "multiplicity_M",
                 "multiplicity_N", "probe_R"):
        if clean.get(name) is not None:
            value = clean[name]
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(name, f"expected an integer, got {value!r}")
            clean[name] = int(value)
    for name in ("sigma", "eta", "tau", "epsilon", "rho", "survival", "probe_c",
                 "probe_C", "median_floor", "low_cut", "low_fraction"):
        if name in clean:
            try:
                clean[name] = float(clean[name])
            except (TypeError, ValueError):
                raise ConfigError(name, f"expected a number, got {clean[name]!r}") from None
    if "kappa" in clean:
        clean["kappa"] = str(clean["kappa"])
    return ExperimentConfig(**clean).validate()


# ---------------------------------------------------------------- results


@dataclass
class ResultTable:
    kind: str
    columns: tuple
    rows: list
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if "pass" not in self.columns:
            return True
        at = self.columns.index("pass")
        return all(row[at] is not False for row in self.rows)

    def csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\r\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(v) for v in row])
        return buffer.getvalue()

    def write(self, out: str | Path | None) -> None:
        text = self.csv_text()
        if out is None:
            print(text, end="")
            return
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        sidecar = path.with_suffix(path.suffix + ".json")
        sidecar.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def dimension_estimate(S: GridSet1D, ladder=None) -> float:
    """Least-squares slope of log2 of the covering number against the level."""
    ladder = list(range(S.level + 1)) if ladder is None else [int(x) for x in ladder]
    if len(ladder) < 3:
        raise ValueError("dimension_estimate needs at least 3 ladder levels")
    if len(S) == 0:
        raise ValueError("empty set has no dimension")
    counts = [covering_number(S, lvl) for lvl in ladder]
    slope, _ = np.polyfit(np.asarray(ladder, float), np.log2(np.asarray(counts, float)), 1)
    return float(slope)


def _child_seeds(seed: int, count: int) -> list:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)]


def _window(cfg: ExperimentConfig, level: int) -> ScaleWindow:
    r = level if cfg.window_r is None else cfg.window_r
    return ScaleWindow(r, cfg.window_R)


# ---------------------------------------------------------------- runners


def _ap_counterexample(cfg):
    kappa = Fraction(cfg.kappa)
    rows = []
    for n in cfg.n_values:
        A, E = gen_ap_family(n, kappa)
        count = len(affine_sumset(A, E, A, A.level))
        bound = 2 * n * (1 << int(2 * kappa * (n.bit_length() - 1)))
        slack = 0
        if count > bound and count <= bound + 2:
            slack = 2
            log.warning("n=%d: count %d exceeds %d by boundary cells", n, count, bound)
        rows.append((n, cfg.kappa, count, bound, slack, count <= bound + slack))
    return rows


def _direction_scan(cfg):
    support, mu = gen_self_similar(cfg.branches, cfg.contraction, cfg.depth)
    window = _window(cfg, support.level)
    result = hm_scan(mu, mu, cfg.sigma, cfg.eta, window, cfg.theta_level, cfg.tau, cfg.jobs)
    flagged = set(result.exceptional_set.cells.tolist())
    rows = []
    ratios = []
    for row in result.rows:
        ratios.append(row.dimension_ratio)
        rows.append(("direction", str(row.theta.value), row.hm_mass, row.covering,
                     row.dimension_ratio, row.theta.numerator in flagged, None, None, None,
                     None))
    median = float(np.median(ratios))
    low = float(np.mean(np.asarray(ratios) < cfg.low_cut))
    ok = median >= cfg.median_floor and low <= cfg.low_fraction
    # the summary's dimension_ratio is the median over directions
    rows.append(("summary", None, None, None, median, None, len(result.exceptional_set),
                 float(result.exceptional_content), low, ok))
    return rows


def _content_duality(cfg):
    rows = []
    for i, seed in enumerate(_child_seeds(cfg.seed, cfg.count)):
        S = gen_random_cantor(cfg.level, cfg.survival, seed)
        content = dyadic_content(S, cfg.tau)
        if len(S) == 0:
            rows.append((i, seed, 0, float(content), 0.0, content.value == 0))
            continue
        _, mass = max_frostman(S, cfg.tau)
        rows.append((i, seed, len(S), float(content), float(mass), mass == content.value))
    return rows


def _branching_audit(cfg):
    m, N = cfg.contraction, cfg.depth
    rows = []
    for b in range(1, (1 << m) + 1):
        U, mu = gen_self_similar(b, m, N)
        profile = branching_profile(U, m, N)
        uniform = isinstance(profile, BranchingProfile)
        product = profile.size() if uniform else None
        rows.append(("self-similar", b, len(U), _profile_text(profile), product, None,
                     None, None, uniform and product == len(U)))
    for i, seed in enumerate(_child_seeds(cfg.seed, cfg.count)):
        U = gen_random_cantor(m * N, cfg.survival, seed)
        if len(U) == 0:
            continue
        subset, profile, fraction = regularize_uniform_subset(U, m, N)
        check = branching_profile(subset, m, N)
        ok = check == profile and profile.size() == len(subset)
        rows.append(("regularized", i, len(subset), _profile_text(profile), profile.size(),
                     float(fraction), None, None, ok))
    # good scales for heavy random subsets of the self-similar measure
    U, mu = gen_self_similar(cfg.branches, m, N)
    alpha = math.log2(cfg.branches) / m
    c_alpha = max(minimal_constant((U, mu), alpha, SET_MODE),
                  minimal_constant((U, mu), alpha, FROSTMAN_MODE))
    for i, seed in enumerate(_child_seeds(cfg.seed ^ 0x5EED, cfg.count)):
        heavy = heavy_subset(U, seed)
        omega = omega_for(mu, heavy)
        report = good_scale_count(mu, heavy, m, N, cfg.rho, omega, alpha, c_alpha)
        rows.append(("good-scale", i, len(heavy), None, None, None, len(report.good),
                     report.bound, report.satisfied))
    return rows


def heavy_subset(U: GridSet1D, seed: int) -> GridSet1D:
    """A random nonempty subset: each cell kept with a random probability."""
    rng = np.random.default_rng(seed)
    keep = rng.random(len(U)) < rng.uniform(0.05, 1.0)
    if not keep.any():
        keep[rng.integers(len(U))] = True
    return U.with_cells(U.cells[keep])


def omega_for(mu: DeltaMeasure, U: GridSet1D) -> float:
    """Smallest omega with mu(U) >= delta^omega, nudged up for rounding."""
    mass = float(mu.mass_of(U))
    return -math.log2(mass) / U.level + 1e-12 if U.level else 0.0


def _profile_text(profile) -> str:
    if isinstance(profile, BranchingProfile):
        return ";".join(str(c) for c in profile.counts)
    return "non-uniform"


def _inverse_probe(cfg):
    kappa = float(Fraction(cfg.kappa))
    rows = []
    for i, seed in enumerate(_child_seeds(cfg.seed, cfg.count)):
        S = gen_random_cantor(cfg.level, cfg.survival, seed)
        T = gen_random_cantor(cfg.level, cfg.survival, seed ^ 0xA5A5)
        if len(S) == 0 or len(T) == 0:
            continue
        frostman, mass = max_frostman(S, cfg.tau)
        eta1 = frostman.as_float().normalized()
        eta2 = DeltaMeasure.uniform(T, exact=False)
        holds, lhs, rhs = inverse_hypothesis_check(eta1, eta2, kappa)
        norm1 = l2_norm(eta1)
        gap = lhs - norm1
        young_ok = gap <= 1e-12
        try:
            outcome = pigeonhole_branching_scale(eta1, cfg.epsilon, cfg.tau, cfg.eta,
                                                 1.0 / float(mass))
        except PigeonholeFailure as exc:
            log.info("instance %d: %s", i, exc)
            rows.append((i, seed, lhs, norm1, rhs, holds, gap, None, None, None, None,
                         None, None, None, young_ok))
            continue
        entropy = conditional_entropy(outcome.first_restriction, outcome.fine_scale,
                                      outcome.coarse_scale)
        floor = outcome.tau_bar * cfg.level / 2
        rows.append((i, seed, lhs, norm1, rhs, holds, gap, outcome.chosen_index,
                     outcome.coarse_scale, outcome.fine_scale, outcome.frostman_bound_witness,
                     outcome.target, entropy, floor, young_ok and entropy >= floor - 1e-9))
    return rows


def _prop3_probe(cfg):
    rows = []
    level = cfg.level
    r = level if cfg.window_r is None else cfg.window_r
    for i, seed in enumerate(_child_seeds(cfg.seed, cfg.count)):
        rng = np.random.default_rng(seed)
        A = gen_random_cantor(level, cfg.survival, int(rng.integers(2**63)))
        B = gen_random_cantor(level, cfg.survival, int(rng.integers(2**63)))
        if len(A) == 0 or len(B) == 0:
            continue
        mu = product_measure(DeltaMeasure.uniform(A, exact=False),
                             DeltaMeasure.uniform(B, exact=False))
        theta = Direction(int(rng.integers(1 << cfg.theta_level)), cfg.theta_level)
        probe = prop3_probe(mu, theta, cfg.multiplicity_M, cfg.multiplicity_N, r, cfg.probe_R,
                            cfg.probe_c, cfg.probe_C)
        fibers = fiber_decomposition_check(mu.support(), theta, r, cfg.probe_R)
        rows.append((i, seed, str(theta.value), probe.lhs, probe.rhs1, probe.rhs2, probe.holds,
                     float(fibers.c1_min), float(fibers.c2_min), probe.holds))
    return rows


def generate_set(cfg) -> tuple[GridSet1D, DeltaMeasure | None]:
    if cfg.generator == "self-similar":
        return gen_self_similar(cfg.branches, cfg.contraction, cfg.depth)
    if cfg.generator == "cantor":
        S = gen_random_cantor(cfg.level, cfg.survival, cfg.seed)
        return S, (DeltaMeasure.uniform(S) if len(S) else None)
    A, _ = gen_ap_family(cfg.n_values[0], Fraction(cfg.kappa))
    return A, DeltaMeasure.uniform(A)


def _generate(cfg):
    S, mu = generate_set(cfg)
    weights = [None] * len(S) if mu is None else mu.float_weights()
    return [(int(k), str(Fraction(int(k), 1 << S.level)), w) for k, w in zip(S.cells, weights)]


def _dimension(cfg):
    S, _ = generate_set(cfg)
    if len(S) == 0:
        raise ValueError("generated set is empty")
    ladder = list(range(S.level + 1))
    slope = dimension_estimate(S, ladder)
    rows = []
    for lvl in ladder:
        n = covering_number(S, lvl)
        rows.append(("level", lvl, n, math.log2(n), None))
    rows.append(("summary", None, None, None, slope))
    return rows


RUNNERS = {
    "ap-counterexample": _ap_counterexample,
    "direction-scan": _direction_scan,
    "content-duality": _content_duality,
    "branching-audit": _branching_audit,
    "inverse-probe": _inverse_probe,
    "prop3-probe": _prop3_probe,
    "generate": _generate,
    "dimension": _dimension,
}


def _versions() -> dict:
    import scipy
    import sklearn

    from fslab import __version__

    return {"fslab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "python": platform.python_version()}


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Run one experiment and write its CSV (and JSON sidecar when ``out`` is set)."""
    config.validate()
    start = time.perf_counter()
    rows = RUNNERS[config.kind](config)
    wall = time.perf_counter() - start
    table = ResultTable(config.kind, COLUMNS[config.kind], rows)
    table.metadata = {
        "config": asdict(config) | {"n_values": list(config.n_values)},
        "config_hash": config.digest(),
        "versions": _versions(),
        "wall_time_seconds": wall,
        "columns": list(table.columns),
        "rows": len(rows),
        "passed": table.passed,
    }
    table.write(config.out)
    return table
