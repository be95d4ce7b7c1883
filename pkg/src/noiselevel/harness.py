"""Seeded Monte-Carlo experiments comparing point geometries for noise estimation.

Three experiments are provided:

* ``geometry``: collinear equally spaced points versus points drawn at random
  from a box, compared through the distribution of relative noise estimates.
* ``grid``: the same comparison over a grid of box radii ``h`` and
  dimensions ``n``, scored by the fraction of estimates within a factor 4 of
  the true noise level.
* ``reuse``: a pool of previously evaluated random points is down-selected
  (and optionally augmented by free points) before estimating.

Every trial draws from its own random stream keyed by the trial index and
the cell parameters, so results do not depend on the number of workers or
on the order in which cells are listed.
"""

from __future__ import annotations

import enum
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .diff_engine import estimate_noise
from .models import (
    GroundTruth,
    NoiseKind,
    NoisyFunctionSpec,
    SeededRng,
    arbitrary_points,
    evaluate,
    random_base_and_direction,
    standard_points,
)
from .select import Free, SelectionError, SelectionProblem, solve_selection
from .stats import KsResult, ks_two_sample

__all__ = [
    "CellSummary",
    "ExperimentConfig",
    "ExperimentKind",
    "ExperimentResult",
    "PRESETS",
    "TrialRecord",
    "preset",
    "run_experiment",
    "run_geometry",
    "run_grid",
    "run_reuse",
    "success_fraction",
]

STANDARD = "Standard"
ARBITRARY = "Arbitrary"
SUCCESS_FACTOR = 4.0


def selected_mode(R: int) -> str:
    return f"SelectedR({R})"


class ExperimentKind(str, enum.Enum):
    GEOMETRY = "geometry"
    GRID = "grid"
    REUSE = "reuse"


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment.

    The experiment runs every combination of ``n``, ``h`` and ``m`` (a
    "cell") for ``trials`` trials. ``M`` and ``R`` are used by the reuse
    experiment only; ``R`` values above a cell's ``m`` are skipped. Base
    points are drawn from ``[-box, box]^n``. ``node_limit`` bounds each
    selection solve (there is no wall-clock limit, so runs are reproducible).
    """

    kind: ExperimentKind
    function: NoisyFunctionSpec
    n: tuple[int, ...]
    h: tuple[float, ...]
    m: tuple[int, ...]
    trials: int
    seed: int = 0
    M: int | None = None
    R: tuple[int, ...] = ()
    box: float = 10.0
    node_limit: int = 1_000_000
    output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ExperimentKind(self.kind))
        if isinstance(self.function, dict):
            object.__setattr__(self, "function", NoisyFunctionSpec.from_dict(self.function))
        for name, cast in (("n", int), ("h", float), ("m", int), ("R", int)):
            value = getattr(self, name)
            if isinstance(value, (int, float)):
                value = (value,)
            object.__setattr__(self, name, tuple(cast(v) for v in value))
        self.validate()

    def validate(self) -> None:
        if not (self.n and self.h and self.m):
            raise ValueError("n, h and m lists must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(v < 1 for v in self.n):
            raise ValueError("dimensions must be positive")
        if any(not v > 0 for v in self.h):
            raise ValueError("h values must be positive")
        if not self.box > 0:
            raise ValueError("box must be positive")
        if self.kind is ExperimentKind.REUSE:
            if self.M is None or not self.R:
                raise ValueError("the reuse experiment needs M and a nonempty R list")
            if any(self.M < m for m in self.m):
                raise ValueError("the pool size M must be at least every m")
            if any(r < 1 for r in self.R):
                raise ValueError("reuse budgets must be at least 1")
            if any(m < 3 for m in self.m):
                raise ValueError("the reuse experiment needs m >= 3 (m + 1 >= 4 points)")
        elif any(m < 4 for m in self.m):
            raise ValueError("noise estimation needs m >= 4 points")

    def cells(self) -> list[tuple[int, float, int]]:
        return [(n, h, m) for n in self.n for h in self.h for m in self.m]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["function"] = self.function.to_dict()
        for name in ("n", "h", "m", "R"):
            d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class TrialRecord:
    """One noise estimate.

    ``target`` is the true noise level at the base point and ``evaluations``
    the number of new function evaluations the mode needed.
    """

    trial: int
    mode: str
    n: int
    h: float
    m: int
    estimate: float
    relative_estimate: float | None
    status: str
    target: float
    evaluations: int
    R: int | None = None
    optimal: bool | None = None

    @property
    def success(self) -> bool:
        return within_factor(self.estimate, self.target)


def within_factor(estimate: float, target: float, factor: float = SUCCESS_FACTOR) -> bool:
    return target / factor <= estimate <= factor * target if target > 0 else False


def success_fraction(records: Sequence[TrialRecord]) -> float:
    if not records:
        return math.nan
    return sum(r.success for r in records) / len(records)


@dataclass(frozen=True)
class CellSummary:
    """Per-cell aggregate: sorted estimates, success fractions and a KS test.

    The KS test compares Standard and Arbitrary on relative estimates for the
    geometry experiment and on raw estimates otherwise.
    """

    n: int
    h: float
    m: int
    samples: dict[str, list[float]]
    success: dict[str, float]
    ks: KsResult | None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "h": self.h,
            "m": self.m,
            "success_fraction": self.success,
            "ks": None if self.ks is None else asdict(self.ks),
            "ecdf_samples": self.samples,
        }


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    records: list[TrialRecord]
    cells: list[CellSummary] = field(default_factory=list)

    def cell(self, n: int, h: float, m: int) -> CellSummary:
        for c in self.cells:
            if (c.n, c.h, c.m) == (n, h, m):
                return c
        raise KeyError((n, h, m))


# -- per-trial work ---------------------------------------------------------


def _stream(seed: int, trial: int, n: int, count: int, h: float) -> SeededRng:
    h_bits = struct.unpack("<Q", struct.pack("<d", h))[0]
    return SeededRng(seed, (trial, n, count, h_bits))


def _target(spec: NoisyFunctionSpec, y0: np.ndarray) -> float:
    if spec.noise is NoiseKind.ADDITIVE:
        return spec.sigma
    return spec.sigma * abs(float(spec.smooth(y0)))


def _record(trial, mode, n, h, m, values, target, evaluations, R=None, optimal=None):
    est = estimate_noise(values)
    f0 = float(values[0])
    rel = est.value / f0 if f0 != 0 else None
    return TrialRecord(trial, mode, n, h, m, est.value, rel, est.status.value, target, evaluations, R, optimal)


def _baseline_trial(spec, n, h, count, m_label, seed, trial, box):
    """Standard and Arbitrary estimates plus the arbitrary sample, for one trial."""
    rng = _stream(seed, trial, n, count, h)
    y0, d = random_base_and_direction(n, box, rng.child(0))
    std_pts = standard_points(y0, d, h, count)
    arb_pts = arbitrary_points(y0, h, count, rng.child(1))
    std_vals = evaluate(spec, std_pts.points, rng.child(2))
    arb_vals = evaluate(spec, arb_pts.points, rng.child(3))
    target = _target(spec, y0)
    recs = [
        _record(trial, STANDARD, n, h, m_label, std_vals, target, count),
        _record(trial, ARBITRARY, n, h, m_label, arb_vals, target, count),
    ]
    return recs, rng, arb_pts, arb_vals, target


def _geometry_trial(args) -> list[TrialRecord]:
    config, (n, h, m), trial = args
    recs, *_ = _baseline_trial(config.function, n, h, m, m, config.seed, trial, config.box)
    return recs


def _reuse_trial(args) -> list[TrialRecord]:
    config, (n, h, m), trial = args
    spec = config.function
    count = m + 1
    recs, rng, arb_pts, arb_vals, target = _baseline_trial(
        spec, n, h, count, m, config.seed, trial, config.box
    )
    y0 = arb_pts.base
    # the arbitrary sample (minus its base point) opens the pool
    extra = y0 + rng.child(4).uniform(-h, h, (config.M - m, n))
    pool = np.vstack([arb_pts.points[1:], extra])
    pool_vals = np.concatenate([arb_vals[1:], evaluate(spec, extra, rng.child(5))])
    for R in config.R:
        if R > m:
            continue
        mode = selected_mode(R)
        try:
            problem = SelectionProblem(y0, pool, m, R=R, h=h, node_limit=config.node_limit, time_limit=None)
            sol = solve_selection(problem)
        except SelectionError:
            recs.append(TrialRecord(trial, mode, n, h, m, 0.0, None, "SolverError", target, 0, R, False))
            continue
        free = [s for s in sol.assignment if isinstance(s, Free)]
        free_vals = iter(())
        if free:
            pts = y0 + np.array([s.point for s in free])
            free_vals = iter(evaluate(spec, pts, rng.child(6, R)))
        values = [arb_vals[0]] + [
            next(free_vals) if isinstance(s, Free) else pool_vals[s.index] for s in sol.assignment
        ]
        recs.append(
            _record(trial, mode, n, h, m, np.array(values), target, len(free), R, sol.optimal)
        )
    return recs


def _run(config: ExperimentConfig, kind: ExperimentKind, workers: int) -> ExperimentResult:
    if config.kind is not kind:
        raise ValueError(f"expected a {kind.value} config, got {config.kind.value}")
    task = _reuse_trial if kind is ExperimentKind.REUSE else _geometry_trial
    jobs = [(config, cell, t) for cell in config.cells() for t in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(jobs) // (8 * workers))
            results = list(pool.map(task, jobs, chunksize=chunk))
    else:
        results = [task(job) for job in jobs]
    records = [r for batch in results for r in batch]
    return ExperimentResult(config, records, _summarize(config, records))


def _summarize(config: ExperimentConfig, records: list[TrialRecord]) -> list[CellSummary]:
    by_cell: dict[tuple, dict[str, list[TrialRecord]]] = {}
    for r in records:
        by_cell.setdefault((r.n, r.h, r.m), {}).setdefault(r.mode, []).append(r)
    relative = config.kind is ExperimentKind.GEOMETRY
    cells = []
    for (n, h, m) in config.cells():
        modes = by_cell.get((n, h, m), {})

        def values(mode):
            rs = modes.get(mode, [])
            if relative:
                return [0.0 if r.relative_estimate is None else r.relative_estimate for r in rs]
            return [r.estimate for r in rs]

        samples = {mode: sorted(values(mode)) for mode in modes}
        success = {mode: success_fraction(rs) for mode, rs in modes.items()}
        ks = None
        if modes.get(STANDARD) and modes.get(ARBITRARY):
            ks = ks_two_sample(values(STANDARD), values(ARBITRARY))
        cells.append(CellSummary(n, h, m, samples, success, ks))
    return cells


def run_geometry(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Standard versus Arbitrary relative estimates for every cell, with a KS test."""
    return _run(config, ExperimentKind.GEOMETRY, workers)


def run_grid(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Standard versus Arbitrary raw estimates over the ``(h, n)`` grid.

    Declined estimates are recorded as 0.
    """
    return _run(config, ExperimentKind.GRID, workers)


def run_reuse(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Estimates from selected pool subsets for each reuse budget ``R``.

    Each trial uses ``m + 1`` points in every mode: the base point plus ``m``
    slots. The Standard and Arbitrary baselines are those of the geometry
    experiment with ``m + 1`` points, and the pool starts with the Arbitrary
    sample's points.
    """
    return _run(config, ExperimentKind.REUSE, workers)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    return _run(config, config.kind, workers)


PRESETS: dict[str, ExperimentConfig] = {
    "geometry": ExperimentConfig(
        kind=ExperimentKind.GEOMETRY,
        function=NoisyFunctionSpec(GroundTruth.QUADRATIC, NoiseKind.MULTIPLICATIVE, 1e-3),
        n=(10,),
        h=(1e-6,),
        m=(6, 12, 24),
        trials=10_000,
    ),
    "grid": ExperimentConfig(
        kind=ExperimentKind.GRID,
        function=NoisyFunctionSpec(GroundTruth.POWER_SUM, NoiseKind.ADDITIVE, 1e-3, degree=6),
        n=(2, 6, 10),
        h=(1e-2, 1e-4, 1e-6, 1e-8),
        m=(6,),
        trials=10_000,
    ),
    "reuse": ExperimentConfig(
        kind=ExperimentKind.REUSE,
        function=NoisyFunctionSpec(GroundTruth.POWER_SUM, NoiseKind.ADDITIVE, 1e-3, degree=6),
        n=(6,),
        h=(1e-6,),
        m=(6, 12),
        trials=1_000,
        M=50,
        R=tuple(range(12, 0, -1)),
    ),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    """A named preset with optional field overrides (``trials``, ``seed``, ...)."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return replace(PRESETS[name], **overrides)
