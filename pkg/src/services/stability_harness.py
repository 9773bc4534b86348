"""
Stability Harness Module.

Classifies simulated runs as stable or unstable from the drift of their queue
lengths, sweeps a grid of arrival-rate points, and reconciles each simulated
verdict with the closed-form region membership.
"""

import logging
import math
import multiprocessing
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import InvalidParameterError
from src.core.model import CooperationPolicy, RatePoint, SystemParams
from src.services.region_service import RegionSelector, closure_policy
from src.services.slotted_simulator import SimConfig, SimMode, SimStats, run

logger = logging.getLogger(__name__)

BURN_IN_FRACTION = 0.2
DEFAULT_WINDOW_COUNT = 10
DEFAULT_DRIFT_THRESHOLD = 1e-4
DEFAULT_EXCLUSION_BAND = 0.01


class StabilityTag(Enum):
    STABLE = "STABLE"
    UNSTABLE = "UNSTABLE"
    INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class StabilityVerdict:
    """
    Attributes:
        tag (StabilityTag): The classification.
        drift_q1 (float): Fitted source queue growth, packets/slot.
        drift_q2 (float): Fitted relay queue growth, packets/slot.
        margin_used (float): Analytic margin of the point the run was made at.
    """
    tag: StabilityTag
    drift_q1: float
    drift_q2: float
    margin_used: float = 0.0


@dataclass(frozen=True)
class GridAxis:
    minimum: float
    maximum: float
    count: int

    def values(self) -> List[float]:
        if self.count == 1:
            return [float(self.minimum)]
        return [float(v) for v in np.linspace(self.minimum, self.maximum, self.count)]


@dataclass(frozen=True)
class SweepSpec:
    params: SystemParams
    selector: RegionSelector
    lambda1_grid: GridAxis
    lambda2_grid: GridAxis
    n_slots: int = 1_000_000
    seeds: Tuple[int, ...] = (1, 2, 3)
    exclusion_band: float = DEFAULT_EXCLUSION_BAND
    window_count: int = DEFAULT_WINDOW_COUNT
    drift_threshold: float = DEFAULT_DRIFT_THRESHOLD
    sample_stride: int = 100
    workers: int = 1
    simulate: bool = True

    def __post_init__(self):
        if self.lambda1_grid.count < 1 or self.lambda2_grid.count < 1:
            raise InvalidParameterError("grid counts must be at least 1")
        if self.exclusion_band < 0:
            raise InvalidParameterError("exclusion_band must be non-negative")
        if self.simulate and not self.seeds:
            raise InvalidParameterError("at least one seed is required")


@dataclass(frozen=True)
class RegionRow:
    point: RatePoint
    analytic_inside: bool
    analytic_margin: float
    pa_used: float
    sim_verdict: Optional[StabilityVerdict] = None

    @property
    def agree(self) -> Optional[bool]:
        """Whether simulation confirms the analytic membership; None when not simulated."""
        if self.sim_verdict is None:
            return None
        tag = self.sim_verdict.tag
        return ((self.analytic_inside and tag is StabilityTag.STABLE)
                or (not self.analytic_inside and tag is StabilityTag.UNSTABLE))

    @property
    def decided(self) -> bool:
        return self.sim_verdict is not None and self.sim_verdict.tag is not StabilityTag.INDETERMINATE


@dataclass(frozen=True)
class RegionReport:
    selector_label: str
    rows: Tuple[RegionRow, ...]
    excluded: int = 0

    @property
    def disagreements(self) -> List[RegionRow]:
        return [row for row in self.rows if row.decided and not row.agree]

    @property
    def agreement_rate(self) -> float:
        """Share of decided rows that agree; INDETERMINATE rows do not count. 1.0 when nothing was decided."""
        decided = [row for row in self.rows if row.decided]
        if not decided:
            return 1.0
        return sum(1 for row in decided if row.agree) / len(decided)

    def inside_points(self) -> List[RatePoint]:
        return [row.point for row in self.rows if row.analytic_inside]


@dataclass(frozen=True)
class SchemeComparison:
    no_cooperation: RegionReport
    full_cooperation: RegionReport
    partial_cooperation: RegionReport
    containment_violations: Tuple[RatePoint, ...]

    @property
    def containment_ok(self) -> bool:
        return not self.containment_violations


# --- Classification ---

def _window_slopes(samples: Sequence[Tuple[int, int, int]], n_slots: int,
                   window_count: int) -> Tuple[float, float]:
    if n_slots == 0 or not samples:
        return 0.0, 0.0
    burn_in = int(BURN_IN_FRACTION * n_slots)
    window_slots = (n_slots - burn_in) / window_count
    data = np.asarray(samples, dtype=float).reshape(-1, 3)
    data = data[data[:, 0] >= burn_in]
    if len(data) == 0:
        return 0.0, 0.0

    index = np.minimum(((data[:, 0] - burn_in) // window_slots).astype(int), window_count - 1)
    counts = np.bincount(index, minlength=window_count)
    filled = counts > 0
    if filled.sum() < 2:
        return 0.0, 0.0

    windows = np.arange(window_count)[filled]
    slopes = []
    for column in (1, 2):
        means = np.bincount(index, weights=data[:, column], minlength=window_count)[filled] / counts[filled]
        slope_per_window = np.polyfit(windows, means, 1)[0]
        slopes.append(float(slope_per_window) / window_slots)
    return slopes[0], slopes[1]


def classify_stats(stats: SimStats, window_count: int = DEFAULT_WINDOW_COUNT,
                   drift_threshold: float = DEFAULT_DRIFT_THRESHOLD,
                   margin: float = 0.0) -> StabilityVerdict:
    """
    Turns the queue-length samples of a finished run into a verdict.

    The first fifth of the run is discarded; the rest is split into
    `window_count` windows and a least-squares line is fitted to the
    per-window mean queue lengths.
    """
    n_slots = stats.elapsed_slots
    drift_q1, drift_q2 = _window_slopes(stats.samples, n_slots, window_count)
    bound = 10.0 * math.sqrt(n_slots)

    if drift_q1 > drift_threshold or drift_q2 > drift_threshold:
        tag = StabilityTag.UNSTABLE
    elif (drift_q1 < drift_threshold / 2 and drift_q2 < drift_threshold / 2
          and stats.final_q1 <= bound and stats.final_q2 <= bound):
        tag = StabilityTag.STABLE
    else:
        tag = StabilityTag.INDETERMINATE
    return StabilityVerdict(tag, drift_q1, drift_q2, margin)


def classify_stability(config: SimConfig, window_count: int = DEFAULT_WINDOW_COUNT,
                       drift_threshold: float = DEFAULT_DRIFT_THRESHOLD,
                       margin: float = 0.0) -> StabilityVerdict:
    """
    Simulates `config` and classifies the run by queue drift.

    The sampling stride is shortened when needed so every window holds samples.
    """
    if config.n_slots < 10 * window_count:
        raise InvalidParameterError("n_slots must be at least 10 * window_count")
    if drift_threshold <= 0:
        raise InvalidParameterError("drift_threshold must be positive")

    window_slots = int((config.n_slots - int(BURN_IN_FRACTION * config.n_slots)) / window_count)
    stride = max(1, min(config.sample_stride, window_slots))
    if stride != config.sample_stride:
        config = replace(config, sample_stride=stride)

    return classify_stats(run(config), window_count, drift_threshold, margin)


# --- Sweeps ---

def _classify_job(job: Dict) -> Tuple[int, int, StabilityVerdict]:
    """Module-level worker so multiprocessing can pickle it."""
    verdict = classify_stability(job["config"], job["window_count"], job["drift_threshold"], job["margin"])
    return job["row"], job["seed_index"], verdict


def _run_jobs(jobs: List[Dict], workers: int) -> List[Tuple[int, int, StabilityVerdict]]:
    if workers <= 1 or len(jobs) <= 1:
        return [_classify_job(job) for job in jobs]
    with multiprocessing.Pool(min(workers, len(jobs))) as pool:
        results = pool.map(_classify_job, jobs)
    return sorted(results, key=lambda r: (r[0], r[1]))


def _majority(verdicts: Sequence[StabilityVerdict], margin: float) -> StabilityVerdict:
    """A tag wins with a strict majority of seeds; otherwise the row is INDETERMINATE."""
    counts = Counter(v.tag for v in verdicts)
    tag = StabilityTag.INDETERMINATE
    for candidate in (StabilityTag.STABLE, StabilityTag.UNSTABLE):
        if 2 * counts[candidate] > len(verdicts):
            tag = candidate
    drift_q1 = float(np.mean([v.drift_q1 for v in verdicts]))
    drift_q2 = float(np.mean([v.drift_q2 for v in verdicts]))
    return StabilityVerdict(tag, drift_q1, drift_q2, margin)


def sweep(spec: SweepSpec) -> RegionReport:
    """
    Evaluates every grid point analytically and, when `spec.simulate`, by simulation.

    Points whose |analytic margin| is below the exclusion band are skipped
    for simulated sweeps. Closure sweeps operate each point at the
    acceptance probability chosen by `closure_policy`.
    """
    candidates = []
    excluded = 0
    for lambda1 in spec.lambda1_grid.values():
        for lambda2 in spec.lambda2_grid.values():
            point = RatePoint(lambda1, lambda2)
            verdict = spec.selector.contains(point, spec.params)
            if spec.simulate and abs(verdict.margin) < spec.exclusion_band:
                excluded += 1
                continue
            if spec.selector.is_closure:
                pa = closure_policy(point, spec.params).pa
            else:
                pa = spec.selector.pa
            candidates.append((point, verdict, pa))

    logger.info("sweep %s: %d points, %d excluded", spec.selector.label, len(candidates), excluded)

    verdicts_by_row: Dict[int, List[StabilityVerdict]] = {}
    if spec.simulate:
        jobs = []
        for row, (point, verdict, pa) in enumerate(candidates):
            for seed_index, seed in enumerate(spec.seeds):
                config = SimConfig(params=spec.params, policy=CooperationPolicy(pa), rates=point,
                                   mode=SimMode.ORIGINAL, n_slots=spec.n_slots, seed=seed,
                                   sample_stride=spec.sample_stride)
                jobs.append({"row": row, "seed_index": seed_index, "config": config,
                             "window_count": spec.window_count,
                             "drift_threshold": spec.drift_threshold,
                             "margin": verdict.margin})
        for row, _, verdict in _run_jobs(jobs, spec.workers):
            verdicts_by_row.setdefault(row, []).append(verdict)

    rows = []
    for row, (point, verdict, pa) in enumerate(candidates):
        sim_verdict = None
        if spec.simulate:
            sim_verdict = _majority(verdicts_by_row[row], verdict.margin)
            logger.info("(%.6f, %.6f) pa=%.6f analytic=%s sim=%s", point.lambda1, point.lambda2,
                        pa, verdict.inside, sim_verdict.tag.value)
        rows.append(RegionRow(point, verdict.inside, verdict.margin, pa, sim_verdict))

    return RegionReport(spec.selector.label, tuple(rows), excluded)


def compare_three_schemes(params: SystemParams, grid: SweepSpec,
                          simulate: bool = False) -> SchemeComparison:
    """
    Evaluates no cooperation (pa=0), full cooperation (pa=1) and the closure on one grid.

    Containment of both fixed schemes in the closure is checked analytically
    on every grid point, excluded or not.
    """
    base = replace(grid, params=params, simulate=simulate)
    reports = [sweep(replace(base, selector=selector))
               for selector in (RegionSelector.fixed(0.0), RegionSelector.fixed(1.0),
                                RegionSelector.closure())]

    violations = []
    closure = RegionSelector.closure()
    fixed = (RegionSelector.fixed(0.0), RegionSelector.fixed(1.0))
    for lambda1 in grid.lambda1_grid.values():
        for lambda2 in grid.lambda2_grid.values():
            point = RatePoint(lambda1, lambda2)
            in_fixed = any(s.contains(point, params).inside for s in fixed)
            if in_fixed and not closure.contains(point, params).inside:
                violations.append(point)
    if violations:
        logger.warning("%d grid points inside a fixed scheme but outside the closure", len(violations))

    return SchemeComparison(reports[0], reports[1], reports[2], tuple(violations))
