"""
Region Service Module.

Closed-form stability analysis of the source/relay/destination network:
service rates of the two dominant systems, membership in the stability
region for a fixed acceptance probability, membership in the closure over
all acceptance probabilities, the optimal acceptance probability, and
boundary tracing by bisection.

Region interiors are open: a point on a boundary line is outside. Every
inequality is evaluated as a slack (right side minus left side, in
packets/slot) so callers can tell how far a point is from the boundary.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import (CapacityExceededError, DegenerateParameterError,
                             InvalidParameterError, UnstableQueueError, ZeroServiceRateError)
from src.core.model import (CooperationPolicy, DerivedRates, RatePoint, SystemParams,
                            ChannelProbabilities, branch_probability,
                            source_departure_probability)

logger = logging.getLogger(__name__)

BISECTION_TOLERANCE = 1e-9

# Slack used when comparing a closed form against a boundary it may hit exactly.
_BOUNDARY_TOL = 1e-12


class SubregionId(Enum):
    R1_PA = "R1_PA"
    R2_PA = "R2_PA"
    R11 = "R11"
    R12 = "R12"
    R21 = "R21"
    R221 = "R221"
    R222 = "R222"


class R1Case(Enum):
    PA1 = "PA1"
    PA0 = "PA0"


class R2Case(Enum):
    PA1 = "PA1"
    SPLIT = "SPLIT"


class DominantSystem(Enum):
    """Which node keeps transmitting dummy packets when its queue is empty."""
    SOURCE_DUMMY = 1
    RELAY_DUMMY = 2


@dataclass(frozen=True)
class SubregionWitness:
    subregion: SubregionId
    satisfied: bool
    margin: float


@dataclass(frozen=True)
class MembershipVerdict:
    """
    Attributes:
        inside (bool): True iff at least one witness subregion is satisfied.
        witnesses (Tuple[SubregionWitness, ...]): Every subregion evaluated.
        margin (float): Largest per-subregion minimum slack; positive iff inside.
    """
    inside: bool
    witnesses: Tuple[SubregionWitness, ...]
    margin: float

    def satisfied_subregions(self) -> List[SubregionId]:
        return [w.subregion for w in self.witnesses if w.satisfied]


@dataclass(frozen=True)
class ClosureCase:
    r1_case: R1Case
    r2_case: R2Case
    thresholds: Tuple[float, float]


@dataclass(frozen=True)
class BoundaryTrace:
    points: Tuple[RatePoint, ...]
    segment_labels: Tuple[Optional[SubregionId], ...]
    pa_star_values: Tuple[Optional[float], ...]


@dataclass(frozen=True)
class RegionSelector:
    """Chooses between the fixed-pa region (pa set) and the closure over all pa (pa None)."""
    pa: Optional[float] = None

    @classmethod
    def closure(cls):
        return cls(None)

    @classmethod
    def fixed(cls, pa: float):
        return cls(pa)

    @property
    def is_closure(self) -> bool:
        return self.pa is None

    @property
    def label(self) -> str:
        return "closure" if self.is_closure else f"pa={self.pa:g}"

    def contains(self, point: RatePoint, params: SystemParams) -> MembershipVerdict:
        if self.is_closure:
            return closure_contains(point, params)
        return region_fixed_pa_contains(point, params, CooperationPolicy(self.pa))


# --- Service and arrival rates ---

def _check_probability(name: str, value: float):
    if math.isnan(value) or not 0.0 <= value <= 1.0:
        raise InvalidParameterError(f"{name} out of range")


def source_service_rate(params: SystemParams, policy: CooperationPolicy,
                        prob_q2_nonempty: float) -> float:
    """
    Average service rate of the source given how often the relay queue is busy.

    mu1 = [(1-q2)Pr(Q2!=0) + Pr(Q2=0)] * q1 * (p13 + (1-p13)p12*pa)
    """
    _check_probability("prob_q2_nonempty", prob_q2_nonempty)
    q1, q2 = params.access.q1, params.access.q2
    channel_free = (1.0 - q2) * prob_q2_nonempty + (1.0 - prob_q2_nonempty)
    return channel_free * q1 * source_departure_probability(params.channel, policy.pa)


def relay_service_rate(params: SystemParams, prob_q1_nonempty: float) -> float:
    """Average service rate of the relay: q2 * [1 - q1*Pr(Q1!=0)] * p23."""
    _check_probability("prob_q1_nonempty", prob_q1_nonempty)
    q1, q2 = params.access.q1, params.access.q2
    return q2 * (1.0 - q1 * prob_q1_nonempty) * params.channel.p23


def relay_total_arrival_rate(rates: RatePoint, channel: ChannelProbabilities,
                             policy: CooperationPolicy) -> float:
    """Exogenous relay traffic plus the share of source traffic the relay takes over."""
    return rates.lambda2 + branch_probability(channel, policy) * rates.lambda1


def dominant1_q2_busy_prob(rates: RatePoint, params: SystemParams,
                           policy: CooperationPolicy) -> float:
    """
    Stationary busy probability of the relay queue while the source sends dummies.

    Little's theorem gives lambda_Q2 / [q2(1-q1)p23].

    Raises:
        ZeroServiceRateError: If q2(1-q1)p23 = 0.
        UnstableQueueError: If the ratio reaches 1.
    """
    q1, q2 = params.access.q1, params.access.q2
    service = q2 * (1.0 - q1) * params.channel.p23
    if service <= 0.0:
        raise ZeroServiceRateError("relay service rate q2(1-q1)p23 is zero")
    ratio = relay_total_arrival_rate(rates, params.channel, policy) / service
    if ratio >= 1.0 - _BOUNDARY_TOL:
        raise UnstableQueueError(f"relay queue is not stable (load {ratio:.9f})")
    return ratio


def dominant2_q1_busy_prob(rates: RatePoint, params: SystemParams,
                           policy: CooperationPolicy) -> float:
    """Busy probability of the source queue while the relay sends dummies: lambda1 / [q1(1-q2)c(pa)]."""
    q1, q2 = params.access.q1, params.access.q2
    service = q1 * (1.0 - q2) * source_departure_probability(params.channel, policy.pa)
    if service <= 0.0:
        raise ZeroServiceRateError("source service rate q1(1-q2)(p13+(1-p13)p12pa) is zero")
    ratio = rates.lambda1 / service
    if ratio >= 1.0 - _BOUNDARY_TOL:
        raise UnstableQueueError(f"source queue is not stable (load {ratio:.9f})")
    return ratio


def service_rates_dominant(params: SystemParams, policy: CooperationPolicy, rates: RatePoint,
                           system: DominantSystem) -> DerivedRates:
    """
    Service and arrival rates of one of the two dominant systems at `rates`.

    The non-dummy queue must be stable; its busy probability feeds the
    other node's service rate.
    """
    branch = branch_probability(params.channel, policy)
    lambda_q2 = rates.lambda2 + branch * rates.lambda1
    q1, q2 = params.access.q1, params.access.q2

    if system is DominantSystem.SOURCE_DUMMY:
        busy_relay = dominant1_q2_busy_prob(rates, params, policy)
        mu1 = source_service_rate(params, policy, busy_relay)
        mu2_q = q2 * (1.0 - q1) * params.channel.p23
    else:
        busy_source = dominant2_q1_busy_prob(rates, params, policy)
        mu1 = q1 * (1.0 - q2) * source_departure_probability(params.channel, policy.pa)
        mu2_q = relay_service_rate(params, busy_source)

    return DerivedRates(mu1=mu1, mu2_q=mu2_q, lambda_q2=lambda_q2, branch_prob=branch)


# --- Membership ---

def _slack(rate: float, load: float, extra: float, scale: float) -> float:
    """Slack of ``load + extra/scale < rate``, multiplied through by `scale` when it vanishes."""
    if scale > 0.0:
        return rate - load - extra / scale
    return -extra


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0.0 else 0.0


def _witness(subregion: SubregionId, slacks: Sequence[float],
             selector_slack: Optional[float] = None, selector_strict: bool = True) -> SubregionWitness:
    """
    Combines the stability slacks of one subregion.

    A selector is a lambda1-range condition that picks which closed form
    applies. It only counts toward the margin when it fails, so the seam
    between two adjoining pieces does not look like a boundary.
    """
    margin = min(slacks)
    selected = True
    if selector_slack is not None:
        selected = selector_slack > 0.0 if selector_strict else selector_slack >= 0.0
        if not selected:
            margin = min(margin, selector_slack)
    satisfied = selected and all(s > 0.0 for s in slacks)
    return SubregionWitness(subregion, satisfied, margin)


def _verdict(witnesses: Sequence[SubregionWitness]) -> MembershipVerdict:
    return MembershipVerdict(
        inside=any(w.satisfied for w in witnesses),
        witnesses=tuple(witnesses),
        margin=max(w.margin for w in witnesses),
    )


def _r1_pa_witness(point: RatePoint, params: SystemParams, pa: float) -> SubregionWitness:
    p13, p12, p23 = params.channel.p13, params.channel.p12, params.channel.p23
    q1, q2 = params.access.q1, params.access.q2
    l1, l2 = point.lambda1, point.lambda2
    relayed = (1.0 - p13) * p12 * pa
    departing = p13 + relayed

    source = _slack(q1 * departing, l1, q1 * (relayed * l1 + departing * l2), (1.0 - q1) * p23)
    relay = q2 * (1.0 - q1) * p23 - l2 - _ratio(relayed, departing) * l1
    return _witness(SubregionId.R1_PA, (source, relay))


def _r2_pa_witness(point: RatePoint, params: SystemParams, pa: float) -> SubregionWitness:
    p13, p12, p23 = params.channel.p13, params.channel.p12, params.channel.p23
    q1, q2 = params.access.q1, params.access.q2
    l1, l2 = point.lambda1, point.lambda2
    relayed = (1.0 - p13) * p12 * pa
    departing = p13 + relayed

    relay = _slack(q2 * p23, l2, ((1.0 - q2) * relayed + q2 * p23) * l1, (1.0 - q2) * departing)
    source = q1 * (1.0 - q2) * departing - l1
    return _witness(SubregionId.R2_PA, (relay, source))


def r1_pa_contains(point: RatePoint, params: SystemParams,
                   policy: CooperationPolicy) -> MembershipVerdict:
    """Membership in the region obtained from the dominant system where the source sends dummies."""
    return _verdict([_r1_pa_witness(point, params, policy.pa)])


def r2_pa_contains(point: RatePoint, params: SystemParams,
                   policy: CooperationPolicy) -> MembershipVerdict:
    """Membership in the region obtained from the dominant system where the relay sends dummies."""
    return _verdict([_r2_pa_witness(point, params, policy.pa)])


def region_fixed_pa_contains(point: RatePoint, params: SystemParams,
                             policy: CooperationPolicy) -> MembershipVerdict:
    """Membership in the stability region for a fixed pa, the union of both dominant-system regions."""
    return _verdict([_r1_pa_witness(point, params, policy.pa),
                     _r2_pa_witness(point, params, policy.pa)])


def closure_case(params: SystemParams) -> ClosureCase:
    """
    Selects which closed form describes each half of the closure.

    Ties go to q1 >= p23/(p13+p23) -> PA0 and q2 >= p13/(p13+p23) -> PA1.
    """
    p13, p23 = params.channel.p13, params.channel.p23
    total = p13 + p23
    if total <= 0.0:
        raise DegenerateParameterError("p13 + p23 is zero; closure thresholds undefined")
    q1_threshold = p23 / total
    q2_threshold = p13 / total
    r1_case = R1Case.PA1 if params.access.q1 < q1_threshold else R1Case.PA0
    r2_case = R2Case.PA1 if params.access.q2 >= q2_threshold else R2Case.SPLIT
    return ClosureCase(r1_case, r2_case, (q1_threshold, q2_threshold))


def _closure_witnesses(point: RatePoint, params: SystemParams,
                       case: ClosureCase) -> List[SubregionWitness]:
    p13, p12, p23 = params.channel.p13, params.channel.p12, params.channel.p23
    q1, q2 = params.access.q1, params.access.q2
    l1, l2 = point.lambda1, point.lambda2
    relayed = (1.0 - p13) * p12
    departing = p13 + relayed
    witnesses = []

    if case.r1_case is R1Case.PA1:
        witnesses.append(_witness(SubregionId.R11, (
            _slack((1.0 - q1) * p23, l2, (q1 * relayed + (1.0 - q1) * p23) * l1, q1 * departing),
            q2 * (1.0 - q1) * p23 - l2 - _ratio(relayed, departing) * l1,
        )))
    else:
        witnesses.append(_witness(SubregionId.R12, (
            _slack(q1 * p13, l1, q1 * p13 * l2, (1.0 - q1) * p23),
            q2 * (1.0 - q1) * p23 - l2,
        )))

    no_relay_limit = q1 * (1.0 - q2) * p13
    if case.r2_case is R2Case.PA1:
        witnesses.append(_witness(SubregionId.R21, (
            _slack(q2 * p23, l2, ((1.0 - q2) * relayed + q2 * p23) * l1, (1.0 - q2) * departing),
            q1 * (1.0 - q2) * departing - l1,
        )))
    else:
        witnesses.append(_witness(
            SubregionId.R221,
            (_slack(q2 * p23, l2, q2 * p23 * l1, (1.0 - q2) * p13),),
            selector_slack=no_relay_limit - l1,
        ))
        witnesses.append(_witness(
            SubregionId.R222,
            (no_relay_limit + q2 * p23 * (1.0 - q1) - l1 - l2,
             q1 * (1.0 - q2) * departing - l1),
            selector_slack=l1 - no_relay_limit,
            selector_strict=False,
        ))
    return witnesses


def closure_contains(point: RatePoint, params: SystemParams) -> MembershipVerdict:
    """Membership in the union of the fixed-pa regions over every pa in [0, 1]."""
    return _verdict(_closure_witnesses(point, params, closure_case(params)))


# --- Optimal acceptance probability ---

def optimal_pa(params: SystemParams, lambda1: float) -> float:
    """
    Acceptance probability that maximizes the relay-dominant part of the closure at `lambda1`.

    Raises:
        InvalidParameterError: If lambda1 lies outside [0, 1].
        DegenerateParameterError: If the relayed share (1-p13)p12 vanishes
            while lambda1 is above the no-relay limit.
        CapacityExceededError: If lambda1 exceeds q1(1-q2)[p13+(1-p13)p12].
    """
    _check_probability("lambda1", lambda1)
    p13, p12 = params.channel.p13, params.channel.p12
    q1, q2 = params.access.q1, params.access.q2
    no_relay_limit = q1 * (1.0 - q2) * p13
    relay_gain = q1 * (1.0 - q2) * (1.0 - p13) * p12
    capacity = no_relay_limit + relay_gain

    def check_capacity():
        if lambda1 > capacity + _BOUNDARY_TOL:
            raise CapacityExceededError(
                f"lambda1={lambda1:.9f} exceeds the source capacity {capacity:.9f}")

    if closure_case(params).r2_case is R2Case.PA1:
        check_capacity()
        return 1.0
    if lambda1 <= no_relay_limit:
        return 0.0
    if relay_gain <= 0.0:
        raise DegenerateParameterError("q1(1-q2)(1-p13)p12 is zero; no acceptance probability helps")
    check_capacity()
    return min(1.0, max(0.0, (lambda1 - no_relay_limit) / relay_gain))


def segment_pa(subregion: Optional[SubregionId], params: SystemParams,
               lambda1: float) -> Optional[float]:
    """Acceptance probability that realizes a closure subregion at `lambda1`."""
    if subregion in (SubregionId.R11, SubregionId.R21):
        return 1.0
    if subregion in (SubregionId.R12, SubregionId.R221):
        return 0.0
    if subregion is SubregionId.R222:
        return optimal_pa(params, lambda1)
    return None


def closure_policy(point: RatePoint, params: SystemParams) -> CooperationPolicy:
    """
    Acceptance probability used to operate the network at `point` in closure mode.

    Relay-dominant pieces use optimal_pa(lambda1); a point only inside the
    source-dominant piece uses that piece's pa. Points outside the closure
    get optimal_pa clamped at the capacity limit.
    """
    verdict = closure_contains(point, params)
    satisfied = verdict.satisfied_subregions()
    for subregion in (SubregionId.R221, SubregionId.R222, SubregionId.R21):
        if subregion in satisfied:
            return CooperationPolicy(segment_pa(subregion, params, point.lambda1))
    if satisfied:
        return CooperationPolicy(segment_pa(satisfied[0], params, point.lambda1))
    try:
        return CooperationPolicy(optimal_pa(params, point.lambda1))
    except CapacityExceededError:
        return CooperationPolicy(1.0)


@dataclass(frozen=True)
class OptimalPaTable:
    """
    The three regimes of the optimal acceptance probability over lambda1.

    Attributes:
        case (ClosureCase): Which closure branch applies.
        no_relay_limit (float): Below this lambda1 the relay rejects everything.
        full_relay_onset (float): From here on the relay accepts everything.
        relay_gain (float): Denominator of the affine middle piece.
        lambda1_max (float): lambda2 = 0 intercept of the closure.
    """
    case: ClosureCase
    no_relay_limit: float
    full_relay_onset: float
    relay_gain: float
    lambda1_max: float

    def rows(self) -> List[Tuple[str, str]]:
        if self.case.r2_case is R2Case.PA1:
            return [(f"0 <= lambda1 < {self.lambda1_max:.9f}", "1")]
        return [
            (f"lambda1 <= {self.no_relay_limit:.9f}", "0"),
            (f"{self.no_relay_limit:.9f} < lambda1 < {self.full_relay_onset:.9f}",
             f"(lambda1 - {self.no_relay_limit:.9f}) / {self.relay_gain:.9f}"),
            (f"{self.full_relay_onset:.9f} <= lambda1 < {self.lambda1_max:.9f}", "1"),
        ]


def optimal_pa_table(params: SystemParams) -> OptimalPaTable:
    p13, p12 = params.channel.p13, params.channel.p12
    q1, q2 = params.access.q1, params.access.q2
    no_relay_limit = q1 * (1.0 - q2) * p13
    relay_gain = q1 * (1.0 - q2) * (1.0 - p13) * p12
    return OptimalPaTable(
        case=closure_case(params),
        no_relay_limit=no_relay_limit,
        full_relay_onset=no_relay_limit + relay_gain,
        relay_gain=relay_gain,
        lambda1_max=lambda1_max(params, RegionSelector.closure()),
    )


# --- Boundary tracing ---

def _supremum(inside: Callable[[float], bool], tolerance: float = BISECTION_TOLERANCE) -> float:
    """Largest x in [0, 1) with inside(x), for a predicate that holds on an interval starting at 0."""
    if not inside(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return lo


def lambda1_max(params: SystemParams, selector: RegionSelector) -> float:
    """The lambda2 = 0 intercept of the region, found by bisection."""
    return _supremum(lambda x: selector.contains(RatePoint(x, 0.0), params).inside)


def boundary_lambda2(params: SystemParams, selector: RegionSelector,
                     lambda1: float) -> Tuple[float, Optional[SubregionId]]:
    """
    Supremum of lambda2 at `lambda1` and the subregion whose boundary it lies on.

    Returns (0.0, None) when (lambda1, 0) is already outside.
    """
    top = _supremum(lambda y: selector.contains(RatePoint(lambda1, y), params).inside)
    verdict = selector.contains(RatePoint(lambda1, top), params)
    satisfied = verdict.satisfied_subregions()
    return top, (satisfied[0] if satisfied else None)


def boundary_trace(params: SystemParams, selector: RegionSelector,
                   resolution: int) -> BoundaryTrace:
    """
    Samples the region boundary at `resolution` evenly spaced lambda1 values.

    The lambda1 range runs from 0 to the region's lambda2 = 0 intercept.
    Closure traces carry the acceptance probability of each segment;
    fixed-pa traces repeat the fixed pa.
    """
    if resolution < 2:
        raise InvalidParameterError("resolution must be at least 2")

    x_max = lambda1_max(params, selector)
    logger.debug("tracing %s boundary over [0, %.9f] at %d points", selector.label, x_max, resolution)

    points, labels, pa_values = [], [], []
    for x in np.linspace(0.0, x_max, resolution):
        lambda1 = float(x)
        lambda2, label = boundary_lambda2(params, selector, lambda1)
        points.append(RatePoint(lambda1, lambda2))
        labels.append(label)
        if selector.is_closure:
            pa_values.append(segment_pa(label, params, lambda1))
        else:
            pa_values.append(selector.pa)

    return BoundaryTrace(tuple(points), tuple(labels), tuple(pa_values))
