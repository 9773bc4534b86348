"""
Core Model Module.

Domain types shared by the analytic engine and the simulator: per-link
success probabilities, per-node access probabilities, the relay's flow
controller setting and arrival-rate points. All types are immutable values.

Parameter checks are result-carrying (`ValidationResult`) so a caller can
show every problem at once; `require_valid` turns a failed result into an
`InvalidParameterError` for code paths that cannot continue.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List

from src.core.errors import DegenerateParameterError, InvalidParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChannelProbabilities:
    """
    Success probabilities of the three links.

    Attributes:
        p13 (float): Source to destination.
        p12 (float): Source to relay.
        p23 (float): Relay to destination.
    """
    p13: float
    p12: float
    p23: float


@dataclass(frozen=True)
class AccessProbabilities:
    """Per-slot transmission attempt probabilities of source (q1) and relay (q2)."""
    q1: float
    q2: float


@dataclass(frozen=True)
class CooperationPolicy:
    """Flow controller setting: probability that the relay accepts an overheard source packet."""
    pa: float


@dataclass(frozen=True)
class RatePoint:
    """Exogenous Bernoulli arrival rates (packets/slot) at the source and at the relay."""
    lambda1: float
    lambda2: float


@dataclass(frozen=True)
class SystemParams:
    """The channel and access probabilities every formula reads."""
    channel: ChannelProbabilities
    access: AccessProbabilities

    @classmethod
    def from_values(cls, p13, p12, p23, q1, q2):
        """Builds params from the five scalar probabilities."""
        return cls(ChannelProbabilities(p13, p12, p23), AccessProbabilities(q1, q2))


@dataclass(frozen=True)
class DerivedRates:
    """
    Service and arrival rates of one operating point.

    Attributes:
        mu1 (float): Source service rate.
        mu2_q (float): Relay queue service rate.
        lambda_q2 (float): Total (exogenous plus relayed) arrival rate at the relay.
        branch_prob (float): Fraction of departing source packets that enter the relay queue.
    """
    mu1: float
    mu2_q: float
    lambda_q2: float
    branch_prob: float


@dataclass
class ValidationResult:
    """Outcome of a parameter check: hard violations and soft warnings."""
    violations: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def merge(self, other: "ValidationResult") -> "ValidationResult":
        return ValidationResult(self.violations + other.violations, self.warnings + other.warnings)


def _check_unit(name: str, value: float, result: ValidationResult):
    if not isinstance(value, (int, float)) or math.isnan(value) or not 0.0 <= value <= 1.0:
        result.violations.append(f"{name} out of range")


def validate_params(params: SystemParams) -> ValidationResult:
    """
    Checks every probability of `params` against [0, 1].

    A relay link that is not better than the direct link (p23 <= p13) is
    reported as a warning only; the closed forms stay well defined.
    """
    result = ValidationResult()
    channel, access = params.channel, params.access
    for name in ("p13", "p12", "p23"):
        _check_unit(name, getattr(channel, name), result)
    for name in ("q1", "q2"):
        _check_unit(name, getattr(access, name), result)

    if result.ok and channel.p23 <= channel.p13:
        result.warnings.append("p23 ≤ p13")
        logger.warning("relay link is not better than the direct link (p23=%s, p13=%s)",
                       channel.p23, channel.p13)
    return result


def validate_policy(policy: CooperationPolicy) -> ValidationResult:
    result = ValidationResult()
    _check_unit("pa", policy.pa, result)
    return result


def validate_rates(rates: RatePoint) -> ValidationResult:
    result = ValidationResult()
    _check_unit("lambda1", rates.lambda1, result)
    _check_unit("lambda2", rates.lambda2, result)
    return result


def require_valid(result: ValidationResult):
    """Raises InvalidParameterError listing every violation of a failed check."""
    if not result.ok:
        raise InvalidParameterError("; ".join(result.violations))


def source_departure_probability(channel: ChannelProbabilities, pa: float) -> float:
    """Probability that a lone source transmission leaves the source queue: p13 + (1-p13)p12*pa."""
    return channel.p13 + (1.0 - channel.p13) * channel.p12 * pa


def branch_probability(channel: ChannelProbabilities, policy: CooperationPolicy) -> float:
    """
    Fraction of departing source packets that are taken over by the relay.

    Returns (1-p13)p12*pa / (p13 + (1-p13)p12*pa).

    Raises:
        DegenerateParameterError: If no source packet can ever depart
            (p13 = 0 and the relay never accepts).
    """
    relayed = (1.0 - channel.p13) * channel.p12 * policy.pa
    departing = channel.p13 + relayed
    if departing <= 0.0:
        raise DegenerateParameterError(
            "source can never deliver a packet (p13 = 0 and (1-p13)*p12*pa = 0)")
    return relayed / departing
