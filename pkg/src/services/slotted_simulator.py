"""
Slotted Simulator Module.

Slot-by-slot Monte Carlo model of the source/relay/destination network on a
collision channel with erasures. Besides the original protocol it runs the
two dominant systems used in the analysis (a node sends dummy packets while
its queue is empty) and a saturated-source variant for measuring the source
service rate.

Within a slot: transmission decisions from start-of-slot queues, channel
resolution, queue updates, then exogenous arrivals (first eligible in the
next slot). All eight uniforms of a slot are drawn whether or not they are
needed, so every mode consumes the stream identically.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Deque, List, Optional, Tuple

from src.core.model import (CooperationPolicy, RatePoint, SystemParams, require_valid,
                            validate_params, validate_policy, validate_rates)
from src.services import rng as draws
from src.services.rng import SlotRng

logger = logging.getLogger(__name__)


class SimMode(Enum):
    ORIGINAL = "original"
    DOMINANT_SOURCE_DUMMY = "dominant-source-dummy"
    DOMINANT_RELAY_DUMMY = "dominant-relay-dummy"
    SOURCE_SATURATED = "source-saturated"


@dataclass(frozen=True)
class SimConfig:
    params: SystemParams
    policy: CooperationPolicy
    rates: RatePoint
    mode: SimMode = SimMode.ORIGINAL
    n_slots: int = 1_000_000
    seed: int = 1
    sample_stride: int = 100

    def __post_init__(self):
        if self.n_slots < 1:
            raise ValueError("n_slots must be at least 1")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be at least 1")


@dataclass(frozen=True)
class SlotOutcome:
    s_transmitted: bool
    r_transmitted: bool
    collision: bool
    s_to_d: bool
    s_to_r_accepted: bool
    r_to_d: bool
    s_arrival: bool
    r_arrival: bool
    s_dummy: bool
    r_dummy: bool

    FIELDS = ("s_transmitted", "r_transmitted", "collision", "s_to_d", "s_to_r_accepted",
              "r_to_d", "s_arrival", "r_arrival", "s_dummy", "r_dummy")

    def as_tuple(self) -> Tuple[bool, ...]:
        return tuple(getattr(self, name) for name in self.FIELDS)


@dataclass
class SimStats:
    """
    Counters accumulated over a run.

    Source deliveries count direct source-to-destination successes; relayed
    deliveries count source packets the relay later delivered. Queue-length
    samples are (slot, q1_len, q2_len) taken at the start of every
    `sample_stride`-th slot.
    """
    source_arrivals: int = 0
    relay_arrivals: int = 0
    source_dummies: int = 0
    relay_dummies: int = 0
    source_deliveries: int = 0
    relayed_deliveries: int = 0
    relay_exogenous_deliveries: int = 0
    relay_admissions: int = 0
    collisions: int = 0
    source_busy_slots: int = 0
    relay_busy_slots: int = 0
    samples: List[Tuple[int, int, int]] = field(default_factory=list)
    elapsed_slots: int = 0
    final_q1: int = 0
    final_q2: int = 0
    final_relay_endogenous: int = 0

    def _per_slot(self, count: int) -> float:
        return count / self.elapsed_slots if self.elapsed_slots else 0.0

    @property
    def source_departure_rate(self) -> float:
        """Empirical source service rate: packets leaving the source queue per slot."""
        return self._per_slot(self.source_deliveries + self.relay_admissions)

    @property
    def source_flow_delivery_rate(self) -> float:
        """Source traffic reaching the destination, directly or through the relay."""
        return self._per_slot(self.source_deliveries + self.relayed_deliveries)

    @property
    def relay_flow_delivery_rate(self) -> float:
        return self._per_slot(self.relay_exogenous_deliveries)

    @property
    def relay_delivery_rate(self) -> float:
        return self._per_slot(self.relayed_deliveries + self.relay_exogenous_deliveries)

    @property
    def source_busy_fraction(self) -> float:
        return self._per_slot(self.source_busy_slots)

    @property
    def relay_busy_fraction(self) -> float:
        return self._per_slot(self.relay_busy_slots)

    def summary(self) -> str:
        lines = [
            f"elapsed_slots={self.elapsed_slots}",
            f"source_arrivals={self.source_arrivals}",
            f"relay_arrivals={self.relay_arrivals}",
            f"source_deliveries={self.source_deliveries}",
            f"relay_admissions={self.relay_admissions}",
            f"relayed_deliveries={self.relayed_deliveries}",
            f"relay_exogenous_deliveries={self.relay_exogenous_deliveries}",
            f"source_dummies={self.source_dummies}",
            f"relay_dummies={self.relay_dummies}",
            f"collisions={self.collisions}",
            f"final_q1={self.final_q1}",
            f"final_q2={self.final_q2}",
            f"source_departure_rate={self.source_departure_rate:.9f}",
            f"source_flow_delivery_rate={self.source_flow_delivery_rate:.9f}",
            f"relay_flow_delivery_rate={self.relay_flow_delivery_rate:.9f}",
            f"relay_delivery_rate={self.relay_delivery_rate:.9f}",
            f"source_busy_fraction={self.source_busy_fraction:.9f}",
            f"relay_busy_fraction={self.relay_busy_fraction:.9f}",
        ]
        return "\n".join(lines)


@dataclass
class SimState:
    """
    Full slot-level state.

    `relay_tags` mirrors the relay FIFO: True marks a packet taken over from
    the source, False an exogenous relay packet. In saturated mode the source
    backlog is unbounded and `q1_len` is not used.
    """
    rng: SlotRng
    q1_len: int = 0
    slot: int = 0
    relay_tags: Deque[bool] = field(default_factory=deque)
    stats: SimStats = field(default_factory=SimStats)

    @property
    def q2_len(self) -> int:
        return len(self.relay_tags)

    @classmethod
    def initial(cls, config: SimConfig) -> "SimState":
        return cls(rng=SlotRng(config.seed))


def step(state: SimState, config: SimConfig) -> Tuple[SimState, SlotOutcome]:
    """
    Advances the network by one slot.

    The state is updated in place and returned alongside the slot outcome.
    """
    u = state.rng.next_slot()
    mode = config.mode
    channel, access, pa = config.params.channel, config.params.access, config.policy.pa
    stats = state.stats

    saturated = mode is SimMode.SOURCE_SATURATED
    s_backlogged = saturated or state.q1_len > 0
    r_backlogged = state.q2_len > 0

    if state.slot % config.sample_stride == 0:
        stats.samples.append((state.slot, state.q1_len, state.q2_len))
    if s_backlogged:
        stats.source_busy_slots += 1
    if r_backlogged:
        stats.relay_busy_slots += 1

    s_transmitted = u[draws.S_ATTEMPT] < access.q1 and (
        s_backlogged or mode is SimMode.DOMINANT_SOURCE_DUMMY)
    r_transmitted = u[draws.R_ATTEMPT] < access.q2 and (
        r_backlogged or mode is SimMode.DOMINANT_RELAY_DUMMY)
    s_dummy = s_transmitted and not s_backlogged
    r_dummy = r_transmitted and not r_backlogged
    collision = s_transmitted and r_transmitted

    s_alone = s_transmitted and not r_transmitted and not s_dummy
    s_to_d = s_alone and u[draws.S_TO_D] < channel.p13
    s_to_r_accepted = (s_alone and not s_to_d
                       and u[draws.S_TO_R] < channel.p12 and u[draws.ACCEPT] < pa)
    r_to_d = (r_transmitted and not s_transmitted and not r_dummy
              and u[draws.R_TO_D] < channel.p23)

    if collision:
        stats.collisions += 1
    if s_dummy:
        stats.source_dummies += 1
    if r_dummy:
        stats.relay_dummies += 1

    if s_to_d or s_to_r_accepted:
        if not saturated:
            state.q1_len -= 1
        if s_to_d:
            stats.source_deliveries += 1
    if r_to_d:
        if state.relay_tags.popleft():
            stats.relayed_deliveries += 1
        else:
            stats.relay_exogenous_deliveries += 1
    if s_to_r_accepted:
        state.relay_tags.append(True)
        stats.relay_admissions += 1

    s_arrival = not saturated and u[draws.S_ARRIVAL] < config.rates.lambda1
    r_arrival = u[draws.R_ARRIVAL] < config.rates.lambda2
    if s_arrival:
        state.q1_len += 1
        stats.source_arrivals += 1
    if r_arrival:
        state.relay_tags.append(False)
        stats.relay_arrivals += 1

    state.slot += 1
    stats.elapsed_slots = state.slot

    outcome = SlotOutcome(
        s_transmitted=s_transmitted,
        r_transmitted=r_transmitted,
        collision=collision,
        s_to_d=s_to_d,
        s_to_r_accepted=s_to_r_accepted,
        r_to_d=r_to_d,
        s_arrival=s_arrival,
        r_arrival=r_arrival,
        s_dummy=s_dummy,
        r_dummy=r_dummy,
    )
    return state, outcome


def run(config: SimConfig,
        on_slot: Optional[Callable[[int, SlotOutcome], None]] = None) -> SimStats:
    """
    Simulates `config.n_slots` slots from empty queues.

    Args:
        config (SimConfig): The run to perform; identical configs give identical stats.
        on_slot (Callable, optional): Called with (slot index, outcome) after every slot.

    Returns:
        SimStats: Counters of the run, including final queue lengths.
    """
    require_valid(validate_params(config.params)
                  .merge(validate_policy(config.policy))
                  .merge(validate_rates(config.rates)))
    logger.debug("simulating %d slots, mode=%s, rates=(%s, %s), pa=%s, seed=%d",
                 config.n_slots, config.mode.value, config.rates.lambda1,
                 config.rates.lambda2, config.policy.pa, config.seed)

    state = SimState.initial(config)
    for _ in range(config.n_slots):
        slot = state.slot
        state, outcome = step(state, config)
        if on_slot is not None:
            on_slot(slot, outcome)

    stats = state.stats
    stats.final_q1 = state.q1_len
    stats.final_q2 = state.q2_len
    stats.final_relay_endogenous = sum(1 for tag in state.relay_tags if tag)
    logger.debug("finished: q1=%d q2=%d", stats.final_q1, stats.final_q2)
    return stats


def measure_saturated_service_rate(params: SystemParams, policy: CooperationPolicy,
                                   lambda2: float, n_slots: int, seed: int) -> float:
    """Empirical source service rate when the source always has a packet to send."""
    config = SimConfig(params=params, policy=policy, rates=RatePoint(0.0, lambda2),
                       mode=SimMode.SOURCE_SATURATED, n_slots=n_slots, seed=seed)
    return run(config).source_departure_rate
