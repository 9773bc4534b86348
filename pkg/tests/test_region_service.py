import unittest

import numpy as np
import pytest

from src.core.errors import (CapacityExceededError, DegenerateParameterError,
                             InvalidParameterError, UnstableQueueError, ZeroServiceRateError)
from src.core.model import CooperationPolicy, RatePoint, SystemParams
from src.services.region_service import (DominantSystem, R1Case, R2Case, RegionSelector,
                                         SubregionId, boundary_lambda2, boundary_trace,
                                         closure_case, closure_contains, closure_policy,
                                         dominant1_q2_busy_prob, dominant2_q1_busy_prob,
                                         lambda1_max, optimal_pa, optimal_pa_table,
                                         r1_pa_contains, r2_pa_contains, region_fixed_pa_contains,
                                         relay_service_rate, relay_total_arrival_rate,
                                         segment_pa, service_rates_dominant, source_service_rate)

EXAMPLE = SystemParams.from_values(p13=0.5, p12=0.9, p23=0.8, q1=0.2, q2=0.3)
FULL = CooperationPolicy(1.0)
NONE = CooperationPolicy(0.0)

# lambda2 = 0 intercept of the closure: (1-q1)p23 * q1(p13+(1-p13)p12) / (q1p12(1-p13) + (1-q1)p23)
CLOSURE_INTERCEPT = 0.64 * 0.19 / 0.73


class TestServiceRates(unittest.TestCase):
    """
    Service and arrival rates of the two dominant systems.
    """
    def test_source_service_rate_empty_relay(self):
        self.assertAlmostEqual(source_service_rate(EXAMPLE, FULL, 0.0), 0.19)

    def test_source_service_rate_busy_relay(self):
        self.assertAlmostEqual(source_service_rate(EXAMPLE, NONE, 1.0), 0.07)
        always = SystemParams.from_values(p13=0.5, p12=0.9, p23=0.8, q1=0.2, q2=1.0)
        self.assertEqual(source_service_rate(always, FULL, 1.0), 0.0)

    def test_source_service_rate_rejects_bad_probability(self):
        with self.assertRaises(InvalidParameterError):
            source_service_rate(EXAMPLE, FULL, 1.5)

    def test_relay_service_rate(self):
        self.assertAlmostEqual(relay_service_rate(EXAMPLE, 0.0), 0.24)
        self.assertAlmostEqual(relay_service_rate(EXAMPLE, 1.0), 0.192)
        silent = SystemParams.from_values(p13=0.5, p12=0.9, p23=0.8, q1=0.2, q2=0.0)
        self.assertEqual(relay_service_rate(silent, 0.5), 0.0)

    def test_relay_total_arrival_rate(self):
        channel = EXAMPLE.channel
        self.assertAlmostEqual(relay_total_arrival_rate(RatePoint(0.0, 0.1), channel, FULL), 0.1)
        self.assertAlmostEqual(relay_total_arrival_rate(RatePoint(0.05, 0.05), channel, FULL),
                               0.05 + 0.05 * 0.45 / 0.95)
        self.assertAlmostEqual(relay_total_arrival_rate(RatePoint(0.2, 0.05), channel, NONE), 0.05)

    def test_dominant1_busy_probability(self):
        busy = dominant1_q2_busy_prob(RatePoint(0.05, 0.05), EXAMPLE, FULL)
        self.assertAlmostEqual(busy, 0.383772, places=6)
        self.assertEqual(dominant1_q2_busy_prob(RatePoint(0.0, 0.0), EXAMPLE, FULL), 0.0)

    def test_dominant1_boundary_is_unstable(self):
        with self.assertRaises(UnstableQueueError):
            dominant1_q2_busy_prob(RatePoint(0.0, 0.192), EXAMPLE, FULL)

    def test_dominant1_zero_service(self):
        silent = SystemParams.from_values(p13=0.5, p12=0.9, p23=0.8, q1=0.2, q2=0.0)
        with self.assertRaises(ZeroServiceRateError):
            dominant1_q2_busy_prob(RatePoint(0.0, 0.0), silent, FULL)

    def test_dominant2_busy_probability(self):
        busy = dominant2_q1_busy_prob(RatePoint(0.07, 0.0), EXAMPLE, FULL)
        self.assertAlmostEqual(busy, 0.07 / 0.133)
        with self.assertRaises(UnstableQueueError):
            dominant2_q1_busy_prob(RatePoint(0.2, 0.0), EXAMPLE, FULL)

    def test_service_rates_dominant(self):
        rates = RatePoint(0.05, 0.05)
        first = service_rates_dominant(EXAMPLE, FULL, rates, DominantSystem.SOURCE_DUMMY)
        self.assertAlmostEqual(first.mu2_q, 0.192)
        self.assertAlmostEqual(first.mu1, (0.7 * 0.383772 + 0.616228) * 0.19, places=6)
        second = service_rates_dominant(EXAMPLE, FULL, rates, DominantSystem.RELAY_DUMMY)
        self.assertAlmostEqual(second.mu1, 0.133)
        self.assertAlmostEqual(second.mu2_q, 0.3 * (1 - 0.2 * 0.05 / 0.133) * 0.8)
        self.assertAlmostEqual(first.lambda_q2, second.lambda_q2)


class TestFixedRegion(unittest.TestCase):
    """
    Membership in the stability region for a fixed acceptance probability.
    """
    def test_origin_is_inside(self):
        for pa in (0.0, 0.5, 1.0):
            policy = CooperationPolicy(pa)
            self.assertTrue(r1_pa_contains(RatePoint(0, 0), EXAMPLE, policy).inside)
            self.assertTrue(r2_pa_contains(RatePoint(0, 0), EXAMPLE, policy).inside)
            self.assertTrue(region_fixed_pa_contains(RatePoint(0, 0), EXAMPLE, policy).inside)

    def test_r1(self):
        self.assertTrue(r1_pa_contains(RatePoint(0.05, 0.10), EXAMPLE, FULL).inside)
        verdict = r1_pa_contains(RatePoint(0.05, 0.20), EXAMPLE, FULL)
        self.assertFalse(verdict.inside)
        self.assertAlmostEqual(verdict.margin, 0.192 - 0.2 - 0.05 * 0.45 / 0.95)

    def test_r2(self):
        self.assertTrue(r2_pa_contains(RatePoint(0.10, 0.10), EXAMPLE, FULL).inside)
        verdict = r2_pa_contains(RatePoint(0.14, 0.0), EXAMPLE, FULL)
        self.assertFalse(verdict.inside)
        self.assertAlmostEqual(verdict.margin, 0.133 - 0.14)

    def test_union(self):
        verdict = region_fixed_pa_contains(RatePoint(0.10, 0.12), EXAMPLE, FULL)
        self.assertTrue(verdict.inside)
        self.assertIn(SubregionId.R2_PA, verdict.satisfied_subregions())
        self.assertEqual([w.subregion for w in verdict.witnesses],
                         [SubregionId.R1_PA, SubregionId.R2_PA])
        self.assertFalse(region_fixed_pa_contains(RatePoint(0.2, 0.2), EXAMPLE, FULL).inside)

    def test_margin_sign_matches_membership(self):
        for point in (RatePoint(0.05, 0.05), RatePoint(0.1, 0.12), RatePoint(0.2, 0.2)):
            verdict = region_fixed_pa_contains(point, EXAMPLE, FULL)
            self.assertEqual(verdict.inside, verdict.margin > 0)


class TestClosure(unittest.TestCase):
    """
    Closure over every acceptance probability and its optimal value.
    """
    def test_closure_case_example(self):
        case = closure_case(EXAMPLE)
        self.assertIs(case.r1_case, R1Case.PA1)
        self.assertIs(case.r2_case, R2Case.SPLIT)
        self.assertAlmostEqual(case.thresholds[0], 0.8 / 1.3)
        self.assertAlmostEqual(case.thresholds[1], 0.5 / 1.3)

    def test_closure_case_ties(self):
        busy_source = SystemParams.from_values(p13=0.5, p12=0.9, p23=0.5, q1=0.9, q2=0.3)
        self.assertIs(closure_case(busy_source).r1_case, R1Case.PA0)
        tie = SystemParams.from_values(p13=0.5, p12=0.9, p23=0.5, q1=0.2, q2=0.5)
        self.assertIs(closure_case(tie).r2_case, R2Case.PA1)

    def test_closure_case_degenerate(self):
        dead = SystemParams.from_values(p13=0.0, p12=0.9, p23=0.0, q1=0.2, q2=0.3)
        with self.assertRaises(DegenerateParameterError):
            closure_case(dead)

    def test_closure_membership(self):
        verdict = closure_contains(RatePoint(0.10, 0.12), EXAMPLE)
        self.assertTrue(verdict.inside)
        self.assertIn(SubregionId.R222, verdict.satisfied_subregions())
        self.assertFalse(closure_contains(RatePoint(0.10, 0.20), EXAMPLE).inside)
        self.assertTrue(closure_contains(RatePoint(0, 0), EXAMPLE).inside)
        self.assertEqual([w.subregion for w in verdict.witnesses],
                         [SubregionId.R11, SubregionId.R221, SubregionId.R222])

    def test_partial_cooperation_strict_gain(self):
        # Thin triangle reachable only by an intermediate acceptance probability
        point = RatePoint(0.10, 0.159)
        self.assertFalse(region_fixed_pa_contains(point, EXAMPLE, NONE).inside)
        self.assertFalse(region_fixed_pa_contains(point, EXAMPLE, FULL).inside)
        self.assertTrue(closure_contains(point, EXAMPLE).inside)
        pa = optimal_pa(EXAMPLE, 0.10)
        self.assertTrue(region_fixed_pa_contains(point, EXAMPLE, CooperationPolicy(pa)).inside)

    def test_point_outside_no_cooperation(self):
        point = RatePoint(0.10, 0.14)
        self.assertFalse(region_fixed_pa_contains(point, EXAMPLE, NONE).inside)
        self.assertTrue(closure_contains(point, EXAMPLE).inside)
        policy = closure_policy(point, EXAMPLE)
        self.assertAlmostEqual(policy.pa, 0.03 / 0.063)
        self.assertTrue(region_fixed_pa_contains(point, EXAMPLE, policy).inside)

    def test_optimal_pa_breakpoints(self):
        self.assertEqual(optimal_pa(EXAMPLE, 0.05), 0.0)
        self.assertAlmostEqual(optimal_pa(EXAMPLE, 0.07), 0.0, places=9)
        self.assertAlmostEqual(optimal_pa(EXAMPLE, 0.1015), 0.5, places=9)
        self.assertAlmostEqual(optimal_pa(EXAMPLE, 0.133), 1.0, places=9)

    def test_optimal_pa_capacity(self):
        with self.assertRaises(CapacityExceededError):
            optimal_pa(EXAMPLE, 0.15)
        with self.assertRaises(InvalidParameterError):
            optimal_pa(EXAMPLE, 1.5)

    def test_optimal_pa_full_relay_case(self):
        strong_relay = SystemParams.from_values(p13=0.5, p12=0.9, p23=0.8, q1=0.2, q2=0.5)
        self.assertEqual(optimal_pa(strong_relay, 0.01), 1.0)
        # capacity q1(1-q2)[p13+(1-p13)p12] = 0.095
        self.assertEqual(optimal_pa(strong_relay, 0.095), 1.0)
        with self.assertRaises(CapacityExceededError):
            optimal_pa(strong_relay, 0.12)

    def test_optimal_pa_degenerate(self):
        deaf = SystemParams.from_values(p13=0.5, p12=0.0, p23=0.8, q1=0.2, q2=0.3)
        with self.assertRaises(DegenerateParameterError):
            optimal_pa(deaf, 0.1)

    def test_segment_pa(self):
        self.assertEqual(segment_pa(SubregionId.R11, EXAMPLE, 0.15), 1.0)
        self.assertEqual(segment_pa(SubregionId.R221, EXAMPLE, 0.05), 0.0)
        self.assertAlmostEqual(segment_pa(SubregionId.R222, EXAMPLE, 0.1015), 0.5)
        self.assertIsNone(segment_pa(None, EXAMPLE, 0.3))

    def test_optimal_pa_table(self):
        table = optimal_pa_table(EXAMPLE)
        self.assertAlmostEqual(table.no_relay_limit, 0.07)
        self.assertAlmostEqual(table.full_relay_onset, 0.133)
        self.assertAlmostEqual(table.relay_gain, 0.063)
        self.assertAlmostEqual(table.lambda1_max, CLOSURE_INTERCEPT, places=6)
        rows = table.rows()
        self.assertEqual(len(rows), 3)
        self.assertEqual(rows[0][1], "0")
        self.assertEqual(rows[2][1], "1")


class TestBoundary(unittest.TestCase):
    """
    Boundary tracing by bisection.
    """
    def test_lambda1_max(self):
        self.assertAlmostEqual(lambda1_max(EXAMPLE, RegionSelector.closure()), CLOSURE_INTERCEPT, places=6)
        self.assertAlmostEqual(lambda1_max(EXAMPLE, RegionSelector.fixed(0.0)), 0.1, places=6)
        self.assertAlmostEqual(lambda1_max(EXAMPLE, RegionSelector.fixed(1.0)), CLOSURE_INTERCEPT, places=6)

    def test_closure_vertices(self):
        closure = RegionSelector.closure()
        self.assertAlmostEqual(boundary_lambda2(EXAMPLE, closure, 0.0)[0], 0.24, places=6)
        self.assertAlmostEqual(boundary_lambda2(EXAMPLE, closure, 0.07)[0], 0.192, places=6)
        self.assertAlmostEqual(boundary_lambda2(EXAMPLE, closure, 0.133)[0], 0.129, places=6)
        self.assertAlmostEqual(boundary_lambda2(EXAMPLE, closure, 0.10)[0], 0.162, places=6)

    def test_boundary_segments(self):
        closure = RegionSelector.closure()
        self.assertIs(boundary_lambda2(EXAMPLE, closure, 0.03)[1], SubregionId.R221)
        self.assertIs(boundary_lambda2(EXAMPLE, closure, 0.10)[1], SubregionId.R222)
        self.assertIs(boundary_lambda2(EXAMPLE, closure, 0.15)[1], SubregionId.R11)
        _, label = boundary_lambda2(EXAMPLE, closure, 0.07)
        self.assertAlmostEqual(segment_pa(label, EXAMPLE, 0.07), 0.0, places=9)

    def test_outside_column(self):
        self.assertEqual(boundary_lambda2(EXAMPLE, RegionSelector.closure(), 0.2), (0.0, None))

    def test_trace_shape(self):
        trace = boundary_trace(EXAMPLE, RegionSelector.closure(), 50)
        self.assertEqual(len(trace.points), 50)
        lambda1s = [p.lambda1 for p in trace.points]
        self.assertEqual(lambda1s, sorted(lambda1s))
        self.assertEqual(lambda1s[0], 0.0)
        self.assertAlmostEqual(lambda1s[-1], CLOSURE_INTERCEPT, places=6)
        self.assertAlmostEqual(trace.points[-1].lambda2, 0.0, places=6)

    def test_fixed_trace_repeats_pa(self):
        trace = boundary_trace(EXAMPLE, RegionSelector.fixed(0.25), 10)
        self.assertEqual(set(trace.pa_star_values), {0.25})

    def test_trace_resolution(self):
        with self.assertRaises(InvalidParameterError):
            boundary_trace(EXAMPLE, RegionSelector.closure(), 1)


# --- Properties ---

def test_table_regimes_at_sampled_lambda1():
    closure = RegionSelector.closure()
    for lambda1 in np.linspace(0.0, 0.1665, 100):
        lambda1 = float(lambda1)
        if lambda1 <= 0.07:
            assert optimal_pa(EXAMPLE, lambda1) == pytest.approx(0.0, abs=1e-9)
        elif lambda1 < 0.133:
            assert optimal_pa(EXAMPLE, lambda1) == pytest.approx((lambda1 - 0.07) / 0.063, abs=1e-9)
        else:
            # Beyond the relay-dominant range the closure boundary is full cooperation
            _, label = boundary_lambda2(EXAMPLE, closure, lambda1)
            assert segment_pa(label, EXAMPLE, lambda1) == 1.0

def test_optimal_pa_nondecreasing_in_lambda1():
    values = [optimal_pa(EXAMPLE, float(x)) for x in np.linspace(0.0, 0.133, 200)]
    assert all(b >= a for a, b in zip(values, values[1:]))

def test_optimal_pa_nonincreasing_in_q1():
    values = []
    for q1 in (0.2, 0.25, 0.3):
        params = SystemParams.from_values(p13=0.5, p12=0.9, p23=0.8, q1=q1, q2=0.3)
        assert closure_case(params).r2_case is R2Case.SPLIT
        values.append(optimal_pa(params, 0.10))
    assert values == sorted(values, reverse=True)
    assert values[0] > values[-1]

def test_rewritten_optimal_pa_form():
    q1, q2, p13, p12 = 0.2, 0.3, 0.5, 0.9
    for lambda1 in (0.08, 0.1, 0.12):
        rewritten = (lambda1 / (q1 * (1 - q2)) - p13) / ((1 - p13) * p12)
        assert optimal_pa(EXAMPLE, lambda1) == pytest.approx(rewritten)

def test_closure_boundary_dominates_fixed_boundaries():
    closure = RegionSelector.closure()
    for lambda1 in np.linspace(0.0, 0.16, 17):
        top, _ = boundary_lambda2(EXAMPLE, closure, float(lambda1))
        for pa in (0.0, 0.25, 0.5, 0.75, 1.0):
            fixed, _ = boundary_lambda2(EXAMPLE, RegionSelector.fixed(pa), float(lambda1))
            assert top >= fixed - 1e-8

def test_boundary_is_reached_by_segment_pa():
    trace = boundary_trace(EXAMPLE, RegionSelector.closure(), 60)
    for point, pa in zip(trace.points, trace.pa_star_values):
        if point.lambda2 <= 1e-6:
            continue
        below = RatePoint(point.lambda1, point.lambda2 - 1e-6)
        assert region_fixed_pa_contains(below, EXAMPLE, CooperationPolicy(pa)).inside

def _random_params(rng, low, high):
    return SystemParams.from_values(*rng.uniform(low, high, size=5))

def test_fixed_regions_are_contained_in_closure():
    rng = np.random.Generator(np.random.PCG64(2024))
    for _ in range(10_000):
        params = _random_params(rng, 0.05, 0.95)
        policy = CooperationPolicy(float(rng.uniform()))
        point = RatePoint(*rng.uniform(0.0, 0.4, size=2))
        if region_fixed_pa_contains(point, params, policy).inside:
            assert closure_contains(point, params).inside, (params, policy, point)

def _oracle_inside(point, params, grid):
    return any(region_fixed_pa_contains(point, params, CooperationPolicy(float(pa))).inside
               for pa in grid)

def test_closure_matches_pa_grid_oracle_example_params():
    rng = np.random.Generator(np.random.PCG64(7))
    grid = np.linspace(0.0, 1.0, 1001)
    checked = 0
    for _ in range(300):
        point = RatePoint(*rng.uniform(0.0, 0.25, size=2))
        verdict = closure_contains(point, EXAMPLE)
        if abs(verdict.margin) <= 1e-3:
            continue
        checked += 1
        assert _oracle_inside(point, EXAMPLE, grid) == verdict.inside, point
    assert checked > 200

def test_closure_matches_pa_grid_oracle_random_params():
    rng = np.random.Generator(np.random.PCG64(11))
    grid = np.linspace(0.0, 1.0, 1001)
    for _ in range(150):
        params = _random_params(rng, 0.2, 0.8)
        point = RatePoint(*rng.uniform(0.0, 0.3, size=2))
        verdict = closure_contains(point, params)
        # The grid only approximates intermediate pa, so stay clear of the boundary
        if abs(verdict.margin) <= 5e-3:
            continue
        assert _oracle_inside(point, params, grid) == verdict.inside, (params, point)

def test_membership_is_pure():
    point = RatePoint(0.1, 0.14)
    assert closure_contains(point, EXAMPLE) == closure_contains(point, EXAMPLE)
