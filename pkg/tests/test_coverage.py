import dataclasses
import math
import random

from hypothesis import given, settings
from hypothesis import strategies as st

from msd.coverage import (
    coverage_report,
    coverage_tensor,
    sensing_reward,
    trip_coverage,
)
from msd.instance import GridCell, Instance, Line, Trip

from helpers import make_intervals, uniform_mesh
from oracles import reward_of_pairs, ticked_pairs


def two_grid_instance(trip_start, trip_duration, route, n_intervals=15):
    trip = Trip(id=0, line_id=0, depart_terminal="A", arrive_terminal="B",
                start=trip_start, duration=trip_duration, route=route)
    return Instance(
        mesh=(GridCell(id=0, row=0, col=0, weight=0.5),
              GridCell(id=1, row=0, col=1, weight=0.5)),
        intervals=make_intervals(n_intervals, 60, start=420),
        lines=(Line(id=0, terminals=("A", "B"), deadhead=(), trips=(trip,)),),
        sensor_budget=1,
        gamma=1.0,
    )


class TestTripCoverage:
    def test_single_grid_single_interval(self):
        inst = two_grid_instance(420, 60, ((0, 0.0),))
        assert trip_coverage(inst.lines[0].trips[0], inst.intervals) == {
            (0, 0)
        }

    def test_boundary_entry_attributed_to_later_interval(self):
        # 7:30-8:30 over grids 0 then 1; grid 1 entered exactly at 8:00
        inst = two_grid_instance(450, 60, ((0, 0.0), (1, 0.5)))
        covered = trip_coverage(inst.lines[0].trips[0], inst.intervals)
        assert covered == {(0, 0), (1, 1)}

    def test_trip_ending_on_boundary_stays_in_earlier_interval(self):
        inst = two_grid_instance(420, 60, ((0, 0.0),))
        covered = trip_coverage(inst.lines[0].trips[0], inst.intervals)
        assert (0, 1) not in covered

    def test_trip_outside_horizon_is_empty(self):
        inst = two_grid_instance(0, 60, ((0, 0.0),))
        assert trip_coverage(inst.lines[0].trips[0], inst.intervals) == set()

    def test_trip_straddling_horizon_start_clips(self):
        inst = two_grid_instance(400, 60, ((0, 0.0),))
        assert trip_coverage(inst.lines[0].trips[0], inst.intervals) == {
            (0, 0)
        }

    @settings(max_examples=60, deadline=None)
    @given(
        start=st.integers(300, 1400),
        duration=st.integers(1, 180),
        cut=st.fractions(min_value=0, max_value=1).filter(lambda f: 0 < f < 1),
    )
    def test_matches_tick_simulator(self, start, duration, cut):
        route = ((0, 0.0), (1, float(cut)))
        inst = two_grid_instance(start, duration, route)
        trip = inst.lines[0].trips[0]
        assert trip_coverage(trip, inst.intervals) == ticked_pairs(
            inst, [trip]
        )

    @settings(max_examples=40, deadline=None)
    @given(
        start=st.integers(420, 1300),
        duration=st.integers(1, 120),
        fracs=st.lists(
            st.floats(0.01, 0.99, allow_nan=False), min_size=0, max_size=4,
            unique=True,
        ),
    )
    def test_occupancy_partitions_duration(self, start, duration, fracs):
        # cell spans must tile [start, end) with no gap or overlap
        from msd.coverage import TICKS_PER_MINUTE, _occupancy_ticks

        route = tuple((k, f) for k, f in enumerate([0.0] + sorted(fracs)))
        trip = Trip(id=0, line_id=0, depart_terminal="A", arrive_terminal="B",
                    start=start, duration=duration, route=route)
        spans = _occupancy_ticks(trip, TICKS_PER_MINUTE)
        assert spans[0][1] == start * TICKS_PER_MINUTE
        assert spans[-1][2] == (start + duration) * TICKS_PER_MINUTE
        for (_, _, end), (_, nxt, _) in zip(spans, spans[1:]):
            assert end == nxt


class TestSensingReward:
    def test_empty_set_is_zero(self, small4):
        assert sensing_reward([], small4.grid_weights(), small4.interval_weights()) == 0.0

    def test_full_coverage_is_one(self, small4):
        every = [(g.id, iv.index) for g in small4.mesh for iv in small4.intervals]
        value = sensing_reward(every, small4.grid_weights(), small4.interval_weights())
        assert math.isclose(value, 1.0, rel_tol=0, abs_tol=5e-9)

    def test_uniform_three_of_twelve_is_quarter(self):
        mesh = uniform_mesh(2, 2)
        intervals = make_intervals(3, 60)
        grid_w = {g.id: g.weight for g in mesh}
        slot_w = {iv.index: iv.weight for iv in intervals}
        covered = [(0, 0), (1, 1), (2, 2)]
        value = sensing_reward(covered, grid_w, slot_w)
        assert abs(value - 0.25) <= 1e-12

    def test_iteration_order_does_not_change_bits(self, small4):
        pairs = [(g.id, iv.index) for g in small4.mesh for iv in small4.intervals][:23]
        gw, sw = small4.grid_weights(), small4.interval_weights()
        forward = sensing_reward(pairs, gw, sw)
        rng = random.Random(9)
        for _ in range(5):
            rng.shuffle(pairs)
            assert sensing_reward(pairs, gw, sw) == forward

    def test_duplicate_pairs_count_once(self, small4):
        gw, sw = small4.grid_weights(), small4.interval_weights()
        g = small4.mesh[0].id
        assert sensing_reward([(g, 0), (g, 0)], gw, sw) == sensing_reward(
            [(g, 0)], gw, sw
        )


class TestCoverageReport:
    def test_composes_with_trip_coverage(self, small4):
        trip = small4.trips()[0]
        rep = coverage_report(small4, [trip])
        covered = trip_coverage(trip, small4.intervals)
        assert rep.covered == frozenset(covered)
        assert rep.reward == sensing_reward(
            covered, small4.grid_weights(), small4.interval_weights()
        )

    def test_overlapping_trips_cap_at_one(self):
        inst = two_grid_instance(420, 60, ((0, 0.0),))
        trip = inst.lines[0].trips[0]
        twin = dataclasses.replace(trip, id=1)
        rep = coverage_report(inst, [trip, twin])
        assert rep.raw_counts[(0, 0)] == 2
        assert rep.covered == frozenset({(0, 0)})

    def test_completely_covered_matches_per_grid_scan(self, small4):
        rep = coverage_report(small4, small4.trips())
        n_slots = len(small4.intervals)
        expected = tuple(
            sorted(
                g.id
                for g in small4.mesh
                if sum(1 for (gg, _) in rep.covered if gg == g.id) == n_slots
            )
        )
        assert tuple(sorted(rep.completely_covered)) == expected

    def test_time_average_counts_covered_slots(self, small4):
        rep = coverage_report(small4, small4.trips())
        for g in small4.mesh:
            slots = sum(1 for (gg, _) in rep.covered if gg == g.id)
            assert rep.time_average[g.id] == slots / len(small4.intervals)

    def test_reward_matches_tick_oracle_on_fixture(self, small4):
        trips = small4.trips()[::3]
        rep = coverage_report(small4, trips)
        assert rep.covered == frozenset(ticked_pairs(small4, trips))
        assert rep.reward == reward_of_pairs(small4, rep.covered)

    def test_monotone_in_trip_set(self, small4):
        trips = small4.trips()
        prev = 0.0
        for k in range(0, len(trips), 6):
            value = coverage_report(small4, trips[: k + 1]).reward
            assert value >= prev
            prev = value

    def test_submodular_marginals_by_sampling(self, small4):
        rng = random.Random(4)
        trips = small4.trips()
        tensor = coverage_tensor(small4)
        gw, sw = small4.grid_weights(), small4.interval_weights()

        def phi(ids):
            return sensing_reward(tensor.union(ids), gw, sw)

        for _ in range(30):
            a = set(rng.sample([t.id for t in trips], 4))
            b = a | set(rng.sample([t.id for t in trips], 6))
            x = rng.choice([t.id for t in trips if t.id not in b])
            gain_small = phi(a | {x}) - phi(a)
            gain_big = phi(b | {x}) - phi(b)
            assert gain_small >= gain_big - 1e-12


class TestCoverageTensor:
    def test_matches_per_trip_computation(self, small4):
        tensor = coverage_tensor(small4)
        for trip in small4.trips():
            assert tensor.pairs[trip.id] == frozenset(
                trip_coverage(trip, small4.intervals)
            )

    def test_union_over_ids(self, small4):
        tensor = coverage_tensor(small4)
        ids = [t.id for t in small4.trips()[:5]]
        manual = frozenset().union(*(tensor.pairs[i] for i in ids))
        assert tensor.union(ids) == manual
