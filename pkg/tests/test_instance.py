import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msd.errors import (
    InfeasibleParamsError,
    InstanceParseError,
    SchemaVersionError,
    UnknownReferenceError,
)
from msd.instance import (
    GridCell,
    Instance,
    Line,
    SensingInterval,
    Trip,
    coverable_grids,
    generate_synthetic,
    incidence_matrix,
    instance_json,
    load_instance,
    save_instance,
    validate_instance,
)

from helpers import make_intervals, single_cell_instance

DATA = Path(__file__).parent / "data"


def minimal_instance() -> Instance:
    trip = Trip(id=0, line_id=0, depart_terminal="A", arrive_terminal="B",
                start=420, duration=30, route=((0, 0.0),))
    return Instance(
        mesh=(GridCell(id=0, row=0, col=0, weight=1.0),),
        intervals=make_intervals(2, 60, start=420),
        lines=(Line(id=0, terminals=("A", "B"), deadhead=(), trips=(trip,)),),
        sensor_budget=1,
        gamma=1.0,
    )


class TestSerialization:
    def test_roundtrip_structural_equality(self, tmp_path, small4):
        path = tmp_path / "copy.json"
        save_instance(small4, path)
        assert load_instance(path) == small4

    def test_save_is_deterministic(self, small4):
        assert instance_json(small4) == instance_json(small4)

    def test_minimal_instance_roundtrip(self, tmp_path):
        inst = minimal_instance()
        path = tmp_path / "mini.json"
        save_instance(inst, path)
        loaded = load_instance(path)
        assert loaded == inst
        assert len(coverable_grids(loaded)) == 1

    def test_generator_is_byte_deterministic(self):
        a = generate_synthetic({"seed": 4})
        b = generate_synthetic({"seed": 4})
        assert instance_json(a) == instance_json(b)

    def test_bundled_fixture_matches_generator(self, small4):
        # tests/data/small4.json is frozen output of generate_synthetic(seed=4)
        assert small4 == generate_synthetic({"seed": 4})

    def test_bundled_fixture_counts(self, small4):
        assert len(small4.lines) == 4
        assert len(small4.trips()) == 48

    def test_malformed_json_raises_parse_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(InstanceParseError):
            load_instance(path)

    def test_wrong_schema_version_rejected(self, tmp_path, small4):
        doc = json.loads(instance_json(small4))
        doc["schema_version"] = "99"
        path = tmp_path / "future.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(SchemaVersionError):
            load_instance(path)

    def test_unknown_grid_reference_rejected(self, tmp_path, small4):
        doc = json.loads(instance_json(small4))
        doc["lines"][0]["trips"][0]["route"][0][0] = 999
        path = tmp_path / "badgrid.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(UnknownReferenceError):
            load_instance(path)

    def test_unknown_terminal_rejected(self, tmp_path, small4):
        doc = json.loads(instance_json(small4))
        doc["lines"][0]["trips"][0]["depart_terminal"] = "nowhere"
        path = tmp_path / "badterm.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(UnknownReferenceError):
            load_instance(path)


class TestValidation:
    def test_valid_instance_has_empty_report(self, small4):
        report = validate_instance(small4)
        assert report.ok
        assert report.violations == ()

    def test_grid_weight_sum_violation(self):
        inst = minimal_instance()
        bad = dataclasses.replace(
            inst, mesh=(dataclasses.replace(inst.mesh[0], weight=0.9),)
        )
        report = validate_instance(bad)
        assert not report.ok
        assert any("grid weight sum" in v for v in report.violations)

    def test_noncontiguous_intervals_flagged(self):
        inst = minimal_instance()
        gap = (
            SensingInterval(index=0, start=420, end=480, weight=0.5),
            SensingInterval(index=1, start=500, end=560, weight=0.5),
        )
        report = validate_instance(dataclasses.replace(inst, intervals=gap))
        assert any("contiguous" in v for v in report.violations)

    def test_unequal_interval_lengths_flagged(self):
        inst = minimal_instance()
        uneven = (
            SensingInterval(index=0, start=420, end=480, weight=0.5),
            SensingInterval(index=1, start=480, end=510, weight=0.5),
        )
        report = validate_instance(dataclasses.replace(inst, intervals=uneven))
        assert any("lengths differ" in v for v in report.violations)

    def test_route_fraction_rules(self):
        inst = minimal_instance()
        line = inst.lines[0]
        trip = line.trips[0]
        for route in (((0, 0.25),), ((0, 0.0), (0, 0.0)), ((0, 0.0), (0, 1.0))):
            bad_trip = dataclasses.replace(trip, route=route)
            bad = dataclasses.replace(
                inst, lines=(dataclasses.replace(line, trips=(bad_trip,)),)
            )
            assert not validate_instance(bad).ok

    def test_duplicate_trip_ids_flagged(self):
        inst = minimal_instance()
        line = inst.lines[0]
        twin = dataclasses.replace(line.trips[0], start=600)
        bad = dataclasses.replace(
            inst, lines=(dataclasses.replace(line, trips=(line.trips[0], twin)),)
        )
        assert any("not unique" in v for v in validate_instance(bad).violations)

    def test_gamma_and_budget_bounds(self):
        inst = minimal_instance()
        assert not validate_instance(dataclasses.replace(inst, gamma=0.0)).ok
        assert not validate_instance(dataclasses.replace(inst, gamma=1.5)).ok
        assert not validate_instance(dataclasses.replace(inst, sensor_budget=-1)).ok

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), lines=st.integers(1, 5),
           trips=st.integers(1, 10))
    def test_generator_output_always_validates(self, seed, lines, trips):
        inst = generate_synthetic(
            {"seed": seed, "n_lines": lines, "trips_per_line": trips}
        )
        assert validate_instance(inst).ok


class TestGenerator:
    def test_infeasible_horizon_raises(self):
        with pytest.raises(InfeasibleParamsError):
            generate_synthetic(
                {"seed": 0, "trips_per_line": 200, "horizon": (420, 480)}
            )

    def test_indivisible_interval_raises(self):
        with pytest.raises(InfeasibleParamsError):
            generate_synthetic({"seed": 0, "interval_minutes": 70})

    def test_single_cell_mesh_raises(self):
        with pytest.raises(InfeasibleParamsError):
            generate_synthetic({"seed": 0, "mesh_dims": (1, 1)})

    def test_requested_sizes_are_honored(self):
        inst = generate_synthetic({"seed": 7, "n_lines": 3, "trips_per_line": 5})
        assert len(inst.lines) == 3
        assert all(len(line.trips) == 5 for line in inst.lines)


class TestIncidence:
    def test_single_line_column(self):
        inst = single_cell_instance([(1, "A", "B", 0, 30)])
        mat = incidence_matrix(inst)
        assert mat.shape == (1, 1)
        assert mat[0, 0] == 1

    def test_columns_match_route_recount(self, small4):
        mat = incidence_matrix(small4)
        assert mat.dtype == np.int8
        for col, line in enumerate(small4.lines):
            visited = {g for t in line.trips for g, _ in t.route}
            assert mat[:, col].sum() == len(visited)
            assert all(mat[g, col] == 1 for g in visited)

    def test_order_independent_within_line(self, small4):
        shuffled_lines = tuple(
            dataclasses.replace(line, trips=tuple(reversed(line.trips)))
            for line in small4.lines
        )
        shuffled = dataclasses.replace(small4, lines=shuffled_lines)
        assert np.array_equal(incidence_matrix(small4), incidence_matrix(shuffled))

    def test_entries_stay_binary_across_directions(self, small4):
        assert set(np.unique(incidence_matrix(small4))) <= {0, 1}

    def test_coverable_grids_sorted_and_consistent(self, small4):
        grids = coverable_grids(small4)
        assert list(grids) == sorted(grids)
        mat = incidence_matrix(small4)
        assert set(grids) == {g for g in range(mat.shape[0]) if mat[g].any()}
