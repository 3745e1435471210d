import math

import pytest

from msd.errors import SolverLimitError
from msd.instance import coverable_grids, generate_synthetic
from msd.select import select_lines_full, select_lines_partial
from msd.solver import BipLimits

from helpers import cover_instance
from oracles import best_cover_size


class TestFullCover:
    def test_matches_subset_enumeration_on_generated(self):
        for seed in range(8):
            inst = generate_synthetic(
                {"seed": seed, "n_lines": 7, "trips_per_line": 4,
                 "mesh_dims": (4, 4)}
            )
            sel = select_lines_full(inst)
            want = best_cover_size(inst, len(coverable_grids(inst)))
            assert len(sel.chosen_line_ids) == want
            assert sel.status == "optimal"
            assert sel.gap == 0.0

    def test_chosen_lines_actually_cover(self, small4):
        sel = select_lines_full(small4)
        assert sel.covered_grids == sel.coverable == coverable_grids(small4)
        chosen = set(sel.chosen_line_ids)
        reached = {
            g
            for line in small4.lines
            if line.id in chosen
            for t in line.trips
            for g, _ in t.route
        }
        assert reached == set(sel.coverable)

    def test_redundant_line_left_out(self):
        inst = cover_instance([(0, 1, 2), (0, 1), (2,)])
        sel = select_lines_full(inst)
        assert sel.chosen_line_ids == (0,)

    def test_tie_break_prefers_low_line_ids(self):
        # identical twin lines: only the earlier id should ever be picked
        inst = cover_instance([(0, 1), (0, 1), (2,), (2,)])
        sel = select_lines_full(inst)
        assert sel.chosen_line_ids == (0, 2)

    def test_fractional_cover_cycle_is_still_integral(self):
        inst = cover_instance([(0, 1), (1, 2), (0, 2)])
        sel = select_lines_full(inst)
        assert len(sel.chosen_line_ids) == 2
        assert sel.covered_grids == (0, 1, 2)


class TestPartialCover:
    @pytest.mark.parametrize("gamma", (0.6, 0.8))
    def test_matches_subset_enumeration(self, gamma):
        for seed in range(6):
            inst = generate_synthetic(
                {"seed": seed, "n_lines": 7, "trips_per_line": 4,
                 "mesh_dims": (4, 4)}
            )
            sel = select_lines_partial(inst, gamma=gamma)
            required = math.ceil(gamma * len(coverable_grids(inst)))
            assert len(sel.covered_grids) >= required
            assert len(sel.chosen_line_ids) == best_cover_size(inst, required)

    def test_gamma_one_matches_full(self, small4):
        full = select_lines_full(small4)
        partial = select_lines_partial(small4, gamma=1.0)
        assert len(partial.chosen_line_ids) == len(full.chosen_line_ids)
        assert set(partial.covered_grids) >= set(full.coverable)

    def test_defaults_to_instance_gamma(self):
        inst = cover_instance([(0, 1), (2,), (3,)], gamma=0.5)
        sel = select_lines_partial(inst)
        assert sel.gamma == 0.5
        assert sel.chosen_line_ids == (0,)  # 2 of 4 grids suffice

    def test_lower_gamma_never_needs_more_lines(self):
        inst = generate_synthetic(
            {"seed": 11, "n_lines": 7, "trips_per_line": 4,
             "mesh_dims": (4, 4)}
        )
        sizes = [
            len(select_lines_partial(inst, gamma=g).chosen_line_ids)
            for g in (1.0, 0.8, 0.6, 0.4, 0.2)
        ]
        assert sizes == sorted(sizes, reverse=True)

    @pytest.mark.parametrize("gamma", (0.0, -0.2, 1.0001))
    def test_gamma_out_of_range_rejected(self, small4, gamma):
        with pytest.raises(ValueError, match="gamma"):
            select_lines_partial(small4, gamma=gamma)


class TestLimits:
    def test_limit_without_incumbent_raises(self):
        # cyclic 2-of-3 cover keeps the root relaxation fractional
        inst = cover_instance([(0, 1), (1, 2), (0, 2)])
        with pytest.raises(SolverLimitError):
            select_lines_full(inst, limits=BipLimits(node_cap=1))

    def test_generous_limit_is_harmless(self, small4):
        sel = select_lines_full(small4, limits=BipLimits(node_cap=100_000))
        assert sel.status == "optimal"
