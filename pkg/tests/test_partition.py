import dataclasses

import numpy as np
import pytest

from flexdisac import (Partition, Scenario, SolverSettings, exhaustive_search,
                       pattern_search)
from flexdisac.scenario import ChannelSet

from conftest import draw_channels, recheck_result, small_scenario

FAST = SolverSettings(max_inner_iters=60)


class TestExhaustiveSearch:
    def test_two_users_visits_four_partitions(self):
        sc = small_scenario(2, seed=90)
        ch = draw_channels(sc)
        res = exhaustive_search(ch, sc, FAST)
        assert res.diagnostics["partitions_visited"] == 4

    def test_refuses_large_networks(self):
        sc = small_scenario(13, seed=91)
        ch = draw_channels(sc)
        with pytest.raises(ValueError):
            exhaustive_search(ch, sc, FAST)

    def test_relabeling_invariance(self):
        sc = small_scenario(3, seed=92)
        ch = draw_channels(sc)
        base = exhaustive_search(ch, sc, FAST)
        # Swap users 0 and 2 wholesale; the best achievable rate may move to
        # the relabeled partition but its value must be unchanged.
        perm = {0: 2, 1: 1, 2: 0}
        h_uu = {perm[j]: {perm[i]: ch.h_uu[j][i] for i in ch.h_uu[j]}
                for j in ch.h_uu}
        swapped = ChannelSet(
            h_ul={perm[k]: v for k, v in ch.h_ul.items()},
            h_dl={perm[k]: v for k, v in ch.h_dl.items()},
            h_uu=h_uu, beta0=ch.beta0, beta_m=ch.beta_m,
            user_positions=ch.user_positions[[2, 1, 0]])
        relabeled = exhaustive_search(swapped, sc, FAST)
        assert relabeled.sum_rate == pytest.approx(base.sum_rate, rel=1e-6)
        assert tuple(sorted(perm[u] for u in base.partition.dl)) == relabeled.partition.dl

    def test_all_infeasible_is_outage(self):
        sc = small_scenario(2, seed=93, scnr_min=1e12)
        ch = draw_channels(sc)
        res = exhaustive_search(ch, sc, FAST)
        assert res.outage and res.sum_rate == 0.0


class TestPatternSearch:
    def test_strong_downlink_user_lands_downlink(self):
        sc = small_scenario(2, seed=94)
        ch = draw_channels(sc)
        boosted = ChannelSet(
            h_ul=ch.h_ul,
            h_dl={0: ch.h_dl[0] * 1000.0, 1: ch.h_dl[1]},
            h_uu=ch.h_uu, beta0=ch.beta0, beta_m=ch.beta_m,
            user_positions=ch.user_positions)
        best = exhaustive_search(boosted, sc, FAST)
        found = pattern_search(boosted, sc, FAST)
        assert 0 in best.partition.dl
        assert found.partition == best.partition
        assert found.sum_rate == pytest.approx(best.sum_rate, rel=1e-9)

    def test_never_beats_exhaustive(self):
        for trial in range(4):
            sc = small_scenario(3, seed=95)
            ch = draw_channels(sc, trial=trial)
            pat = pattern_search(ch, sc, FAST)
            exh = exhaustive_search(ch, sc, FAST)
            assert pat.sum_rate <= exh.sum_rate + 1e-9
            assert not recheck_result(ch, pat, sc)
            assert not recheck_result(ch, exh, sc)

    def test_visit_budget(self):
        sc = small_scenario(4, seed=96)
        ch = draw_channels(sc)
        res = pattern_search(ch, sc, FAST)
        assert res.diagnostics["partitions_visited"] <= 1 + sc.num_users ** 2

    def test_deterministic(self):
        sc = small_scenario(3, seed=97)
        ch = draw_channels(sc)
        a = pattern_search(ch, sc, FAST)
        b = pattern_search(ch, sc, FAST)
        assert a.partition == b.partition
        assert a.sum_rate == b.sum_rate

    def test_all_infeasible_is_outage(self):
        sc = small_scenario(2, seed=98, scnr_min=1e12)
        ch = draw_channels(sc)
        res = pattern_search(ch, sc, FAST)
        assert res.outage and res.sum_rate == 0.0

    def test_infeasible_heuristic_start_recovers_via_all_downlink(self):
        # A floor reachable only without uplink interference: the heuristic
        # start (mixed) fails initialization but the all-DL set succeeds.
        sc = small_scenario(3, seed=99)
        ch = draw_channels(sc)
        from flexdisac.initializer import initialize
        from flexdisac.partition import _heuristic_partition
        part = _heuristic_partition(ch, sc)
        all_dl = Partition.from_dl(range(3), 3)
        lo = initialize(ch, part, sc, FAST).scnr
        hi = initialize(ch, all_dl, sc, FAST).scnr
        if not lo < hi:
            pytest.skip("instance does not separate the two starts")
        floor = 0.5 * (lo + hi)
        sc2 = dataclasses.replace(sc, scnr_min=floor)
        res = pattern_search(ch, sc2, FAST)
        assert not res.outage
        assert res.partition.dl == (0, 1, 2)
