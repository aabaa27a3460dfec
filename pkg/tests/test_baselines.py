import numpy as np
import pytest

from flexdisac import (Partition, Scenario, SolverSettings, hd_solve, sum_rate,
                       zf_solve)
from flexdisac.baselines import hd_partition
from flexdisac.partition import evaluate_partition
from flexdisac.scenario import ChannelSet

from conftest import draw_channels, recheck_constraints, small_scenario

FAST = SolverSettings(max_inner_iters=60)


class TestHdSolve:
    def test_partition_by_downlink_gain(self):
        sc = small_scenario(4, seed=100)
        ch = draw_channels(sc)
        part = hd_partition(ch, sc)
        assert len(part.dl) == 2
        gains = {k: np.linalg.norm(ch.h_dl[k]) for k in range(4)}
        assert min(gains[k] for k in part.dl) >= max(gains[k] for k in part.ul)

    def test_rate_is_time_shared_phase_average(self):
        sc = small_scenario(3, seed=101)
        ch = draw_channels(sc)
        res = hd_solve(ch, sc, FAST)
        d = res.diagnostics
        assert res.sum_rate == pytest.approx(
            0.5 * d["dl_phase_rate"] + 0.5 * d["ul_phase_rate"], rel=1e-12)
        # DL phase must equal a direct DL-only optimization at full time.
        part = hd_partition(ch, sc)
        direct = evaluate_partition(ch, Partition(dl=part.dl, ul=()), sc, FAST)
        assert d["dl_phase_rate"] == pytest.approx(direct.sum_rate, rel=1e-9)

    def test_ul_phase_scnr_recorded_as_zero(self):
        sc = small_scenario(3, seed=102)
        ch = draw_channels(sc)
        res = hd_solve(ch, sc, FAST)
        assert res.diagnostics["ul_phase_scnr"] == 0.0

    def test_phase_constraints_hold(self):
        sc = small_scenario(4, seed=103)
        ch = draw_channels(sc)
        res = hd_solve(ch, sc, FAST)
        assert res.feasible
        part = res.partition
        # DL phase: BS power and SCNR with no uplink interference.
        dl_only = Partition(dl=part.dl, ul=())
        assert not recheck_constraints(ch, res.beams, dl_only, sc)
        # UL phase: per-user powers only.
        ul_only = Partition(dl=(), ul=part.ul)
        assert not recheck_constraints(ch, res.beams, ul_only, sc, gamma_min=0.0)

    def test_dl_phase_infeasible_is_outage(self):
        sc = small_scenario(3, seed=104, scnr_min=1e12)
        ch = draw_channels(sc)
        res = hd_solve(ch, sc, FAST)
        assert res.outage


class TestZfSolve:
    def test_bs_power_met_with_equality(self):
        sc = small_scenario(4, seed=105)
        ch = draw_channels(sc)
        res = zf_solve(ch, sc, FAST)
        bs_power = sum(float(np.sum(np.abs(v) ** 2)) for v in res.beams.v_dl.values())
        assert bs_power == pytest.approx(sc.bs_power_max, rel=1e-9)
        for k in res.partition.ul:
            p = float(np.sum(np.abs(res.beams.v_ul[k]) ** 2))
            assert p == pytest.approx(sc.user_power_max[k], rel=1e-9)

    def test_no_iterations(self):
        sc = small_scenario(3, seed=106)
        ch = draw_channels(sc)
        res = zf_solve(ch, sc, FAST)
        assert res.iterations == 0

    def test_below_floor_marks_outage(self):
        sc = small_scenario(3, seed=107, scnr_min=1e12)
        ch = draw_channels(sc)
        res = zf_solve(ch, sc, FAST)
        assert res.outage and res.sum_rate == 0.0

    def test_orthogonal_interference_free_rate_oracle(self):
        # Two users, no cross channels, orthogonal-row links: the rate is the
        # sum of two isolated equal-power log-dets computed directly.
        noise = 1e-3
        sc = Scenario(num_users=2, nt=4, nr=4, user_antennas=2,
                      noise_bs=noise, noise_user=noise, clutter=(),
                      scnr_min=1e-30, bs_power_max=4.0, user_power_max=2.0)
        rng = np.random.default_rng(0)
        h_dl0 = np.zeros((2, 4), dtype=complex)
        h_dl0[0, 0], h_dl0[1, 1] = 1.5, 0.8 + 0.2j
        h_ul1 = np.zeros((4, 2), dtype=complex)
        h_ul1[0, 0], h_ul1[1, 1] = 0.9, 1.1 - 0.3j
        ch = ChannelSet(
            h_ul={0: np.ones((4, 2), complex), 1: h_ul1},
            h_dl={0: h_dl0, 1: 0.1 * np.ones((2, 4), complex)},
            h_uu={0: {1: np.zeros((2, 2), complex)},
                  1: {0: np.zeros((2, 2), complex)}},
            beta0=1.0, beta_m=(), user_positions=np.zeros((2, 2)))
        res = zf_solve(ch, sc, FAST)
        assert res.partition.dl == (0,) and res.partition.ul == (1,)
        v_dl, v_ul = res.beams.v_dl[0], res.beams.v_ul[1]
        expected = 0.0
        for h, v, s2, n in [(h_dl0, v_dl, noise, 2), (h_ul1, v_ul, noise, 4)]:
            m = np.eye(n) + h @ v @ v.conj().T @ h.conj().T / s2
            expected += float(np.log(np.linalg.det(m)).real)
        assert res.sum_rate == pytest.approx(expected, rel=1e-9)
