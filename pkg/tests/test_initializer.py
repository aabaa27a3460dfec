import numpy as np
import pytest
from numpy.testing import assert_allclose

from flexdisac import Partition, Scenario, SolverSettings, initialize, zf_beamformers
from flexdisac.sensing import target_steering

from conftest import draw_channels, recheck_constraints, small_scenario


class TestZfBeamformers:
    def test_scalar_channel_inverts(self):
        sc = Scenario(num_users=2, nt=1, nr=1, user_antennas=1)
        ch = draw_channels(sc)
        part = Partition.from_dl([1], 2)
        beams = zf_beamformers(ch, part, sc)
        h = ch.h_ul[0][0, 0]
        assert beams.v_ul[0][0, 0] == pytest.approx(1 / h, rel=1e-12)

    def test_orthogonal_rows_give_diagonal_gram(self):
        sc = small_scenario(2, seed=70)
        ch = draw_channels(sc)
        part = Partition.from_dl([0], 2)
        beams = zf_beamformers(ch, part, sc)
        # Overwrite with a channel whose rows are orthogonal.
        h = np.zeros((sc.user_antennas[0], sc.nt), dtype=complex)
        h[0, 0] = 2.0
        h[1, 1] = 1.0 + 1j
        h[2, 2] = -0.5
        h[3, 3] = 3j
        v = np.linalg.pinv(h)[:, :sc.streams_dl[0]]
        gram = v.conj().T @ v
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) < 1e-12

    def test_pseudo_inverse_property(self):
        sc = small_scenario(3, seed=71)
        ch = draw_channels(sc)
        part = Partition.from_dl([0, 1], 3)
        beams = zf_beamformers(ch, part, sc)
        for k in part.dl:
            h = ch.h_dl[k]
            v_full = np.linalg.pinv(h)
            # H pinv(H) H == H within tolerance (identity on the row space).
            assert np.max(np.abs(h @ v_full @ h - h)) <= 1e-8 * np.max(np.abs(h))
        for k in part.ul:
            assert np.all(np.isfinite(beams.v_ul[k]))


class TestInitialize:
    def test_power_budgets_exact(self):
        sc = small_scenario(4, seed=72)
        ch = draw_channels(sc)
        part = Partition.from_dl([0, 2], 4)
        settings = SolverSettings()
        init = initialize(ch, part, sc, settings)
        for k in part.ul:
            p = float(np.sum(np.abs(init.beams.v_ul[k]) ** 2))
            assert p == pytest.approx(sc.user_power_max[k] / settings.delta,
                                      rel=1e-12)
        for k in part.dl:
            p = float(np.sum(np.abs(init.beams.v_dl[k]) ** 2))
            assert p == pytest.approx(sc.bs_power_max / sc.num_users, rel=1e-12)

    def test_never_violates_power_constraints(self):
        for trial in range(5):
            sc = small_scenario(3, seed=73)
            ch = draw_channels(sc, trial=trial)
            part = Partition.from_dl([1], 3)
            init = initialize(ch, part, sc, SolverSettings())
            problems = recheck_constraints(ch, init.beams, part, sc,
                                           gamma_min=0.0, rtol=1e-9)
            assert problems == []

    def test_reported_scnr_is_consistent(self):
        sc = small_scenario(3, seed=74)
        ch = draw_channels(sc)
        part = Partition.from_dl([0, 1], 3)
        init = initialize(ch, part, sc, SolverSettings())
        from conftest import oracle_scnr
        assert init.scnr == pytest.approx(
            oracle_scnr(ch, init.beams, part, sc), rel=1e-8)

    def test_dominant_column_tracks_target_steering(self):
        # Single downlink user, no uplink, no clutter: the power concentrates
        # along the target's transmit steering vector.
        sc = small_scenario(2, seed=75, clutter=())
        ch = draw_channels(sc)
        part = Partition(dl=(0,), ul=())
        init = initialize(ch, part, sc, SolverSettings())
        v = init.beams.v_dl[0]
        a_t0, _ = target_steering(sc)
        col_powers = np.sum(np.abs(v) ** 2, axis=0)
        dominant = v[:, int(np.argmax(col_powers))]
        alignment = abs(np.vdot(a_t0, dominant)) / np.linalg.norm(dominant)
        assert alignment > 1 - 1e-9
        assert col_powers.max() / col_powers.sum() > 0.9

    def test_huge_backoff_silences_uplink(self):
        sc = small_scenario(3, seed=76)
        ch = draw_channels(sc)
        part = Partition.from_dl([0, 1], 3)
        strong = initialize(ch, part, sc, SolverSettings(delta=1e12))
        for k in part.ul:
            assert float(np.sum(np.abs(strong.beams.v_ul[k]) ** 2)) < 1e-10
        # With silent uplink the achieved SCNR matches the no-uplink value up
        # to the small seeded columns, whose null-space basis is instance
        # dependent.
        no_ul = initialize(ch, Partition(dl=part.dl, ul=()), sc, SolverSettings())
        assert strong.scnr == pytest.approx(no_ul.scnr, rel=2e-2)

    def test_deterministic(self):
        sc = small_scenario(3, seed=77)
        ch = draw_channels(sc)
        part = Partition.from_dl([2], 3)
        a = initialize(ch, part, sc, SolverSettings())
        b = initialize(ch, part, sc, SolverSettings())
        for k in part.dl:
            assert np.array_equal(a.beams.v_dl[k], b.beams.v_dl[k])
        for k in part.ul:
            assert np.array_equal(a.beams.v_ul[k], b.beams.v_ul[k])
        assert a.scnr == b.scnr

    def test_terminates_within_cap(self):
        from flexdisac.initializer import INIT_MAX_ITERS
        sc = small_scenario(3, seed=78)
        ch = draw_channels(sc)
        part = Partition.from_dl([0, 1, 2], 3)
        init = initialize(ch, part, sc, SolverSettings())
        assert init.iterations <= 10 * INIT_MAX_ITERS  # incl. seed shrinks

    def test_unreachable_floor_declared_infeasible(self):
        sc = small_scenario(3, seed=79)
        ch = draw_channels(sc)
        part = Partition.from_dl([0], 3)
        init = initialize(ch, part, sc, SolverSettings(), gamma_min=1e12)
        assert not init.feasible

    def test_empty_downlink_feasible_only_without_floor(self):
        sc = small_scenario(3, seed=80)
        ch = draw_channels(sc)
        part = Partition.from_dl([], 3)
        assert not initialize(ch, part, sc, SolverSettings()).feasible
        assert initialize(ch, part, sc, SolverSettings(), gamma_min=0.0).feasible
