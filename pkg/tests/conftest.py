"""Shared fixtures and independent oracles used across the test suite."""

import numpy as np
import pytest
import scipy.linalg

from flexdisac import (BeamformerSet, ChannelSet, Partition, Scenario,
                       SolverSettings, channel_stream, generate_channels)
from flexdisac.scenario import steering_vector


def rand_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def small_scenario(num_users=3, seed=0, **kw):
    return Scenario(num_users=num_users, seed=seed, **kw)


def draw_channels(scenario, trial=0):
    return generate_channels(scenario, channel_stream(scenario, trial=trial))


def random_beams(channels, partition, scenario, rng, ul_power=None, dl_power=None):
    """Random transmit beamformers at given powers; U zero, W identity."""
    beams = BeamformerSet()
    for k in partition.ul:
        t = scenario.streams_ul[k]
        v = rand_complex(rng, scenario.user_antennas[k], t)
        p = scenario.user_power_max[k] if ul_power is None else ul_power
        v *= np.sqrt(p / np.sum(np.abs(v) ** 2))
        beams.v_ul[k] = v
        beams.u_ul[k] = np.zeros((scenario.nr, t), dtype=complex)
        beams.w_ul[k] = np.eye(t, dtype=complex)
    n_dl = max(len(partition.dl), 1)
    for k in partition.dl:
        t = scenario.streams_dl[k]
        v = rand_complex(rng, scenario.nt, t)
        p = scenario.bs_power_max / n_dl if dl_power is None else dl_power
        v *= np.sqrt(p / np.sum(np.abs(v) ** 2))
        beams.v_dl[k] = v
        beams.u_dl[k] = np.zeros((scenario.user_antennas[k], t), dtype=complex)
        beams.w_dl[k] = np.eye(t, dtype=complex)
    return beams


def mmse_refresh(channels, beams, partition, scenario):
    """Set U to the MMSE receivers and W to the inverse MSE matrices."""
    from flexdisac.solver import (update_receive_dl, update_receive_ul,
                                  update_weight)
    for k in partition.ul:
        beams.u_ul[k] = update_receive_ul(k, channels, beams, scenario)
    for k in partition.dl:
        beams.u_dl[k] = update_receive_dl(k, channels, beams, scenario)
    for k in partition.ul:
        beams.w_ul[k] = update_weight(("ul", k), channels, beams)
    for k in partition.dl:
        beams.w_dl[k] = update_weight(("dl", k), channels, beams)
    return beams


# ---------------------------------------------------------------------------
# Independent constraint re-check: direct loop-based formulas, SCNR through a
# generalized eigenvalue maximization rather than the production trace form.


def oracle_scnr(channels, beams, partition, scenario):
    a_r = steering_vector(scenario.target_angle, scenario.nr,
                          scenario.element_spacing_rx / scenario.carrier_wavelength)
    a_t = steering_vector(scenario.target_angle, scenario.nt,
                          scenario.element_spacing_tx / scenario.carrier_wavelength)
    a0 = np.outer(a_r, a_t.conj())
    s = np.zeros((scenario.nt, scenario.nt), dtype=complex)
    for v in beams.v_dl.values():
        s += v @ v.conj().T
    r = scenario.noise_bs * np.eye(scenario.nr, dtype=complex)
    for beta, (angle, _) in zip(channels.beta_m, scenario.clutter):
        a_rm = steering_vector(angle, scenario.nr,
                               scenario.element_spacing_rx / scenario.carrier_wavelength)
        a_tm = steering_vector(angle, scenario.nt,
                               scenario.element_spacing_tx / scenario.carrier_wavelength)
        a_m = np.outer(a_rm, a_tm.conj())
        r += abs(beta) ** 2 * a_m @ s @ a_m.conj().T
    for i, v in beams.v_ul.items():
        hv = channels.h_ul[i] @ v
        r += hv @ hv.conj().T
    m = abs(channels.beta0) ** 2 * a0 @ s @ a0.conj().T
    m = 0.5 * (m + m.conj().T)
    r = 0.5 * (r + r.conj().T)
    eigs = scipy.linalg.eigh(m, r, eigvals_only=True)
    return float(max(eigs[-1], 0.0))


def recheck_constraints(channels, beams, partition, scenario, gamma_min=None,
                        rtol=1e-6):
    """Independent verification of the power and SCNR constraints.

    Returns a list of violation strings (empty when the iterate is clean).
    """
    floor = scenario.scnr_min if gamma_min is None else gamma_min
    problems = []
    for k in partition.ul:
        p = float(np.sum(np.abs(beams.v_ul[k]) ** 2))
        if p > scenario.user_power_max[k] * (1 + rtol):
            problems.append(f"user {k} power {p} > {scenario.user_power_max[k]}")
    bs = float(sum(np.sum(np.abs(v) ** 2) for v in beams.v_dl.values()))
    if bs > scenario.bs_power_max * (1 + rtol):
        problems.append(f"BS power {bs} > {scenario.bs_power_max}")
    if floor > 0:
        achieved = oracle_scnr(channels, beams, partition, scenario)
        if achieved < floor * (1 - rtol):
            problems.append(f"SCNR {achieved} < floor {floor}")
    return problems


def recheck_result(channels, result, scenario, gamma_min=None, rtol=1e-6):
    if not result.feasible or result.beams is None:
        return []
    return recheck_constraints(channels, result.beams, result.partition,
                               scenario, gamma_min=gamma_min, rtol=rtol)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
