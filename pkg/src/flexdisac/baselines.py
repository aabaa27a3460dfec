"""Half-duplex and zero-forcing comparison schemes.

The HD baseline fixes a half/half user split by downlink channel gain and
time-shares: a DL-only phase (radar SCNR enforced, since sensing rides on the
DL waveform) and a UL-only phase with the sensing constraint waived — there is
no DL transmission to sense with, so the phase SCNR is recorded as zero.  The
ZF baseline transmits pseudo-inverse beamformers at full power in both
directions simultaneously with no iterative optimization.
"""

from __future__ import annotations

import numpy as np

from .initializer import zf_beamformers
from .metrics import BeamformerSet, Partition, sum_rate
from .partition import evaluate_partition
from .scenario import ChannelSet, Scenario
from .sensing import scnr
from .solver import SolveResult, SolverSettings


def hd_partition(channels: ChannelSet, scenario: Scenario) -> Partition:
    """ceil(K/2) users with the strongest DL channels go downlink, rest uplink."""
    k_total = scenario.num_users
    gains = [(-np.linalg.norm(channels.h_dl[k]), k) for k in range(k_total)]
    gains.sort()
    n_dl = (k_total + 1) // 2
    dl = [k for _, k in gains[:n_dl]]
    return Partition.from_dl(dl, k_total)


def _merge_phase_beams(dl_res: SolveResult, ul_res: SolveResult) -> BeamformerSet:
    merged = BeamformerSet()
    if dl_res.beams is not None:
        for attr in ("v_dl", "u_dl", "w_dl"):
            getattr(merged, attr).update(getattr(dl_res.beams, attr))
    if ul_res.beams is not None:
        for attr in ("v_ul", "u_ul", "w_ul"):
            getattr(merged, attr).update(getattr(ul_res.beams, attr))
    return merged


def hd_solve(channels: ChannelSet, scenario: Scenario,
             settings: SolverSettings) -> SolveResult:
    """Half-duplex rate: time-shared DL-only and UL-only WMMSE phases."""
    part = hd_partition(channels, scenario)
    dl_only = Partition(dl=part.dl, ul=())
    dl_res = evaluate_partition(channels, dl_only, scenario, settings)
    if dl_res.outage:
        dl_res.partition = part
        dl_res.diagnostics["reason"] = "hd_dl_phase_infeasible"
        return dl_res

    ul_only = Partition(dl=(), ul=part.ul)
    ul_res = evaluate_partition(channels, ul_only, scenario, settings,
                                gamma_min=0.0)

    rate = 0.5 * dl_res.sum_rate + 0.5 * ul_res.sum_rate
    return SolveResult(
        beams=_merge_phase_beams(dl_res, ul_res), partition=part,
        sum_rate=rate, scnr_achieved=dl_res.scnr_achieved,
        feasible=dl_res.feasible and ul_res.feasible, outage=False,
        iterations=dl_res.iterations + ul_res.iterations,
        objective_trace=[rate],
        diagnostics={"dl_phase_rate": dl_res.sum_rate,
                     "ul_phase_rate": ul_res.sum_rate,
                     "ul_phase_scnr": 0.0})


def zf_solve(channels: ChannelSet, scenario: Scenario,
             settings: SolverSettings) -> SolveResult:
    """Zero-forcing baseline: pseudo-inverse beams at full power, no iterations."""
    part = hd_partition(channels, scenario)
    beams = zf_beamformers(channels, part, scenario)
    n_dl = max(len(part.dl), 1)
    for k in part.dl:
        v = beams.v_dl[k]
        norm_sq = float(np.sum(np.abs(v) ** 2))
        if norm_sq > 0:
            beams.v_dl[k] = v * np.sqrt(scenario.bs_power_max / n_dl / norm_sq)
    for k in part.ul:
        v = beams.v_ul[k]
        norm_sq = float(np.sum(np.abs(v) ** 2))
        if norm_sq > 0:
            beams.v_ul[k] = v * np.sqrt(scenario.user_power_max[k] / norm_sq)

    achieved = scnr(channels, beams, part, scenario)
    if scenario.scnr_min > 0 and achieved < scenario.scnr_min:
        return SolveResult(beams=beams, partition=part, sum_rate=0.0,
                           scnr_achieved=achieved, feasible=False, outage=True,
                           iterations=0, objective_trace=[],
                           diagnostics={"reason": "zf_scnr_below_floor"})
    rate = sum_rate(channels, beams, part, scenario)
    return SolveResult(beams=beams, partition=part, sum_rate=rate,
                       scnr_achieved=achieved, feasible=True, outage=False,
                       iterations=0, objective_trace=[rate], diagnostics={})
