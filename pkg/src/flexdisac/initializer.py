"""Constraint-satisfying beamformer initialization.

Uplink beamformers start from the pseudo-inverse (ZF) solution, backed off in
power by a factor delta to limit interference with the radar return; downlink
beamformers are rebuilt from the dominant eigenvectors of
Theta = A^H(theta0) R^-1 A(theta0) with eigenvalue-proportional power weights,
iterating until the achieved SCNR stops changing.  The instance is declared
infeasible when the fixed point still misses the SCNR floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import BeamformerSet, Partition, herm
from .scenario import ChannelSet, Scenario
from .sensing import radar_context, scnr_from_theta
from .solver import SolverSettings

INIT_MAX_ITERS = 50


@dataclass
class InitResult:
    beams: BeamformerSet
    scnr: float
    feasible: bool
    iterations: int


def zf_beamformers(channels: ChannelSet, partition: Partition,
                   scenario: Scenario) -> BeamformerSet:
    """Unscaled pseudo-inverse transmit beamformers, one per active link.

    Receive matrices are zeroed and weights set to identity so the result is
    a valid BeamformerSet; scaling to the power budget is the caller's job.
    """
    beams = BeamformerSet()
    for k in partition.ul:
        t = scenario.streams_ul[k]
        pinv = np.linalg.pinv(channels.h_ul[k])
        beams.v_ul[k] = np.ascontiguousarray(pinv[:, :t])
        beams.u_ul[k] = np.zeros((scenario.nr, t), dtype=complex)
        beams.w_ul[k] = np.eye(t, dtype=complex)
    for k in partition.dl:
        t = scenario.streams_dl[k]
        pinv = np.linalg.pinv(channels.h_dl[k])
        beams.v_dl[k] = np.ascontiguousarray(pinv[:, :t])
        beams.u_dl[k] = np.zeros((scenario.user_antennas[k], t), dtype=complex)
        beams.w_dl[k] = np.eye(t, dtype=complex)
    return beams


def _scale_to_power(v: np.ndarray, power: float) -> np.ndarray:
    norm_sq = float(np.sum(np.abs(v) ** 2))
    if norm_sq == 0.0:
        return v
    return v * np.sqrt(power / norm_sq)


def _canonical_phase(q: np.ndarray) -> np.ndarray:
    """Rotate each column so its first significant entry is real positive."""
    out = q.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        idx = np.flatnonzero(np.abs(col) > 1e-12 * max(np.max(np.abs(col)), 1e-300))
        if idx.size:
            ph = col[idx[0]] / abs(col[idx[0]])
            out[:, c] = col / ph
    return out


# Relative amplitude floor for eigenvalue weights: Theta is numerically
# rank one, so without it every DL beamformer starts as a single stream and
# the solver has to regrow the remaining streams from round-off-sized seeds,
# which takes thousands of passes.  The floor is shrunk (eventually to zero)
# whenever it would break the SCNR floor, so feasibility is never lost.
STREAM_SEED = 0.1


def _rebuild_dl(beams: BeamformerSet, channels: ChannelSet, partition: Partition,
                scenario: Scenario, settings: SolverSettings,
                weight_floor: float) -> tuple[float, int]:
    """Algorithm core: iterate R -> Theta -> eigen-weighted DL beams to a
    fixed point of the achieved SCNR; returns (true SCNR, iterations)."""
    dl_share = scenario.bs_power_max / scenario.num_users
    n_keep = min(scenario.nr, scenario.nt)
    gamma = 0.0
    iterations = 0
    for _ in range(INIT_MAX_ITERS):
        iterations += 1
        ctx = radar_context(channels, beams, partition, scenario)
        eigvals, eigvecs = np.linalg.eigh(ctx.theta_mat)
        order = np.argsort(eigvals)[::-1][:n_keep]
        lam = np.clip(eigvals[order], 0.0, None)
        q = _canonical_phase(eigvecs[:, order])
        for k in partition.dl:
            t = scenario.streams_dl[k]
            cols = min(t, n_keep)
            w = lam[:cols].copy()
            top = float(np.max(w)) if w.size else 0.0
            if top == 0.0:
                w = np.zeros(cols)
                w[0] = 1.0
            elif weight_floor > 0:
                w = np.maximum(w, weight_floor * top)
            w = np.sqrt(dl_share) * w / np.linalg.norm(w)
            v = np.zeros((scenario.nt, t), dtype=complex)
            v[:, :cols] = q[:, :cols] * w[None, :]
            beams.v_dl[k] = v
        gamma_prev = gamma
        gamma = scnr_from_theta(beams, ctx.theta_mat, channels.beta0, scenario)
        if abs(gamma - gamma_prev) <= settings.multiplier_tol:
            break
    # Report the SCNR of the final beams against their own covariance.
    ctx = radar_context(channels, beams, partition, scenario)
    gamma = scnr_from_theta(beams, ctx.theta_mat, channels.beta0, scenario)
    return gamma, iterations


def initialize(channels: ChannelSet, partition: Partition, scenario: Scenario,
               settings: SolverSettings, gamma_min: float | None = None) -> InitResult:
    """Produce beamformers satisfying the power budgets, reporting achieved SCNR."""
    floor = scenario.scnr_min if gamma_min is None else gamma_min
    beams = zf_beamformers(channels, partition, scenario)
    k_total = scenario.num_users
    dl_share = scenario.bs_power_max / k_total

    for k in partition.ul:
        # Back off UL power by delta; never exceed the per-user budget.
        target = min(scenario.user_power_max[k] / settings.delta,
                     scenario.user_power_max[k])
        beams.v_ul[k] = _scale_to_power(beams.v_ul[k], target)
    for k in partition.dl:
        # Conditioning only: the eigenvector rebuild below replaces these.
        beams.v_dl[k] = _scale_to_power(beams.v_dl[k], dl_share)

    gamma = 0.0
    iterations = 0
    if partition.dl:
        seed = STREAM_SEED
        while True:
            gamma, iters = _rebuild_dl(beams, channels, partition, scenario,
                                       settings, seed)
            iterations += iters
            if floor <= 0 or gamma >= floor * (1 - 1e-12):
                break
            if seed == 0.0:
                break
            seed = seed / 10.0 if seed > 1e-9 else 0.0

    feasible = gamma >= floor * (1 - 1e-12) if floor > 0 else True
    return InitResult(beams=beams, scnr=gamma, feasible=feasible,
                      iterations=iterations)
