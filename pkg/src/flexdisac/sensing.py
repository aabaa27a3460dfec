"""Radar-side quantities: clutter covariance, MVDR receive beamformer, SCNR.

The achieved SCNR of the MVDR receiver admits a closed trace form
|beta0|^2 * sum_j Tr(V_j V_j^H Theta) with Theta = A^H(theta0) R^-1 A(theta0);
``scnr_oracle`` instead maximizes the Rayleigh quotient over receive vectors
directly (largest generalized eigenvalue) and serves as independent ground
truth for that derivation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .metrics import BeamformerSet, Partition, herm
from .scenario import ChannelSet, Scenario, steering_vector


@dataclass(frozen=True)
class RadarContext:
    """Sensing quantities frozen at one beamformer state."""

    a_t0: np.ndarray
    a_r0: np.ndarray
    clutter_mats: tuple[np.ndarray, ...]
    beta0: complex
    beta_m: tuple[complex, ...]
    r_cov: np.ndarray
    theta_mat: np.ndarray


def target_steering(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """(a_t(theta0), a_r(theta0)) for the target angle."""
    a_t = steering_vector(scenario.target_angle, scenario.nt, scenario.tx_spacing_over_lambda)
    a_r = steering_vector(scenario.target_angle, scenario.nr, scenario.rx_spacing_over_lambda)
    return a_t, a_r


def clutter_steering_matrices(scenario: Scenario) -> tuple[np.ndarray, ...]:
    """A(theta_m) = a_r(theta_m) a_t(theta_m)^H per clutter element."""
    mats = []
    for angle, _ in scenario.clutter:
        a_r = steering_vector(angle, scenario.nr, scenario.rx_spacing_over_lambda)
        a_t = steering_vector(angle, scenario.nt, scenario.tx_spacing_over_lambda)
        mats.append(np.outer(a_r, a_t.conj()))
    return tuple(mats)


def dl_gram(beams: BeamformerSet, scenario: Scenario) -> np.ndarray:
    """sum_j V_j V_j^H over downlink beamformers, shape (nt, nt)."""
    s = np.zeros((scenario.nt, scenario.nt), dtype=complex)
    for v in beams.v_dl.values():
        s = s + v @ v.conj().T
    return herm(s)


def clutter_covariance(channels: ChannelSet, beams: BeamformerSet,
                       partition: Partition, scenario: Scenario) -> np.ndarray:
    """Interference-plus-clutter covariance R at the radar receiver.

    R = sum_m |beta_m|^2 A(theta_m) [sum_j V_j V_j^H] A(theta_m)^H
        + sum_i H_i V_i V_i^H H_i^H + noise_bs * I
    """
    r = scenario.noise_bs * np.eye(scenario.nr, dtype=complex)
    s = dl_gram(beams, scenario)
    for beta, a_m in zip(channels.beta_m, clutter_steering_matrices(scenario)):
        r = r + abs(beta) ** 2 * (a_m @ s @ a_m.conj().T)
    for i, v in beams.v_ul.items():
        hv = channels.h_ul[i] @ v
        r = r + hv @ hv.conj().T
    return herm(r)


def radar_context(channels: ChannelSet, beams: BeamformerSet,
                  partition: Partition, scenario: Scenario) -> RadarContext:
    a_t0, a_r0 = target_steering(scenario)
    r = clutter_covariance(channels, beams, partition, scenario)
    a0 = np.outer(a_r0, a_t0.conj())
    cho = scipy.linalg.cho_factor(r)
    theta = herm(a0.conj().T @ scipy.linalg.cho_solve(cho, a0))
    return RadarContext(a_t0=a_t0, a_r0=a_r0,
                        clutter_mats=clutter_steering_matrices(scenario),
                        beta0=channels.beta0, beta_m=channels.beta_m,
                        r_cov=r, theta_mat=theta)


def scnr_from_theta(beams: BeamformerSet, theta_mat: np.ndarray, beta0: complex,
                    scenario: Scenario) -> float:
    s = dl_gram(beams, scenario)
    return float(abs(beta0) ** 2 * np.real(np.trace(s @ theta_mat)))


def scnr(channels: ChannelSet, beams: BeamformerSet, partition: Partition,
         scenario: Scenario) -> float:
    """SCNR of the MVDR receiver: |beta0|^2 sum_j Tr(V_j V_j^H Theta)."""
    ctx = radar_context(channels, beams, partition, scenario)
    return scnr_from_theta(beams, ctx.theta_mat, channels.beta0, scenario)


def scnr_oracle(channels: ChannelSet, beams: BeamformerSet, partition: Partition,
                scenario: Scenario) -> float:
    """SCNR maximized over receive beamformers by generalized eigendecomposition.

    Largest generalized eigenvalue of (M, R) with
    M = |beta0|^2 A(theta0) [sum_j V_j V_j^H] A(theta0)^H.
    """
    a_t0, a_r0 = target_steering(scenario)
    a0 = np.outer(a_r0, a_t0.conj())
    s = dl_gram(beams, scenario)
    m = herm(abs(channels.beta0) ** 2 * (a0 @ s @ a0.conj().T))
    r = clutter_covariance(channels, beams, partition, scenario)
    eigs = scipy.linalg.eigh(m, r, eigvals_only=True)
    return float(max(eigs[-1], 0.0))


def mvdr_beamformer(r_cov: np.ndarray, a_r0: np.ndarray) -> np.ndarray:
    """Unit-norm MVDR receive beamformer, proportional to R^-1 a_r(theta0)."""
    q = scipy.linalg.cho_solve(scipy.linalg.cho_factor(r_cov), a_r0)
    return q / np.linalg.norm(q)


def scnr_at_receiver(q: np.ndarray, channels: ChannelSet, beams: BeamformerSet,
                     partition: Partition, scenario: Scenario) -> float:
    """SCNR of an arbitrary receive beamformer q (symbol expectation resolved)."""
    a_t0, a_r0 = target_steering(scenario)
    a0 = np.outer(a_r0, a_t0.conj())
    s = dl_gram(beams, scenario)
    r = clutter_covariance(channels, beams, partition, scenario)
    num = abs(channels.beta0) ** 2 * np.real(q.conj() @ (a0 @ s @ a0.conj().T) @ q)
    den = np.real(q.conj() @ r @ q)
    return float(num / den)
