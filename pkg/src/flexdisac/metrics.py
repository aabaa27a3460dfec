"""Achievable rates, MSE matrices and the weighted-MSE objective.

Rates use natural logarithms (nat/s/Hz).  Downlink rates include interference
from uplink users through the user-user channels, the model under which the
weighted-MSE objective of the solver is an exact reformulation of the sum
rate (after an MMSE receive / inverse-MSE weight update, sum(logdet W) equals
the sum rate).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import ChannelSet, Scenario

HERMITIAN_TOL = 1e-10


def herm(a: np.ndarray) -> np.ndarray:
    """Symmetrize to suppress round-off drift in covariance assemblies."""
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True)
class Partition:
    """Split of the user set into downlink (dl) and uplink (ul), kept sorted."""

    dl: tuple[int, ...]
    ul: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dl", tuple(sorted(int(u) for u in self.dl)))
        object.__setattr__(self, "ul", tuple(sorted(int(u) for u in self.ul)))
        if set(self.dl) & set(self.ul):
            raise ValueError("dl and ul sets must be disjoint")

    @classmethod
    def from_dl(cls, dl, num_users: int) -> "Partition":
        dl_set = frozenset(int(u) for u in dl)
        if not dl_set <= set(range(num_users)):
            raise ValueError("dl set contains unknown users")
        ul = tuple(u for u in range(num_users) if u not in dl_set)
        return cls(dl=tuple(sorted(dl_set)), ul=ul)

    @property
    def num_users(self) -> int:
        return len(self.dl) + len(self.ul)


@dataclass
class BeamformerSet:
    """Per-user transmit (v), receive (u) and weight (w) matrices.

    Keys of the ``*_ul`` dicts are the UL users, keys of ``*_dl`` the DL
    users.  Shapes: v_ul[k] (L_k, T_ul_k), v_dl[j] (nt, T_dl_j),
    u_ul[k] (nr, T_ul_k), u_dl[j] (L_j, T_dl_j), weights (T, T) Hermitian
    positive definite.
    """

    v_ul: dict[int, np.ndarray] = field(default_factory=dict)
    v_dl: dict[int, np.ndarray] = field(default_factory=dict)
    u_ul: dict[int, np.ndarray] = field(default_factory=dict)
    u_dl: dict[int, np.ndarray] = field(default_factory=dict)
    w_ul: dict[int, np.ndarray] = field(default_factory=dict)
    w_dl: dict[int, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "BeamformerSet":
        return BeamformerSet(
            v_ul={k: v.copy() for k, v in self.v_ul.items()},
            v_dl={k: v.copy() for k, v in self.v_dl.items()},
            u_ul={k: v.copy() for k, v in self.u_ul.items()},
            u_dl={k: v.copy() for k, v in self.u_dl.items()},
            w_ul={k: v.copy() for k, v in self.w_ul.items()},
            w_dl={k: v.copy() for k, v in self.w_dl.items()},
        )

    def validate(self, partition: Partition) -> None:
        """Check key consistency and weight-matrix invariants."""
        ul, dl = set(partition.ul), set(partition.dl)
        for name, d, want in [("v_ul", self.v_ul, ul), ("u_ul", self.u_ul, ul),
                              ("w_ul", self.w_ul, ul), ("v_dl", self.v_dl, dl),
                              ("u_dl", self.u_dl, dl), ("w_dl", self.w_dl, dl)]:
            if set(d.keys()) != want:
                raise ValueError(f"{name} keys {sorted(d.keys())} != expected {sorted(want)}")
        for w in list(self.w_ul.values()) + list(self.w_dl.values()):
            if np.max(np.abs(w - w.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(w))):
                raise ValueError("weight matrix is not Hermitian")
            if np.min(np.linalg.eigvalsh(herm(w))) <= 0:
                raise ValueError("weight matrix is not positive definite")

    def bs_power(self) -> float:
        return float(sum(np.sum(np.abs(v) ** 2) for v in self.v_dl.values()))

    def user_power(self, k: int) -> float:
        return float(np.sum(np.abs(self.v_ul[k]) ** 2))


def bs_receive_covariance(channels: ChannelSet, beams: BeamformerSet,
                          scenario: Scenario) -> np.ndarray:
    """Total received covariance at the BS: sum_U H V V^H H^H + noise."""
    cov = scenario.noise_bs * np.eye(scenario.nr, dtype=complex)
    for i, v in beams.v_ul.items():
        hv = channels.h_ul[i] @ v
        cov = cov + hv @ hv.conj().T
    return herm(cov)


def user_receive_covariance(k: int, channels: ChannelSet, beams: BeamformerSet,
                            scenario: Scenario) -> np.ndarray:
    """Total received covariance at DL user k: all BS streams, UL users, noise."""
    l_k = scenario.user_antennas[k]
    cov = scenario.noise_user * np.eye(l_k, dtype=complex)
    h = channels.h_dl[k]
    for j, v in beams.v_dl.items():
        hv = h @ v
        cov = cov + hv @ hv.conj().T
    for i, v in beams.v_ul.items():
        hv = channels.h_uu[k][i] @ v
        cov = cov + hv @ hv.conj().T
    return herm(cov)


def _logdet_rate(signal: np.ndarray, interference: np.ndarray) -> float:
    """ln det(I + S Z^-1) for Hermitian PSD S and Hermitian PD Z."""
    # det(I + S Z^-1) == det(Z^-1 (Z + S)) == det(Z + S) / det(Z)
    _, logdet_total = np.linalg.slogdet(interference + signal)
    _, logdet_noise = np.linalg.slogdet(interference)
    return float(max(logdet_total - logdet_noise, 0.0))


def uplink_rate(k: int, channels: ChannelSet, beams: BeamformerSet,
                scenario: Scenario) -> float:
    """Achievable UL rate of user k in nat/s/Hz."""
    if k not in beams.v_ul:
        raise ValueError(f"user {k} is not an uplink user")
    h, v = channels.h_ul[k], beams.v_ul[k]
    hv = h @ v
    signal = hv @ hv.conj().T
    interference = scenario.noise_bs * np.eye(scenario.nr, dtype=complex)
    for i, vi in beams.v_ul.items():
        if i == k:
            continue
        hvi = channels.h_ul[i] @ vi
        interference = interference + hvi @ hvi.conj().T
    return _logdet_rate(herm(signal), herm(interference))


def downlink_rate(k: int, channels: ChannelSet, beams: BeamformerSet,
                  scenario: Scenario) -> float:
    """Achievable DL rate of user k in nat/s/Hz, including UL-user interference."""
    if k not in beams.v_dl:
        raise ValueError(f"user {k} is not a downlink user")
    h, v = channels.h_dl[k], beams.v_dl[k]
    hv = h @ v
    signal = hv @ hv.conj().T
    l_k = scenario.user_antennas[k]
    interference = scenario.noise_user * np.eye(l_k, dtype=complex)
    for j, vj in beams.v_dl.items():
        if j == k:
            continue
        hvj = h @ vj
        interference = interference + hvj @ hvj.conj().T
    for i, vi in beams.v_ul.items():
        hvi = channels.h_uu[k][i] @ vi
        interference = interference + hvi @ hvi.conj().T
    return _logdet_rate(herm(signal), herm(interference))


def sum_rate(channels: ChannelSet, beams: BeamformerSet, partition: Partition,
             scenario: Scenario) -> float:
    total = 0.0
    for k in partition.ul:
        total += uplink_rate(k, channels, beams, scenario)
    for k in partition.dl:
        total += downlink_rate(k, channels, beams, scenario)
    return total


def _link_parts(link, channels: ChannelSet, beams: BeamformerSet, scenario: Scenario):
    direction, k = link
    if direction == "ul":
        return (channels.h_ul[k], beams.v_ul[k], beams.u_ul[k],
                scenario.noise_bs, bs_receive_covariance(channels, beams, scenario))
    if direction == "dl":
        return (channels.h_dl[k], beams.v_dl[k], beams.u_dl[k],
                scenario.noise_user,
                user_receive_covariance(k, channels, beams, scenario))
    raise ValueError(f"unknown link direction {direction!r}")


def mse_matrix(link, channels: ChannelSet, beams: BeamformerSet,
               scenario: Scenario) -> np.ndarray:
    """MSE matrix E of one link (direction, user).

    E = (I - U^H H V)(I - U^H H V)^H
        + sum over all other active transmit links of U^H H V V^H H^H U
        + sigma^2 U^H U
    """
    h, v, u, _, total_cov = _link_parts(link, channels, beams, scenario)
    t = v.shape[1]
    uhh = u.conj().T
    d = np.eye(t, dtype=complex) - uhh @ h @ v
    # total_cov includes the own-link signal and the noise; subtract the own
    # signal back out of the quadratic term and the first term supplies it.
    own = h @ v
    e = d @ d.conj().T + uhh @ (total_cov - own @ own.conj().T) @ u
    return herm(e)


def wmmse_objective(channels: ChannelSet, beams: BeamformerSet, partition: Partition,
                    scenario: Scenario) -> float:
    """Sum over active links of Tr(W E) - ln det W."""
    total = 0.0
    for direction, users, weights in [("ul", partition.ul, beams.w_ul),
                                      ("dl", partition.dl, beams.w_dl)]:
        for k in users:
            w = weights[k]
            eigs = np.linalg.eigvalsh(herm(w))
            if np.min(eigs) <= 0:
                raise ValueError(f"weight matrix of {direction} user {k} is not PD")
            e = mse_matrix((direction, k), channels, beams, scenario)
            total += float(np.real(np.trace(w @ e))) - float(np.sum(np.log(eigs)))
    return total


def logdet_weight_sum(beams: BeamformerSet) -> float:
    """sum(ln det W) over all links; equals the sum rate at an MMSE fixed point."""
    total = 0.0
    for w in list(beams.w_ul.values()) + list(beams.w_dl.values()):
        sign, logdet = np.linalg.slogdet(w)
        total += float(logdet)
    return total
