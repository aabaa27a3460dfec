"""Problem instances: geometry, path-loss-scaled Rayleigh channels, steering vectors.

A :class:`Scenario` is a static description of one network: a dual-function
base station with ``nt`` transmit / ``nr`` receive antennas, ``num_users``
multi-antenna users dropped uniformly in a square area, one radar target and
a set of clutter reflectors at known angles.  A :class:`ChannelSet` is one
fading realization drawn from a seeded counter-based generator, so that a
(seed, trial) pair always reproduces the same channels bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 3.5e9

# Links shorter than this are clamped to avoid path-gain singularities.
MIN_LINK_DISTANCE = 1.0


def _per_user(value, num_users: int, name: str) -> tuple[int, ...]:
    if np.isscalar(value):
        return (int(value),) * num_users
    out = tuple(int(v) for v in value)
    if len(out) != num_users:
        raise ValueError(f"{name} must have one entry per user, got {len(out)}")
    return out


def _per_user_float(value, num_users: int, name: str) -> tuple[float, ...]:
    if np.isscalar(value):
        return (float(value),) * num_users
    out = tuple(float(v) for v in value)
    if len(out) != num_users:
        raise ValueError(f"{name} must have one entry per user, got {len(out)}")
    return out


@dataclass(frozen=True)
class Scenario:
    """Static problem instance.

    Powers are linear watts, angles radians, distances meters and the SCNR
    floor a linear ratio.  Per-user quantities accept either a scalar
    (broadcast to all users) or a sequence of length ``num_users``.
    """

    num_users: int
    nt: int = 6
    nr: int = 4
    user_antennas: tuple[int, ...] | int = 4
    streams_ul: tuple[int, ...] | int | None = None
    streams_dl: tuple[int, ...] | int | None = None
    area_side: float = 1000.0
    bs_position: tuple[float, float] = (500.0, 500.0)
    target_angle: float = math.pi / 4
    target_range: float = 50.0
    clutter: tuple[tuple[float, float], ...] = ((0.0, 40.0), (math.pi / 2, 40.0))
    carrier_wavelength: float = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ
    element_spacing_rx: float | None = None
    element_spacing_tx: float | None = None
    bs_power_max: float = 10.0          # 40 dBm
    user_power_max: tuple[float, ...] | float = 1.0   # 30 dBm
    scnr_min: float = 0.01              # -20 dB
    noise_bs: float = 3.16e-9           # -55 dBm
    noise_user: float = 3.16e-9
    antenna_gain: float = 10.0          # 10 dB, one-way
    rcs: float = 500.0
    seed: int = 0
    _normalized: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        k = int(self.num_users)
        if k < 2:
            raise ValueError("num_users must be at least 2")
        if self.nt < 1 or self.nr < 1:
            raise ValueError("antenna counts must be positive")
        object.__setattr__(self, "num_users", k)
        ants = _per_user(self.user_antennas, k, "user_antennas")
        if min(ants) < 1:
            raise ValueError("user_antennas must be positive")
        object.__setattr__(self, "user_antennas", ants)

        s_ul = self.streams_ul
        if s_ul is None:
            s_ul = tuple(min(l, self.nr) for l in ants)
        s_ul = _per_user(s_ul, k, "streams_ul")
        s_dl = self.streams_dl
        if s_dl is None:
            s_dl = tuple(min(l, self.nt) for l in ants)
        s_dl = _per_user(s_dl, k, "streams_dl")
        for i in range(k):
            if not 1 <= s_ul[i] <= min(ants[i], self.nr):
                raise ValueError(f"streams_ul[{i}] must lie in [1, min(L_k, nr)]")
            if not 1 <= s_dl[i] <= min(ants[i], self.nt):
                raise ValueError(f"streams_dl[{i}] must lie in [1, min(L_k, nt)]")
        object.__setattr__(self, "streams_ul", s_ul)
        object.__setattr__(self, "streams_dl", s_dl)

        powers = _per_user_float(self.user_power_max, k, "user_power_max")
        if min(powers) <= 0:
            raise ValueError("user_power_max must be strictly positive")
        object.__setattr__(self, "user_power_max", powers)

        if self.bs_power_max <= 0 or self.noise_bs <= 0 or self.noise_user <= 0:
            raise ValueError("powers and noise variances must be strictly positive")
        # scnr_min == 0 disables the sensing constraint (used by HD's UL phase
        # and by no-radar reference cases).
        if self.scnr_min < 0:
            raise ValueError("scnr_min must be non-negative")
        if self.antenna_gain <= 0 or self.rcs <= 0:
            raise ValueError("antenna_gain and rcs must be strictly positive")
        if self.area_side <= 0 or self.target_range <= 0:
            raise ValueError("area_side and target_range must be strictly positive")
        if self.carrier_wavelength <= 0:
            raise ValueError("carrier_wavelength must be strictly positive")

        half_pi = math.pi / 2
        clutter = tuple((float(a), float(r)) for a, r in self.clutter)
        angles = [self.target_angle] + [a for a, _ in clutter]
        for a in angles:
            if not math.isfinite(a) or abs(a) > half_pi:
                raise ValueError("angles must lie in [-pi/2, pi/2]")
        for _, r in clutter:
            if r <= 0:
                raise ValueError("clutter ranges must be strictly positive")
        object.__setattr__(self, "clutter", clutter)
        object.__setattr__(self, "bs_position", tuple(float(v) for v in self.bs_position))

        if self.element_spacing_rx is None:
            object.__setattr__(self, "element_spacing_rx", self.carrier_wavelength / 2)
        if self.element_spacing_tx is None:
            object.__setattr__(self, "element_spacing_tx", self.carrier_wavelength / 2)
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "_normalized", True)

    @property
    def rx_spacing_over_lambda(self) -> float:
        return self.element_spacing_rx / self.carrier_wavelength

    @property
    def tx_spacing_over_lambda(self) -> float:
        return self.element_spacing_tx / self.carrier_wavelength

    def users(self) -> range:
        return range(self.num_users)


@dataclass(frozen=True)
class ChannelSet:
    """One fading realization for a :class:`Scenario`.

    ``h_ul[k]``: user k -> BS, shape (nr, L_k).
    ``h_dl[k]``: BS -> user k, shape (L_k, nt).
    ``h_uu[j][k]``: UL user k -> user j, shape (L_j, L_k); no self entries.
    ``beta0`` / ``beta_m``: complex target / clutter reflection coefficients.
    """

    h_ul: dict[int, np.ndarray]
    h_dl: dict[int, np.ndarray]
    h_uu: dict[int, dict[int, np.ndarray]]
    beta0: complex
    beta_m: tuple[complex, ...]
    user_positions: np.ndarray


def steering_vector(theta: float, n: int, spacing_over_lambda: float) -> np.ndarray:
    """Unit-norm ULA steering vector: element i is exp(j*2*pi*(d/lambda)*i*sin(theta))/sqrt(n)."""
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    if n < 1:
        raise ValueError("n must be at least 1")
    phase = 2.0 * np.pi * spacing_over_lambda * np.sin(theta) * np.arange(n)
    return np.exp(1j * phase) / np.sqrt(n)


def reflection_channel(theta: float, beta: complex, scenario: Scenario) -> np.ndarray:
    """Rank-one reflection channel beta * a_r(theta) a_t(theta)^H, shape (nr, nt)."""
    a_r = steering_vector(theta, scenario.nr, scenario.rx_spacing_over_lambda)
    a_t = steering_vector(theta, scenario.nt, scenario.tx_spacing_over_lambda)
    return beta * np.outer(a_r, a_t.conj())


def free_space_gain(distance: float, wavelength: float, antenna_gain: float) -> float:
    """One-way free-space power gain G * (lambda / (4*pi*d))^2 with a distance floor."""
    d = max(float(distance), MIN_LINK_DISTANCE)
    return antenna_gain * (wavelength / (4.0 * np.pi * d)) ** 2


def reflection_power(distance: float, wavelength: float, antenna_gain: float,
                     rcs: float) -> float:
    """Two-way radar-equation power G^2 * lambda^2 * sigma / ((4*pi)^3 * d^4)."""
    d = max(float(distance), MIN_LINK_DISTANCE)
    return antenna_gain ** 2 * wavelength ** 2 * rcs / ((4.0 * np.pi) ** 3 * d ** 4)


def channel_stream(scenario: Scenario, trial: int = 0, point: int = 0) -> np.random.Generator:
    """Independent substream for one (sweep point, trial) pair.

    Counter-based Philox keyed by (scenario.seed, point, trial): distinct
    pairs are statistically independent and the mapping does not depend on
    the order in which streams are created, so parallel trial execution
    reproduces serial results.
    """
    ss = np.random.SeedSequence(entropy=scenario.seed, spawn_key=(int(point), int(trial)))
    return np.random.Generator(np.random.Philox(ss))


def _rayleigh(rng: np.random.Generator, rows: int, cols: int, variance: float) -> np.ndarray:
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols)))


def generate_channels(scenario: Scenario, rng: np.random.Generator) -> ChannelSet:
    """Draw one channel realization.

    User positions are uniform over the square area; every channel entry is
    i.i.d. circularly-symmetric complex Gaussian with per-entry variance equal
    to the one-way free-space gain of its link.  Target/clutter reflection
    magnitudes follow the two-way radar equation with uniformly random phase.

    The draw order is fixed (positions, h_ul, h_dl, h_uu row-major, target
    phase, clutter phases) so a given generator state always yields the same
    ChannelSet.
    """
    k = scenario.num_users
    lam = scenario.carrier_wavelength
    gain = scenario.antenna_gain
    bs = np.asarray(scenario.bs_position)

    positions = rng.uniform(0.0, scenario.area_side, size=(k, 2))
    bs_dist = np.maximum(np.linalg.norm(positions - bs, axis=1), MIN_LINK_DISTANCE)

    h_ul: dict[int, np.ndarray] = {}
    h_dl: dict[int, np.ndarray] = {}
    for i in range(k):
        var = free_space_gain(bs_dist[i], lam, gain)
        h_ul[i] = _rayleigh(rng, scenario.nr, scenario.user_antennas[i], var)
    for i in range(k):
        var = free_space_gain(bs_dist[i], lam, gain)
        h_dl[i] = _rayleigh(rng, scenario.user_antennas[i], scenario.nt, var)

    h_uu: dict[int, dict[int, np.ndarray]] = {j: {} for j in range(k)}
    for j in range(k):
        for i in range(k):
            if i == j:
                continue
            d = np.linalg.norm(positions[j] - positions[i])
            var = free_space_gain(d, lam, gain)
            h_uu[j][i] = _rayleigh(rng, scenario.user_antennas[j],
                                   scenario.user_antennas[i], var)

    b0_mag = np.sqrt(reflection_power(scenario.target_range, lam, gain, scenario.rcs))
    beta0 = b0_mag * np.exp(2j * np.pi * rng.uniform())
    beta_m = []
    for _, rng_m in scenario.clutter:
        mag = np.sqrt(reflection_power(rng_m, lam, gain, scenario.rcs))
        beta_m.append(mag * np.exp(2j * np.pi * rng.uniform()))

    for arr in [positions, *h_ul.values(), *h_dl.values()]:
        arr.setflags(write=False)
    for inner in h_uu.values():
        for arr in inner.values():
            arr.setflags(write=False)

    return ChannelSet(h_ul=h_ul, h_dl=h_dl, h_uu=h_uu,
                      beta0=complex(beta0), beta_m=tuple(complex(b) for b in beta_m),
                      user_positions=positions)
