"""Inner alternating optimization: receive/weight/transmit updates with
Lagrange-multiplier search for the power and sensing constraints.

One pass updates all receive matrices, all weights, then all transmit
beamformers (uplink per user, downlink jointly), and finally refreshes the
linearization point of the radar covariance.  Each transmit update solves a
small multiplier search: an outer scalar search on the sensing multiplier mu
wrapped around a bisection on the power multiplier lambda, both made cheap by
an eigendecomposition of the quadratic bracket.  The search enforces the
constraints on the actual candidate beamformers, so every accepted iterate is
feasible; a step that cannot reach the SCNR floor is discarded and the
previous (feasible) iterate retained.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .metrics import (BeamformerSet, Partition, bs_receive_covariance, herm,
                      sum_rate, user_receive_covariance)
from .scenario import ChannelSet, Scenario
from .sensing import RadarContext, dl_gram, radar_context, scnr

logger = logging.getLogger(__name__)

# Weight update switches to a diagonally loaded inverse past this condition number.
WEIGHT_CONDITION_LIMIT = 1e12
WEIGHT_DIAGONAL_LOAD = 1e-12

# Relative slack applied when testing feasibility of a returned iterate.
FEASIBILITY_RTOL = 1e-6


class MultiplierNeededError(RuntimeError):
    """Unregularized transmit update is singular; a positive multiplier is required."""


class MultiplierRangeError(RuntimeError):
    """The sensing multiplier makes the downlink bracket indefinite."""


class MultiplierSearchError(RuntimeError):
    """No multiplier pair satisfies both constraints within the iteration budget."""


class MonotonicityError(RuntimeError):
    """The objective trace decreased beyond the allowed tolerance."""


class SolverInvariantError(RuntimeError):
    """A returned iterate violates a constraint it is contracted to satisfy."""


@dataclass
class SolverSettings:
    inner_tol: float = 1e-2             # nats; convergence threshold on the sum rate
    max_inner_iters: int = 200
    multiplier_tol: float = 1e-8        # relative tolerance of the multiplier search
    max_multiplier_iters: int = 80
    mu_cap: float = 1e12
    delta: float = 10.0                 # initializer UL power back-off factor
    collect_trace: bool = False

    def __post_init__(self):
        if min(self.inner_tol, self.multiplier_tol, self.mu_cap, self.delta) <= 0:
            raise ValueError("solver settings must be strictly positive")
        if self.max_inner_iters < 1 or self.max_multiplier_iters < 1:
            raise ValueError("iteration caps must be at least 1")


@dataclass
class SolveResult:
    beams: BeamformerSet | None
    partition: Partition
    sum_rate: float
    scnr_achieved: float
    feasible: bool
    outage: bool
    iterations: int
    objective_trace: list[float]
    diagnostics: dict = field(default_factory=dict)


@dataclass
class UpdateContext:
    """Inputs of one transmit-update multiplier search."""

    channels: ChannelSet
    beams: BeamformerSet
    partition: Partition
    scenario: Scenario
    settings: SolverSettings
    radar: RadarContext
    user: int | None = None            # UL updates are per user; DL is joint
    gamma_min: float | None = None

    def floor(self) -> float:
        return self.scenario.scnr_min if self.gamma_min is None else self.gamma_min


# ---------------------------------------------------------------------------
# Closed-form receive / weight updates


def update_receive_ul(k: int, channels: ChannelSet, beams: BeamformerSet,
                      scenario: Scenario) -> np.ndarray:
    """MMSE receive matrix of UL user k at the BS."""
    cov = bs_receive_covariance(channels, beams, scenario)
    return np.linalg.solve(cov, channels.h_ul[k] @ beams.v_ul[k])


def update_receive_dl(k: int, channels: ChannelSet, beams: BeamformerSet,
                      scenario: Scenario) -> np.ndarray:
    """MMSE receive matrix of DL user k, including UL-user interference."""
    cov = user_receive_covariance(k, channels, beams, scenario)
    return np.linalg.solve(cov, channels.h_dl[k] @ beams.v_dl[k])


def update_weight(link, channels: ChannelSet, beams: BeamformerSet) -> np.ndarray:
    """Weight matrix W = (I - U^H H V)^-1, symmetrized."""
    direction, k = link
    if direction == "ul":
        h, v, u = channels.h_ul[k], beams.v_ul[k], beams.u_ul[k]
    elif direction == "dl":
        h, v, u = channels.h_dl[k], beams.v_dl[k], beams.u_dl[k]
    else:
        raise ValueError(f"unknown link direction {direction!r}")
    t = v.shape[1]
    d = np.eye(t, dtype=complex) - u.conj().T @ h @ v
    if np.linalg.cond(d) > WEIGHT_CONDITION_LIMIT:
        logger.warning("near-singular MSE matrix on %s link of user %d; loading diagonal",
                       direction, k)
        d = d + WEIGHT_DIAGONAL_LOAD * np.eye(t)
    return herm(np.linalg.inv(d))


# ---------------------------------------------------------------------------
# Closed-form transmit updates at fixed multipliers


def _ul_bracket(k: int, channels: ChannelSet, beams: BeamformerSet,
                radar: RadarContext, scenario: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadratic bracket J, sensing penalty Psi and linear term b of UL user k."""
    h_k = channels.h_ul[k]
    l_k = scenario.user_antennas[k]
    j = np.zeros((l_k, l_k), dtype=complex)
    for i in beams.v_ul:
        uw = beams.u_ul[i] @ beams.w_ul[i]
        g = h_k.conj().T @ uw @ beams.u_ul[i].conj().T @ h_k
        j = j + g
    for jj in beams.v_dl:
        h_jk = channels.h_uu[jj][k]
        uw = beams.u_dl[jj] @ beams.w_dl[jj]
        j = j + h_jk.conj().T @ uw @ beams.u_dl[jj].conj().T @ h_jk
    # Exact rank-one form of |b0|^2 H^H R^-1 A0 (sum_j V V^H) A0^H R^-1 H.
    s_target = float(np.real(radar.a_t0.conj() @ dl_gram(beams, scenario) @ radar.a_t0))
    r_inv_a = scipy.linalg.cho_solve(scipy.linalg.cho_factor(radar.r_cov), radar.a_r0)
    g_vec = h_k.conj().T @ r_inv_a
    psi = abs(radar.beta0) ** 2 * s_target * np.outer(g_vec, g_vec.conj())
    b = h_k.conj().T @ beams.u_ul[k] @ beams.w_ul[k]
    return herm(j), herm(psi), b


def _dl_bracket(channels: ChannelSet, beams: BeamformerSet, radar: RadarContext,
                scenario: Scenario) -> np.ndarray:
    """Shared downlink quadratic bracket sum_j H^H U W U^H H, shape (nt, nt)."""
    j = np.zeros((scenario.nt, scenario.nt), dtype=complex)
    for jj in beams.v_dl:
        h = channels.h_dl[jj]
        uw = beams.u_dl[jj] @ beams.w_dl[jj]
        j = j + h.conj().T @ uw @ beams.u_dl[jj].conj().T @ h
    return herm(j)


def update_ul_transmit(k: int, channels: ChannelSet, beams: BeamformerSet,
                       radar: RadarContext, multipliers: tuple[float, float],
                       scenario: Scenario) -> np.ndarray:
    """UL transmit beamformer of user k at fixed multipliers (lambda, mu)."""
    lam, mu = multipliers
    if lam < 0 or mu < 0:
        raise ValueError("multipliers must be non-negative")
    j, psi, b = _ul_bracket(k, channels, beams, radar, scenario)
    bracket = j + mu * psi + lam * np.eye(j.shape[0])
    try:
        cho = scipy.linalg.cho_factor(bracket)
    except np.linalg.LinAlgError:
        raise MultiplierNeededError(
            f"UL bracket of user {k} is singular at lambda={lam}, mu={mu}")
    return scipy.linalg.cho_solve(cho, b)


def update_dl_transmit(k: int, channels: ChannelSet, beams: BeamformerSet,
                       radar: RadarContext, multipliers: tuple[float, float],
                       scenario: Scenario) -> np.ndarray:
    """DL transmit beamformer of user k at fixed multipliers (lambda, mu)."""
    lam, mu = multipliers
    if lam < 0 or mu < 0:
        raise ValueError("multipliers must be non-negative")
    j = _dl_bracket(channels, beams, radar, scenario)
    bracket = j + lam * np.eye(scenario.nt) - mu * abs(radar.beta0) ** 2 * radar.theta_mat
    try:
        cho = scipy.linalg.cho_factor(bracket)
    except np.linalg.LinAlgError:
        raise MultiplierRangeError(
            f"DL bracket indefinite at lambda={lam}, mu={mu}; shrink mu or grow lambda")
    b = channels.h_dl[k].conj().T @ beams.u_dl[k] @ beams.w_dl[k]
    return scipy.linalg.cho_solve(cho, b)


# ---------------------------------------------------------------------------
# Multiplier search


def _power_at(r: np.ndarray, s: np.ndarray, lam: float) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(r > 0, r / (s + lam) ** 2, 0.0)
    return float(np.sum(terms))


def _solve_power_lambda(r: np.ndarray, s: np.ndarray, p_max: float,
                        tol: float, max_iters: int) -> tuple[float, bool]:
    """Largest multiplier floor first, then bisection on total power.

    Returns (lambda, pd_limited): pd_limited marks the case where the bracket
    needs lambda > 0 for definiteness but the power constraint is already
    slack there, i.e. the sensing multiplier is too aggressive.
    """
    s_min = float(np.min(s)) if s.size else 0.0
    lam_floor = 0.0
    if s_min <= 0:
        lam_floor = -s_min * (1 + 1e-12) + 1e-18 * max(1.0, abs(s_min))
    total_r = float(np.sum(r))
    if total_r == 0.0:
        return lam_floor, False
    if _power_at(r, s, lam_floor) <= p_max * (1 + tol):
        # Power slack at the smallest admissible lambda.
        return lam_floor, lam_floor > 0
    lam_hi = np.sqrt(total_r / p_max) + max(0.0, -s_min)
    lam_lo = lam_floor
    for _ in range(max(200, max_iters)):
        mid = 0.5 * (lam_lo + lam_hi)
        if _power_at(r, s, mid) > p_max:
            lam_lo = mid
        else:
            lam_hi = mid
        if lam_hi - lam_lo <= tol * max(lam_hi, 1e-300):
            break
    # The upper endpoint keeps power <= p_max.
    return lam_hi, False


def _clip_roundoff(s: np.ndarray) -> np.ndarray:
    """Zero out eigenvalues that are negative only through round-off.

    Genuine indefiniteness from the sensing penalty produces eigenvalues
    within a few orders of magnitude of the bracket scale, far above this
    relative threshold.
    """
    scale = float(np.max(np.abs(s))) if s.size else 0.0
    tiny = 1e-12 * max(scale, 1e-300)
    return np.where(np.abs(s) <= tiny, 0.0, s)


@dataclass
class _Candidate:
    v: dict[int, np.ndarray]
    lam: float
    mu: float
    power: float
    scnr: float
    pd_limited: bool = False


class _TransmitStep:
    """Shared machinery of the UL (per-user) and DL (joint) transmit updates."""

    power_limit: float

    def eig_bracket(self, mu: float) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def rhs(self) -> dict[int, np.ndarray]:
        raise NotImplementedError

    def scnr_of(self, v: dict[int, np.ndarray]) -> float:
        raise NotImplementedError

    def mu_unit(self) -> float:
        raise NotImplementedError

    def __init__(self, settings: SolverSettings, gamma_min: float):
        self.settings = settings
        self.gamma_min = gamma_min
        self.tol = min(settings.multiplier_tol, 1e-7)
        self.fallback_used = False

    def candidate(self, mu: float) -> _Candidate:
        s, q = self.eig_bracket(mu)
        btil = {k: q.conj().T @ b for k, b in self.rhs().items()}
        r = np.zeros(s.shape[0])
        for bt in btil.values():
            r += np.sum(np.abs(bt) ** 2, axis=1)
        lam, pd_limited = _solve_power_lambda(r, s, self.power_limit, self.tol,
                                              self.settings.max_multiplier_iters)
        denom = s + lam
        denom = np.where(denom > 0, denom, 1.0)
        v = {k: q @ (bt / denom[:, None]) for k, bt in btil.items()}
        power = float(sum(np.sum(np.abs(vk) ** 2) for vk in v.values()))
        return _Candidate(v=v, lam=lam, mu=mu, power=power,
                          scnr=self.scnr_of(v), pd_limited=pd_limited)

    def search(self) -> _Candidate | None:
        """Find (lambda, mu) with complementary slackness on power and SCNR.

        Returns None when no admissible mu reaches the SCNR floor (the caller
        keeps the previous iterate).
        """
        floor = self.gamma_min
        cand0 = self.candidate(0.0)
        if floor <= 0 or cand0.scnr >= floor * (1 - self.tol):
            return cand0
        unit = self.mu_unit()
        if unit <= 0:
            return None
        mu_lo = 0.0
        mu_hi = unit
        hi = None
        monotone = True
        prev_scnr = cand0.scnr
        for _ in range(4 * self.settings.max_multiplier_iters):
            if mu_hi > self.settings.mu_cap:
                break
            cand = self.candidate(mu_hi)
            if cand.pd_limited:
                # Largest admissible mu lies below; shrink towards mu_lo.
                if mu_hi - mu_lo <= 1e-12 * max(mu_hi, 1e-300):
                    break
                mu_hi = 0.5 * (mu_lo + mu_hi)
                continue
            if cand.scnr >= floor * (1 - self.tol):
                hi = cand
                break
            if cand.scnr < prev_scnr * (1 - 1e-6):
                monotone = False
                break
            prev_scnr = cand.scnr
            mu_lo = mu_hi
            mu_hi *= 4.0
        if hi is None:
            if monotone:
                return None
            self.fallback_used = True
            return self._coordinate_fallback(mu_hi)
        best = hi
        for _ in range(self.settings.max_multiplier_iters):
            if abs(best.scnr - floor) <= self.tol * floor:
                break
            mid = 0.5 * (mu_lo + mu_hi)
            cand = self.candidate(mid)
            if cand.pd_limited or cand.scnr < floor * (1 - self.tol):
                mu_lo = mid
            else:
                mu_hi = mid
                best = cand
        return best

    def _coordinate_fallback(self, mu_max: float) -> _Candidate | None:
        """Derivative-free scalar descent on |scnr residual| over mu.

        Used when the residual is detected to be non-monotone in mu; lambda is
        re-solved exactly at every probe, so this is coordinate descent in
        (lambda, mu) with the mu coordinate handled by golden-section.
        """
        phi = (np.sqrt(5.0) - 1.0) / 2.0
        lo, hi = 0.0, max(mu_max, self.mu_unit())
        floor = self.gamma_min

        def merit(c: _Candidate) -> float:
            return abs(c.scnr - floor) if not c.pd_limited else np.inf

        x1 = hi - phi * (hi - lo)
        x2 = lo + phi * (hi - lo)
        c1, c2 = self.candidate(x1), self.candidate(x2)
        best = min([c1, c2], key=merit)
        for _ in range(self.settings.max_multiplier_iters):
            if merit(c1) <= merit(c2):
                hi, x2, c2 = x2, x1, c1
                x1 = hi - phi * (hi - lo)
                c1 = self.candidate(x1)
            else:
                lo, x1, c1 = x1, x2, c2
                x2 = lo + phi * (hi - lo)
                c2 = self.candidate(x2)
            cand = min([c1, c2], key=merit)
            if merit(cand) < merit(best):
                best = cand
            if merit(best) <= self.tol * floor:
                break
        if best.scnr >= floor * (1 - self.tol) and not best.pd_limited:
            return best
        return None


class _UplinkStep(_TransmitStep):
    def __init__(self, k: int, channels: ChannelSet, beams: BeamformerSet,
                 radar: RadarContext, scenario: Scenario,
                 settings: SolverSettings, gamma_min: float):
        super().__init__(settings, gamma_min)
        self.k = k
        self.scenario = scenario
        self.h_k = channels.h_ul[k]
        self.power_limit = scenario.user_power_max[k]
        self.j, self.psi, self._b = _ul_bracket(k, channels, beams, radar, scenario)
        # SCNR pieces that stay fixed while user k's beamformer varies.
        s_dl = dl_gram(beams, scenario)
        self.s_target = float(np.real(radar.a_t0.conj() @ s_dl @ radar.a_t0))
        rest = scenario.noise_bs * np.eye(scenario.nr, dtype=complex)
        for beta, a_m in zip(radar.beta_m, radar.clutter_mats):
            rest = rest + abs(beta) ** 2 * (a_m @ s_dl @ a_m.conj().T)
        for i, v in beams.v_ul.items():
            if i == k:
                continue
            hv = channels.h_ul[i] @ v
            rest = rest + hv @ hv.conj().T
        self.r_rest = herm(rest)
        self.a_r0 = radar.a_r0
        self.beta0_sq = abs(radar.beta0) ** 2

    def eig_bracket(self, mu: float):
        s, q = np.linalg.eigh(self.j + mu * self.psi)
        # The uplink bracket is PSD by construction.
        return np.clip(s, 0.0, None), q

    def rhs(self):
        return {self.k: self._b}

    def scnr_of(self, v):
        hv = self.h_k @ v[self.k]
        r = self.r_rest + hv @ hv.conj().T
        c = np.real(self.a_r0.conj() @ scipy.linalg.cho_solve(
            scipy.linalg.cho_factor(herm(r)), self.a_r0))
        return float(self.beta0_sq * c * self.s_target)

    def mu_unit(self):
        tr_psi = float(np.real(np.trace(self.psi)))
        if tr_psi <= 0:
            return 0.0
        scale = max(float(np.real(np.trace(self.j))), self.power_limit * tr_psi * 1e-12)
        return 1e-3 * scale / tr_psi


class _DownlinkStep(_TransmitStep):
    def __init__(self, channels: ChannelSet, beams: BeamformerSet,
                 radar: RadarContext, scenario: Scenario,
                 settings: SolverSettings, gamma_min: float):
        super().__init__(settings, gamma_min)
        self.scenario = scenario
        self.power_limit = scenario.bs_power_max
        self.j = _dl_bracket(channels, beams, radar, scenario)
        self.theta_pen = abs(radar.beta0) ** 2 * radar.theta_mat
        self._b = {k: channels.h_dl[k].conj().T @ beams.u_dl[k] @ beams.w_dl[k]
                   for k in beams.v_dl}
        rest = scenario.noise_bs * np.eye(scenario.nr, dtype=complex)
        for i, v in beams.v_ul.items():
            hv = channels.h_ul[i] @ v
            rest = rest + hv @ hv.conj().T
        self.r_rest = herm(rest)
        self.radar = radar
        self.beta0_sq = abs(radar.beta0) ** 2

    def eig_bracket(self, mu: float):
        s, q = np.linalg.eigh(self.j - mu * self.theta_pen)
        return _clip_roundoff(s), q

    def rhs(self):
        return self._b

    def scnr_of(self, v):
        s = np.zeros((self.scenario.nt, self.scenario.nt), dtype=complex)
        for vk in v.values():
            s = s + vk @ vk.conj().T
        r = self.r_rest.copy()
        for beta, a_m in zip(self.radar.beta_m, self.radar.clutter_mats):
            r = r + abs(beta) ** 2 * (a_m @ s @ a_m.conj().T)
        c = np.real(self.radar.a_r0.conj() @ scipy.linalg.cho_solve(
            scipy.linalg.cho_factor(herm(r)), self.radar.a_r0))
        s_target = float(np.real(self.radar.a_t0.conj() @ s @ self.radar.a_t0))
        return float(self.beta0_sq * c * s_target)

    def mu_unit(self):
        tr_pen = float(np.real(np.trace(self.theta_pen)))
        if tr_pen <= 0:
            return 0.0
        scale = max(float(np.real(np.trace(self.j))), self.power_limit * tr_pen * 1e-12)
        return 1e-3 * scale / tr_pen


def _make_step(update_kind: str, context: UpdateContext) -> _TransmitStep:
    gamma_min = context.floor()
    if update_kind == "ul":
        if context.user is None:
            raise ValueError("uplink updates need context.user")
        return _UplinkStep(context.user, context.channels, context.beams,
                           context.radar, context.scenario, context.settings,
                           gamma_min)
    if update_kind == "dl":
        return _DownlinkStep(context.channels, context.beams, context.radar,
                             context.scenario, context.settings, gamma_min)
    raise ValueError(f"unknown update kind {update_kind!r}")


def solve_multipliers(update_kind: str, context: UpdateContext) -> tuple[float, float]:
    """Multiplier pair (lambda, mu) with complementary slackness on the
    power and SCNR constraints of one transmit update."""
    step = _make_step(update_kind, context)
    cand = step.search()
    if cand is None:
        raise MultiplierSearchError(
            f"no feasible multiplier pair for {update_kind} update")
    return cand.lam, cand.mu


# ---------------------------------------------------------------------------
# Inner loop


def check_constraints(channels: ChannelSet, beams: BeamformerSet,
                      partition: Partition, scenario: Scenario,
                      gamma_min: float, rtol: float = FEASIBILITY_RTOL) -> bool:
    for k in partition.ul:
        if beams.user_power(k) > scenario.user_power_max[k] * (1 + rtol):
            return False
    if beams.bs_power() > scenario.bs_power_max * (1 + rtol):
        return False
    if gamma_min > 0:
        if scnr(channels, beams, partition, scenario) < gamma_min * (1 - rtol):
            return False
    return True


def _outage_result(partition: Partition, beams: BeamformerSet | None,
                   scnr_value: float, diagnostics: dict | None = None) -> SolveResult:
    return SolveResult(beams=beams, partition=partition, sum_rate=0.0,
                       scnr_achieved=scnr_value, feasible=False, outage=True,
                       iterations=0, objective_trace=[],
                       diagnostics=diagnostics or {})


def inner_optimize(channels: ChannelSet, partition: Partition,
                   init_beams: BeamformerSet, settings: SolverSettings,
                   scenario: Scenario, gamma_min: float | None = None) -> SolveResult:
    """Alternating optimization at a fixed partition, from a feasible start.

    The sum-rate trace is non-decreasing: a transmit block whose application
    would lower the rate (possible when the linearized sensing constraint is
    binding) is rejected and the previous iterate kept.  Terminates when the
    rate change over one pass falls below ``settings.inner_tol``.
    """
    floor = scenario.scnr_min if gamma_min is None else gamma_min
    beams = init_beams.copy()
    beams.validate(partition)
    if not check_constraints(channels, beams, partition, scenario, floor,
                             rtol=1e-9):
        achieved = scnr(channels, beams, partition, scenario)
        return _outage_result(partition, beams, achieved,
                              {"reason": "infeasible_initialization"})

    radar = radar_context(channels, beams, partition, scenario)
    trace = [sum_rate(channels, beams, partition, scenario)]
    diagnostics = {"converged": False, "ul_reverts": 0, "dl_reverts": 0,
                   "infeasible_steps": 0, "fallback_searches": 0,
                   "multipliers": {"ul": {}, "dl": None}}
    trace_rows: list[tuple] = []
    iterations = 0

    for _ in range(settings.max_inner_iters):
        iterations += 1
        cov_bs = bs_receive_covariance(channels, beams, scenario)
        for k in partition.ul:
            beams.u_ul[k] = np.linalg.solve(cov_bs, channels.h_ul[k] @ beams.v_ul[k])
        for k in partition.dl:
            beams.u_dl[k] = update_receive_dl(k, channels, beams, scenario)
        for k in partition.ul:
            beams.w_ul[k] = update_weight(("ul", k), channels, beams)
        for k in partition.dl:
            beams.w_dl[k] = update_weight(("dl", k), channels, beams)

        rate_running = trace[-1]

        for k in partition.ul:
            step = _UplinkStep(k, channels, beams, radar, scenario, settings, floor)
            cand = step.search()
            if step.fallback_used:
                diagnostics["fallback_searches"] += 1
            if cand is None:
                diagnostics["infeasible_steps"] += 1
                continue
            previous = beams.v_ul[k]
            beams.v_ul[k] = cand.v[k]
            rate = sum_rate(channels, beams, partition, scenario)
            if rate < rate_running:
                beams.v_ul[k] = previous
                diagnostics["ul_reverts"] += 1
            else:
                rate_running = rate
                diagnostics["multipliers"]["ul"][k] = (cand.lam, cand.mu)
        rate_ul = rate_running

        if partition.dl:
            snapshot_dl = {k: beams.v_dl[k] for k in partition.dl}
            step = _DownlinkStep(channels, beams, radar, scenario, settings, floor)
            cand = step.search()
            if step.fallback_used:
                diagnostics["fallback_searches"] += 1
            if cand is None:
                diagnostics["infeasible_steps"] += 1
                rate_new = rate_ul
            else:
                beams.v_dl.update(cand.v)
                diagnostics["multipliers"]["dl"] = (cand.lam, cand.mu)
                rate_new = sum_rate(channels, beams, partition, scenario)
                if rate_new < rate_ul:
                    beams.v_dl.update(snapshot_dl)
                    rate_new = rate_ul
                    diagnostics["dl_reverts"] += 1
        else:
            rate_new = rate_ul

        radar = radar_context(channels, beams, partition, scenario)
        if rate_new < trace[-1] - 1e-6:
            raise MonotonicityError(
                f"sum rate decreased by {trace[-1] - rate_new:.3e} nats in one pass")
        trace.append(rate_new)
        if settings.collect_trace:
            achieved = scnr(channels, beams, partition, scenario)
            max_up = max((beams.user_power(k) for k in partition.ul), default=0.0)
            trace_rows.append((iterations, rate_new, achieved,
                               beams.bs_power(), max_up))
        if abs(trace[-1] - trace[-2]) <= settings.inner_tol:
            diagnostics["converged"] = True
            break

    # Refresh receive/weight matrices so that sum(logdet W) matches the rate
    # of the returned beamformers.
    cov_bs = bs_receive_covariance(channels, beams, scenario)
    for k in partition.ul:
        beams.u_ul[k] = np.linalg.solve(cov_bs, channels.h_ul[k] @ beams.v_ul[k])
        beams.w_ul[k] = update_weight(("ul", k), channels, beams)
    for k in partition.dl:
        beams.u_dl[k] = update_receive_dl(k, channels, beams, scenario)
        beams.w_dl[k] = update_weight(("dl", k), channels, beams)

    achieved = scnr(channels, beams, partition, scenario)
    if not check_constraints(channels, beams, partition, scenario, floor):
        raise SolverInvariantError("converged iterate violates a constraint")
    if settings.collect_trace:
        diagnostics["trace_rows"] = trace_rows
    return SolveResult(beams=beams, partition=partition, sum_rate=trace[-1],
                       scnr_achieved=achieved, feasible=True, outage=False,
                       iterations=iterations, objective_trace=trace,
                       diagnostics=diagnostics)
