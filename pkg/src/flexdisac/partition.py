"""Outer combinatorial layer: choice of the downlink user set.

``pattern_search`` is a deterministic best-improvement local search over
single-user flips, started from a channel-gain heuristic; ``exhaustive_search``
sweeps all 2^K subsets and serves as its validation oracle.  Both run the same
initialize-then-optimize inner pipeline per candidate partition, so on any
instance the exhaustive result is at least as good as the pattern-search one.
"""

from __future__ import annotations

import numpy as np

from .initializer import initialize
from .metrics import Partition
from .scenario import ChannelSet, Scenario
from .solver import SolveResult, SolverSettings, inner_optimize

EXHAUSTIVE_MAX_USERS = 12


def evaluate_partition(channels: ChannelSet, partition: Partition,
                       scenario: Scenario, settings: SolverSettings,
                       gamma_min: float | None = None) -> SolveResult:
    """Initialize and optimize one partition; outage when initialization fails."""
    init = initialize(channels, partition, scenario, settings, gamma_min=gamma_min)
    if not init.feasible:
        return SolveResult(beams=init.beams, partition=partition, sum_rate=0.0,
                           scnr_achieved=init.scnr, feasible=False, outage=True,
                           iterations=0, objective_trace=[],
                           diagnostics={"reason": "infeasible_initialization"})
    return inner_optimize(channels, partition, init.beams, settings, scenario,
                          gamma_min=gamma_min)


def _result_key(res: SolveResult) -> tuple:
    """Ordering key: feasibility, rate, then smaller and lexicographic DL set."""
    dl = res.partition.dl
    return (res.feasible, res.sum_rate, -len(dl), tuple(-u for u in dl))


def _heuristic_partition(channels: ChannelSet, scenario: Scenario) -> Partition:
    """Assign each user to its stronger direction by Frobenius channel gain,
    rebalancing so that neither set ends up empty."""
    k_total = scenario.num_users
    dl_gain = np.array([np.linalg.norm(channels.h_dl[k]) for k in range(k_total)])
    ul_gain = np.array([np.linalg.norm(channels.h_ul[k]) for k in range(k_total)])
    ratio = dl_gain / np.maximum(ul_gain, 1e-300)
    dl = {k for k in range(k_total) if ratio[k] >= 1.0}
    if not dl:
        dl = {int(np.argmax(ratio))}
    elif len(dl) == k_total:
        dl.discard(int(np.argmin(ratio)))
    return Partition.from_dl(dl, k_total)


def pattern_search(channels: ChannelSet, scenario: Scenario,
                   settings: SolverSettings,
                   gamma_min: float | None = None) -> SolveResult:
    """Best-improvement single-flip local search over partitions.

    Starts from the gain heuristic (falling back to the all-downlink set when
    that start is sensing-infeasible, the all-DL set being the easiest one to
    initialize), evaluates all K single-user flips per round and moves to the
    best improving neighbor, visiting at most 1 + K^2 partitions.
    """
    k_total = scenario.num_users
    budget = 1 + k_total * k_total
    visited: dict[tuple, SolveResult] = {}

    def evaluate(partition: Partition) -> SolveResult:
        key = partition.dl
        if key not in visited:
            visited[key] = evaluate_partition(channels, partition, scenario,
                                              settings, gamma_min=gamma_min)
        return visited[key]

    current = evaluate(_heuristic_partition(channels, scenario))
    if not current.feasible and len(visited) < budget:
        all_dl = evaluate(Partition.from_dl(range(k_total), k_total))
        if _result_key(all_dl) > _result_key(current):
            current = all_dl

    while len(visited) < budget:
        flips = []
        for user in range(k_total):
            dl = set(current.partition.dl)
            dl.symmetric_difference_update({user})
            flips.append(Partition.from_dl(dl, k_total))
        best_neighbor = None
        for cand in flips:
            if len(visited) >= budget and cand.dl not in visited:
                continue
            res = evaluate(cand)
            if best_neighbor is None or _result_key(res) > _result_key(best_neighbor):
                best_neighbor = res
        if best_neighbor is None or not (_result_key(best_neighbor) > _result_key(current)):
            break
        current = best_neighbor

    best = max(visited.values(), key=_result_key)
    best.diagnostics["partitions_visited"] = len(visited)
    if not best.feasible:
        return SolveResult(beams=None, partition=best.partition, sum_rate=0.0,
                           scnr_achieved=best.scnr_achieved, feasible=False,
                           outage=True, iterations=0, objective_trace=[],
                           diagnostics={"partitions_visited": len(visited)})
    return best


def exhaustive_search(channels: ChannelSet, scenario: Scenario,
                      settings: SolverSettings,
                      gamma_min: float | None = None) -> SolveResult:
    """Evaluate every subset of users as the DL set and keep the best feasible."""
    k_total = scenario.num_users
    if k_total > EXHAUSTIVE_MAX_USERS:
        raise ValueError(
            f"exhaustive search is limited to {EXHAUSTIVE_MAX_USERS} users, got {k_total}")
    best = None
    count = 0
    for mask in range(2 ** k_total):
        dl = [u for u in range(k_total) if mask & (1 << u)]
        res = evaluate_partition(channels, Partition.from_dl(dl, k_total),
                                 scenario, settings, gamma_min=gamma_min)
        count += 1
        if best is None or _result_key(res) > _result_key(best):
            best = res
    best.diagnostics["partitions_visited"] = count
    if not best.feasible:
        return SolveResult(beams=None, partition=best.partition, sum_rate=0.0,
                           scnr_achieved=best.scnr_achieved, feasible=False,
                           outage=True, iterations=0, objective_trace=[],
                           diagnostics={"partitions_visited": count})
    return best
