"""Monte Carlo sweep harness: paired trials, CSV persistence, aggregation.

Every scheme at one (sweep value, trial) pair consumes the identical channel
realization, drawn from a substream keyed by (seed, point index, trial), so
results do not depend on execution order and parallel runs reproduce serial
ones.  Outage trials are recorded with zero rate and enter the averages as
zeros; the outage fraction is reported separately by ``aggregate``.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import baselines, partition as partition_mod
from .config import linear_to_db
from .scenario import Scenario, channel_stream, generate_channels
from .solver import (MonotonicityError, MultiplierSearchError,
                     SolverInvariantError, SolverSettings)

CSV_HEADER = ("sweep_kind,sweep_value,trial,seed,scheme,sum_rate_nats,"
              "scnr_db,outage,iterations,wall_time_ms")

SWEEP_KINDS = ("bs_power", "user_power", "scnr_floor", "num_users")
SCHEMES = ("flexd", "hd", "zf", "exhaustive")


@dataclass
class SweepSpec:
    sweep_kind: str
    values: tuple[float, ...]
    trials: int
    schemes: tuple[str, ...]
    scenario: Scenario
    settings: SolverSettings = field(default_factory=SolverSettings)
    workers: int = 1
    measure_time: bool = True

    def __post_init__(self):
        if self.sweep_kind not in SWEEP_KINDS:
            raise ValueError(f"sweep_kind must be one of {SWEEP_KINDS}")
        self.values = tuple(float(v) for v in self.values)
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        self.schemes = tuple(self.schemes)
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; choose from {SCHEMES}")
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True)
class TrialRecord:
    sweep_kind: str
    sweep_value: float
    trial_index: int
    seed: int
    scheme: str
    sum_rate_nats: float
    scnr_db: float
    outage: bool
    iterations: int
    wall_time_ms: float


def scenario_at(base: Scenario, kind: str, value: float) -> Scenario:
    """Scenario for one sweep point; dB-valued sweeps convert to linear here."""
    if kind == "bs_power":
        return dataclasses.replace(base, bs_power_max=10.0 ** (value / 10.0) / 1000.0)
    if kind == "user_power":
        watts = 10.0 ** (value / 10.0) / 1000.0
        return dataclasses.replace(base, user_power_max=watts)
    if kind == "scnr_floor":
        return dataclasses.replace(base, scnr_min=10.0 ** (value / 10.0))
    if kind == "num_users":
        k = int(value)
        # Per-user tuples are rebuilt from their first entry.
        return dataclasses.replace(
            base, num_users=k,
            user_antennas=base.user_antennas[0],
            streams_ul=None, streams_dl=None,
            user_power_max=base.user_power_max[0])
    raise ValueError(f"unknown sweep kind {kind!r}")


def _scnr_db(linear: float) -> float:
    if linear <= 0:
        return -math.inf
    return linear_to_db(linear)


def run_trial(scenario: Scenario, settings: SolverSettings, schemes,
              kind: str, value: float, point: int, trial: int,
              measure_time: bool = True) -> list[TrialRecord]:
    """All requested schemes on one shared channel realization."""
    rng = channel_stream(scenario, trial=trial, point=point)
    channels = generate_channels(scenario, rng)
    records = []
    for scheme in schemes:
        start = time.perf_counter()
        try:
            if scheme == "flexd":
                res = partition_mod.pattern_search(channels, scenario, settings)
            elif scheme == "exhaustive":
                res = partition_mod.exhaustive_search(channels, scenario, settings)
            elif scheme == "hd":
                res = baselines.hd_solve(channels, scenario, settings)
            elif scheme == "zf":
                res = baselines.zf_solve(channels, scenario, settings)
            else:
                raise ValueError(f"unknown scheme {scheme!r}")
            rate = res.sum_rate if not res.outage else 0.0
            record = TrialRecord(
                sweep_kind=kind, sweep_value=value, trial_index=trial,
                seed=scenario.seed, scheme=scheme, sum_rate_nats=rate,
                scnr_db=_scnr_db(res.scnr_achieved), outage=res.outage,
                iterations=res.iterations,
                wall_time_ms=(time.perf_counter() - start) * 1e3 if measure_time else 0.0)
        except (MonotonicityError, SolverInvariantError, MultiplierSearchError) as exc:
            # Invariant violations abort the trial for this scheme and leave a
            # diagnostic record: zero rate, outage, NaN SCNR.
            record = TrialRecord(
                sweep_kind=kind, sweep_value=value, trial_index=trial,
                seed=scenario.seed, scheme=scheme, sum_rate_nats=0.0,
                scnr_db=math.nan, outage=True, iterations=-1,
                wall_time_ms=(time.perf_counter() - start) * 1e3 if measure_time else 0.0)
            logging.getLogger(__name__).error(
                "trial aborted (%s, value=%s, trial=%d): %s", scheme, value, trial, exc)
        records.append(record)
    return records


def _run_point_trial(args) -> list[TrialRecord]:
    base, settings, schemes, kind, value, point, trial, measure = args
    scenario = scenario_at(base, kind, value)
    return run_trial(scenario, settings, schemes, kind, value, point, trial,
                     measure_time=measure)


def run_sweep(spec: SweepSpec) -> list[TrialRecord]:
    """All (sweep value, trial, scheme) records, canonically sorted.

    Power and SCNR-floor sweeps reuse one channel realization per trial across
    all sweep values (the sweep variable does not enter the channel draw), so
    curves over the sweep are paired; the user-count sweep redraws, as the
    channel dimensions change with K.
    """
    jobs = [(spec.scenario, spec.settings, spec.schemes, spec.sweep_kind,
             value, point if spec.sweep_kind == "num_users" else 0, trial,
             spec.measure_time)
            for point, value in enumerate(spec.values)
            for trial in range(spec.trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(_run_point_trial, jobs, chunksize=1))
    else:
        chunks = [_run_point_trial(job) for job in jobs]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.sweep_value, r.trial_index, r.scheme))
    return records


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_records(records: list[TrialRecord], path) -> None:
    """CSV with the fixed header; floats carry 9 significant digits."""
    if not records:
        raise ValueError("no records to write")
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            r.sweep_kind, _fmt(r.sweep_value), str(r.trial_index), str(r.seed),
            r.scheme, _fmt(r.sum_rate_nats), _fmt(r.scnr_db),
            "1" if r.outage else "0", str(r.iterations), _fmt(r.wall_time_ms)]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_records(path) -> list[TrialRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    records = []
    for line in lines[1:]:
        if not line:
            continue
        (kind, value, trial, seed, scheme, rate, scnr_db, outage, iters,
         wall) = line.split(",")
        records.append(TrialRecord(
            sweep_kind=kind, sweep_value=float(value), trial_index=int(trial),
            seed=int(seed), scheme=scheme, sum_rate_nats=float(rate),
            scnr_db=float(scnr_db), outage=bool(int(outage)),
            iterations=int(iters), wall_time_ms=float(wall)))
    return records


def aggregate(records: list[TrialRecord]) -> dict[tuple[float, str], dict]:
    """Mean rate (outages as zeros) and outage fraction per (value, scheme)."""
    groups: dict[tuple[float, str], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.sweep_value, r.scheme), []).append(r)
    out = {}
    for key, group in sorted(groups.items()):
        rates = [r.sum_rate_nats for r in group]
        n = len(group)
        mean = sum(rates) / n
        var = sum((x - mean) ** 2 for x in rates) / n if n > 1 else 0.0
        out[key] = {
            "mean_rate": mean,
            "stderr": math.sqrt(var / n) if n > 1 else 0.0,
            "outage_fraction": sum(1 for r in group if r.outage) / n,
            "trials": n,
        }
    return out
