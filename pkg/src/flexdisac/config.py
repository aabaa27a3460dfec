"""Flat dotted-key configuration: file parsing, environment overrides, units.

Config files are plain text, one ``key = value`` pair per line with ``#``
comments.  Keys are dotted paths (``scenario.nt``, ``solver.inner_tol``,
``sweep.kind``).  Power-like quantities may be given either in linear units
(watts / ratios) under the field name, or in dB units under a ``*_dbm`` /
``*_db`` alias; internally everything is linear.  Any key can be overridden
through the environment as ``FLEXDISAC_<KEY>`` with dots replaced by double
underscores (e.g. ``FLEXDISAC_SCENARIO__NT=8``).
"""

from __future__ import annotations

import math
import os

from .scenario import SPEED_OF_LIGHT, Scenario
from .solver import SolverSettings

ENV_PREFIX = "FLEXDISAC_"


class ConfigError(ValueError):
    """Configuration problem; the message carries the offending key path."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts * 1000.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def parse_config_text(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def apply_env_overrides(entries: dict[str, str], env=None) -> dict[str, str]:
    env = os.environ if env is None else env
    out = dict(entries)
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".")
        out[key] = value
    return out


def _take(entries: dict[str, str], key: str, parse, default=None):
    if key in entries:
        raw = entries.pop(key)
        try:
            return parse(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from exc
    return default


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in raw.split(",") if v.strip())


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(v) for v in raw.split(",") if v.strip())


def _strs(raw: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in raw.split(",") if v.strip())


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _scalar_or_list_int(raw: str):
    vals = _ints(raw)
    return vals[0] if len(vals) == 1 else vals


def _scalar_or_list_float(raw: str):
    vals = _floats(raw)
    return vals[0] if len(vals) == 1 else vals


def scenario_from_entries(entries: dict[str, str]) -> Scenario:
    """Build a Scenario from ``scenario.*`` keys, consuming them."""
    kw = {}
    kw["num_users"] = _take(entries, "scenario.num_users", int, 5)
    kw["nt"] = _take(entries, "scenario.nt", int, 6)
    kw["nr"] = _take(entries, "scenario.nr", int, 4)
    kw["user_antennas"] = _take(entries, "scenario.user_antennas",
                                _scalar_or_list_int, 4)
    streams_ul = _take(entries, "scenario.streams_ul", _scalar_or_list_int)
    if streams_ul is not None:
        kw["streams_ul"] = streams_ul
    streams_dl = _take(entries, "scenario.streams_dl", _scalar_or_list_int)
    if streams_dl is not None:
        kw["streams_dl"] = streams_dl
    kw["area_side"] = _take(entries, "scenario.area_side", float, 1000.0)
    bs_pos = _take(entries, "scenario.bs_position", _floats)
    if bs_pos is not None:
        if len(bs_pos) != 2:
            raise ConfigError("scenario.bs_position: expected two coordinates")
        kw["bs_position"] = bs_pos

    angle_deg = _take(entries, "scenario.target_angle_deg", float, 45.0)
    kw["target_angle"] = math.radians(angle_deg)
    kw["target_range"] = _take(entries, "scenario.target_range", float, 50.0)
    clutter_deg = _take(entries, "scenario.clutter_angles_deg", _floats, (0.0, 90.0))
    clutter_rng = _take(entries, "scenario.clutter_ranges", _floats,
                        tuple(40.0 for _ in clutter_deg))
    if len(clutter_deg) != len(clutter_rng):
        raise ConfigError("scenario.clutter_angles_deg and scenario.clutter_ranges "
                          "must have the same length")
    kw["clutter"] = tuple((math.radians(a), r) for a, r in zip(clutter_deg, clutter_rng))

    wavelength = _take(entries, "scenario.carrier_wavelength", float)
    freq = _take(entries, "scenario.carrier_frequency_hz", float)
    if wavelength is not None:
        kw["carrier_wavelength"] = wavelength
    elif freq is not None:
        kw["carrier_wavelength"] = SPEED_OF_LIGHT / freq
    for key, field in [("scenario.element_spacing_rx", "element_spacing_rx"),
                       ("scenario.element_spacing_tx", "element_spacing_tx")]:
        val = _take(entries, key, float)
        if val is not None:
            kw[field] = val

    def power(linear_key: str, db_key: str, convert, default):
        linear = _take(entries, linear_key, _scalar_or_list_float)
        db = _take(entries, db_key, _scalar_or_list_float)
        if linear is not None and db is not None:
            raise ConfigError(f"{linear_key} and {db_key} are mutually exclusive")
        if db is not None:
            if isinstance(db, tuple):
                return tuple(convert(v) for v in db)
            return convert(db)
        return linear if linear is not None else default

    kw["bs_power_max"] = power("scenario.bs_power_max", "scenario.bs_power_dbm",
                               dbm_to_watts, 10.0)
    kw["user_power_max"] = power("scenario.user_power_max", "scenario.user_power_dbm",
                                 dbm_to_watts, 1.0)
    kw["scnr_min"] = power("scenario.scnr_min", "scenario.scnr_min_db",
                           db_to_linear, 0.01)
    kw["noise_bs"] = power("scenario.noise_bs", "scenario.noise_bs_dbm",
                           dbm_to_watts, 3.16e-9)
    kw["noise_user"] = power("scenario.noise_user", "scenario.noise_user_dbm",
                             dbm_to_watts, 3.16e-9)
    kw["antenna_gain"] = power("scenario.antenna_gain", "scenario.antenna_gain_db",
                               db_to_linear, 10.0)
    kw["rcs"] = _take(entries, "scenario.rcs", float, 500.0)
    kw["seed"] = _take(entries, "scenario.seed", int, 0)
    try:
        return Scenario(**kw)
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def settings_from_entries(entries: dict[str, str]) -> SolverSettings:
    kw = {}
    for key, parse in [("inner_tol", float), ("max_inner_iters", int),
                       ("multiplier_tol", float), ("max_multiplier_iters", int),
                       ("mu_cap", float), ("delta", float),
                       ("collect_trace", _bool)]:
        val = _take(entries, f"solver.{key}", parse)
        if val is not None:
            kw[key] = val
    try:
        return SolverSettings(**kw)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def sweep_from_entries(entries: dict[str, str]) -> dict:
    """Sweep description: kind, values, trials, schemes, workers, timing flag."""
    kind = _take(entries, "sweep.kind", str, "bs_power")
    values = _take(entries, "sweep.values", _floats)
    trials = _take(entries, "sweep.trials", int, 10)
    schemes = _take(entries, "sweep.schemes", _strs, ("flexd", "hd", "zf"))
    workers = _take(entries, "sweep.workers", int, 1)
    measure_time = _take(entries, "sweep.measure_time", _bool, True)
    return {"kind": kind, "values": values, "trials": trials,
            "schemes": schemes, "workers": workers, "measure_time": measure_time}


def load_config(path: str, env=None) -> tuple[Scenario, SolverSettings, dict]:
    """Parse a config file plus environment overrides.

    Unknown keys are rejected so typos surface immediately.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            entries = parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    entries = apply_env_overrides(entries, env=env)
    scenario = scenario_from_entries(entries)
    settings = settings_from_entries(entries)
    sweep = sweep_from_entries(entries)
    if entries:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(entries))}")
    return scenario, settings, sweep
