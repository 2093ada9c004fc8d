"""Run configuration: flat key-value text files plus CLI overrides.

Numeric defaults follow the reference parameter table (guidance cost range,
supply-imbalance weights, speed, SoC reserve, consumption rates, window
length, objective and CS-selection weights, initial SoC range). Everything
else is an artifact knob: battery capacity to convert kWh/km consumption
into SoC-fraction/km, charge rate, CS search radius, scenario count, rider
patience, fleet size, region rectangles, and synthetic-data shape. Region
rectangles default to plausible Manhattan-style boxes and are not sourced
from any dataset.

File format: one `key = value` per line, `#` comments, lists
comma-separated, region boxes as `region.<i> = min_lat,min_lon,max_lat,max_lon`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .core import Rect


class ConfigError(Exception):
    """Invalid configuration; message names the offending field."""


# 2x2 grid with ~4.5 km POI spacing: adjacent POIs sit inside the one-window
# guidance reach (speed * window = 5 km) while rider pickup reach under the
# default patience is mostly within-region, so fleet placement decides the
# matching rate and guidance can actually rebalance it.
DEFAULT_REGIONS = [
    Rect(40.7000, -74.0100, 40.7230, -73.9800),
    Rect(40.7000, -73.9550, 40.7230, -73.9250),
    Rect(40.7400, -74.0100, 40.7630, -73.9800),
    Rect(40.7400, -73.9550, 40.7630, -73.9250),
]

DEFAULT_BBOX = Rect(40.68, -74.04, 40.79, -73.90)


@dataclass
class Config:
    # reference parameter table
    alpha_min: float = 0.8            # $/km guidance cost, lower bound
    alpha_max: float = 1.1
    beta1: float = 5.0                # over-supply weight
    beta2: float = 10.0               # under-supply weight
    gamma_kmh: float = 30.0           # EV speed
    lam: float = 0.10                 # SoC reserve fraction
    omega_kwh_per_km: tuple[float, ...] = (0.1171, 0.1751, 0.1863)
    delta_t_min: float = 10.0         # batching window
    theta1: float = 1.0               # CS-selection weight in matching
    theta2: float = 10.0              # rider-wait weight in matching
    pi1: float = 1.0                  # CS travel-distance weight
    pi2: float = 10.0                 # CS expected-wait weight
    soc_init_min: float = 0.2
    soc_init_max: float = 0.8
    # artifact knobs
    battery_kwh: float = 40.0
    charge_rate_per_hour: float = 1.4     # battery fraction per hour
    cs_radius_km: float = 3.0
    saa_scenarios: int = 100
    mixture_components: int = 2
    rider_patience_min: float = 12.0
    n_evs: int = 50
    charge_after_trip: bool = True
    use_fleet_cap: bool = True
    trip_fallback_km: float = 2.5
    seed: int = 0
    regions: list[Rect] = field(default_factory=lambda: list(DEFAULT_REGIONS))
    bbox: Rect = DEFAULT_BBOX
    # synthetic dataset shape
    synth_train_days: int = 48
    synth_sim_weekdays: int = 6
    synth_sim_weekends: int = 6
    synth_stations: int = 8
    demand_scale: float = 1.0

    @property
    def omega_fraction_per_km(self) -> tuple[float, ...]:
        """Consumption rates as SoC fraction/km via the battery capacity."""
        return tuple(w / self.battery_kwh for w in self.omega_kwh_per_km)

    @property
    def windows_per_day(self) -> int:
        return int(round(1440.0 / self.delta_t_min))

    def validate(self) -> None:
        checks = [
            ("alpha_min", 0.0 < self.alpha_min <= self.alpha_max),
            ("beta1", self.beta1 > 0.0),
            ("beta2", self.beta2 > 0.0),
            ("gamma_kmh", self.gamma_kmh > 0.0),
            ("lam", 0.0 <= self.lam < 1.0),
            ("omega_kwh_per_km", len(self.omega_kwh_per_km) > 0
             and all(w > 0.0 for w in self.omega_kwh_per_km)),
            ("delta_t_min", self.delta_t_min > 0.0
             and abs(1440.0 / self.delta_t_min - round(1440.0 / self.delta_t_min)) < 1e-9),
            ("theta1", self.theta1 >= 0.0),
            ("theta2", self.theta2 >= 0.0),
            ("pi1", self.pi1 >= 0.0),
            ("pi2", self.pi2 >= 0.0),
            ("soc_init_min", 0.0 <= self.soc_init_min <= self.soc_init_max <= 1.0),
            ("battery_kwh", self.battery_kwh > 0.0),
            ("charge_rate_per_hour", self.charge_rate_per_hour > 0.0),
            ("cs_radius_km", self.cs_radius_km > 0.0),
            ("saa_scenarios", self.saa_scenarios >= 1),
            ("mixture_components", self.mixture_components >= 1),
            ("rider_patience_min", self.rider_patience_min > 0.0),
            ("n_evs", self.n_evs >= 0),
            ("trip_fallback_km", self.trip_fallback_km > 0.0),
            ("seed", self.seed >= 0),
            ("regions", len(self.regions) >= 1),
            ("synth_train_days", self.synth_train_days >= 16),
            ("synth_sim_weekdays", self.synth_sim_weekdays >= 1),
            ("synth_sim_weekends", self.synth_sim_weekends >= 1),
            ("synth_stations", self.synth_stations >= 1),
            ("demand_scale", self.demand_scale > 0.0),
        ]
        bad = [name for name, ok in checks if not ok]
        if bad:
            raise ConfigError("invalid config fields: " + ", ".join(bad))


_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}


def _parse_value(name: str, raw: str, kind):
    try:
        if kind is bool:
            return _BOOL[raw.strip().lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == tuple[float, ...]:
            return tuple(float(v) for v in raw.split(","))
        if kind is Rect:
            a, b, c, d = (float(v) for v in raw.split(","))
            return Rect(a, b, c, d)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"cannot parse config field {name} = {raw!r}") from exc
    raise ConfigError(f"unsupported config field type for {name}")


def apply_overrides(cfg: Config, overrides: list[str]) -> Config:
    """Apply `key=value` strings (the --set flag) on top of cfg."""
    defaults = Config()
    regions = list(cfg.regions)
    updates = {}
    bbox = cfg.bbox
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        key, raw = key.strip(), raw.strip()
        if key.startswith("region."):
            idx = int(key.split(".", 1)[1])
            rect = _parse_value(key, raw, Rect)
            while len(regions) <= idx:
                regions.append(rect)
            regions[idx] = rect
            continue
        if key == "bbox":
            bbox = _parse_value(key, raw, Rect)
            continue
        if not hasattr(defaults, key) or key == "regions":
            raise ConfigError(f"unknown config field {key}")
        default = getattr(defaults, key)
        if isinstance(default, bool):
            kind = bool
        elif isinstance(default, int):
            kind = int
        elif isinstance(default, float):
            kind = float
        elif isinstance(default, tuple):
            kind = tuple[float, ...]
        else:
            raise ConfigError(f"config field {key} cannot be set from text")
        updates[key] = _parse_value(key, raw, kind)
    cfg = dataclasses.replace(cfg, regions=regions, bbox=bbox, **updates)
    return cfg


def load_config(path: str | Path | None,
                overrides: list[str] | None = None) -> Config:
    """Defaults, then the optional file, then --set overrides; validated."""
    cfg = Config()
    items: list[str] = []
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        for line in p.read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"bad config line: {line!r}")
            items.append(line)
    cfg = apply_overrides(cfg, items)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    cfg.validate()
    return cfg


def resolved_text(cfg: Config) -> str:
    """Flat key-value dump of the fully-resolved config (report provenance)."""
    lines = []
    for f in dataclasses.fields(Config):
        value = getattr(cfg, f.name)
        if f.name == "regions":
            for i, r in enumerate(value):
                lines.append(f"region.{i} = {r.min_lat},{r.min_lon},{r.max_lat},{r.max_lon}")
            continue
        if f.name == "bbox":
            lines.append(f"bbox = {value.min_lat},{value.min_lon},{value.max_lat},{value.max_lon}")
            continue
        if isinstance(value, tuple):
            lines.append(f"{f.name} = {','.join(str(v) for v in value)}")
        elif isinstance(value, bool):
            lines.append(f"{f.name} = {'true' if value else 'false'}")
        else:
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
