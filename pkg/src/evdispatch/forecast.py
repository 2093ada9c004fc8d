"""Probabilistic rider-demand forecasting behind a pluggable model surface.

Each (region, window-of-day) slot carries its empirical history and a
K-component Gaussian mixture fitted by EM on the per-day counts. Scenario
sets for the stochastic guidance model are i.i.d. mixture draws truncated at
zero and rounded to integers; the deterministic benchmark uses the rounded
mixture mean. Any forecaster producing per-slot mixtures (e.g. a neural
mixture-density network) can be swapped in behind the same model type.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MIN_OBSERVATIONS = 8
FALLBACK_VARIANCE_FLOOR = 1.0
EM_VARIANCE_FLOOR = 1e-2
EM_MAX_ITER = 300
EM_TOL = 1e-10


@dataclass(frozen=True)
class SlotMixture:
    """Mixture for one (region, window-of-day) slot."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    history: np.ndarray

    def __post_init__(self) -> None:
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.variances <= 0.0) or np.any(self.means < 0.0):
            raise ValueError("mixture needs positive variances, non-negative means")

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))


@dataclass(frozen=True)
class ForecastModel:
    """Fitted mixtures keyed by (region_id, slot); slot in [0, windows_per_day)."""

    windows_per_day: int
    slots: dict[tuple[int, int], SlotMixture]

    def slot(self, region: int, t: int) -> SlotMixture:
        return self.slots[(region, t % self.windows_per_day)]


@dataclass(frozen=True)
class DemandScenarioSet:
    """N sampled demand outcomes per region for one window."""

    samples: dict[int, np.ndarray]
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("scenario count must be >= 1")
        for rid, arr in self.samples.items():
            if len(arr) != self.n or np.any(arr < 0):
                raise ValueError(f"bad scenario array for region {rid}")

    def for_region(self, region: int) -> np.ndarray:
        return self.samples[region]


def _fit_single(obs: np.ndarray) -> SlotMixture:
    mean = float(np.mean(obs)) if len(obs) else 0.0
    var = float(np.var(obs)) if len(obs) else 0.0
    return SlotMixture(np.array([1.0]),
                       np.array([max(mean, 0.0)]),
                       np.array([max(var, FALLBACK_VARIANCE_FLOOR)]),
                       obs.copy())


def _fit_em(obs: np.ndarray, k: int) -> SlotMixture:
    """1-D Gaussian mixture by EM with deterministic quantile init."""
    n = len(obs)
    qs = (np.arange(k) + 0.5) / k
    means = np.quantile(obs, qs)
    variances = np.full(k, max(float(np.var(obs)), EM_VARIANCE_FLOOR))
    weights = np.full(k, 1.0 / k)
    prev_ll = -np.inf
    for _ in range(EM_MAX_ITER):
        # E-step: responsibilities under each component
        diff = obs[:, None] - means[None, :]
        log_pdf = (-0.5 * diff * diff / variances[None, :]
                   - 0.5 * np.log(2.0 * np.pi * variances[None, :])
                   + np.log(weights[None, :]))
        mx = log_pdf.max(axis=1, keepdims=True)
        log_norm = mx[:, 0] + np.log(np.exp(log_pdf - mx).sum(axis=1))
        resp = np.exp(log_pdf - log_norm[:, None])
        ll = float(log_norm.sum())
        if abs(ll - prev_ll) < EM_TOL * (1.0 + abs(prev_ll)):
            break
        prev_ll = ll
        # M-step
        nk = resp.sum(axis=0)
        if np.any(nk < 1e-9):
            return _fit_single(obs)
        weights = nk / n
        means = (resp * obs[:, None]).sum(axis=0) / nk
        diff = obs[:, None] - means[None, :]
        variances = np.maximum((resp * diff * diff).sum(axis=0) / nk,
                               EM_VARIANCE_FLOOR)
    order = np.argsort(means)
    return SlotMixture(weights[order] / weights.sum(),
                       np.maximum(means[order], 0.0),
                       variances[order],
                       obs.copy())


def fit(history, k: int = 2) -> ForecastModel:
    """Fit per-slot mixtures from a DemandSeries of historical counts.

    Slots with fewer than MIN_OBSERVATIONS days, or with constant history,
    fall back to a single Gaussian at the sample mean with variance floored
    at 1.0.
    """
    counts = history.counts
    slots: dict[tuple[int, int], SlotMixture] = {}
    for region in range(history.n_regions):
        for slot in range(history.windows_per_day):
            obs = counts[:, slot, region].astype(float)
            if len(obs) < MIN_OBSERVATIONS or float(np.var(obs)) == 0.0 or k == 1:
                slots[(region, slot)] = _fit_single(obs)
            else:
                slots[(region, slot)] = _fit_em(obs, k)
    return ForecastModel(history.windows_per_day, slots)


def sample_scenarios(model: ForecastModel, regions, t: int, n: int,
                     rng) -> DemandScenarioSet:
    """N integer demand scenarios per region for window-of-day t.

    regions may be a single id or an iterable of ids; draws are mixture
    samples truncated at 0 and rounded half-up, deterministic given the seed.
    """
    if n < 1:
        raise ValueError("scenario count must be >= 1")
    gen = np.random.default_rng(rng)
    if isinstance(regions, int):
        regions = [regions]
    samples: dict[int, np.ndarray] = {}
    for region in sorted(regions):
        mix = model.slot(region, t)
        comp = gen.choice(len(mix.weights), size=n, p=mix.weights)
        draws = gen.normal(mix.means[comp], np.sqrt(mix.variances[comp]))
        samples[region] = np.floor(np.maximum(draws, 0.0) + 0.5).astype(np.int64)
    return DemandScenarioSet(samples, n)


def point_forecast(model: ForecastModel, region: int, t: int) -> int:
    """Rounded (half-up) mixture mean, the deterministic-benchmark demand."""
    return int(np.floor(model.slot(region, t).mean + 0.5))


FORMAT_HEADER = "evdispatch-forecast-model"
FORMAT_VERSION = 1


def save_model(model: ForecastModel, path: str | Path) -> None:
    """Persist a model as a flat text file.

    Line 1: `evdispatch-forecast-model <version> <windows_per_day>`; then one
    line per slot: `slot <region> <t> <weights> <means> <variances> <history>`
    with comma-separated floats (history may be empty `-`).
    """
    lines = [f"{FORMAT_HEADER} {FORMAT_VERSION} {model.windows_per_day}"]
    for (region, slot) in sorted(model.slots):
        mix = model.slots[(region, slot)]
        hist = ",".join(f"{v:.17g}" for v in mix.history) or "-"
        lines.append(" ".join([
            "slot", str(region), str(slot),
            ",".join(f"{v:.17g}" for v in mix.weights),
            ",".join(f"{v:.17g}" for v in mix.means),
            ",".join(f"{v:.17g}" for v in mix.variances),
            hist,
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_floats(field: str) -> np.ndarray:
    return np.array([float(x) for x in field.split(",")])


def load_model(path: str | Path) -> ForecastModel:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"empty model file {path}")
    head = text[0].split()
    if len(head) != 3 or head[0] != FORMAT_HEADER:
        raise ValueError(f"{path} is not a forecast model file")
    if int(head[1]) != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {head[1]}")
    windows_per_day = int(head[2])
    slots: dict[tuple[int, int], SlotMixture] = {}
    for line in text[1:]:
        if not line.strip():
            continue
        tag, region, slot, w, m, v, hist = line.split()
        if tag != "slot":
            raise ValueError(f"unexpected record {tag!r} in {path}")
        history = (np.array([], dtype=float) if hist == "-"
                   else _parse_floats(hist))
        slots[(int(region), int(slot))] = SlotMixture(
            _parse_floats(w), _parse_floats(m), _parse_floats(v), history)
    return ForecastModel(windows_per_day, slots)
