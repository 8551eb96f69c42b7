"""Synthetic spectral-temporal signature generator.

Each signature is an intensity curve on a shared log-time grid whose shape
responds to three device characteristics:

* y1 (binary): adds a fourth peak, shifts the first peak earlier, and
  boosts intensity at early times;
* y2 (binary): scales intensity over the whole curve;
* y3 (continuous in [0, 1]): scales intensity and shifts the timing of
  every peak.

A curve is ``gain * (baseline + early boost + sum of Gaussian peaks)`` plus
iid Gaussian observation noise, floored at a small positive constant.
Generation is deterministic: signature ``i`` draws from a stream keyed by
``(seed, i)``, so any subset of a dataset reproduces independently of how
many signatures are generated or in what order.
"""

from dataclasses import dataclass, field, fields, replace
from typing import Iterator

import numpy as np

from . import kernels
from .errors import NonFiniteError
from .seeding import stage_seed, substream

INTENSITY_FLOOR = 1e-6
BOOST_DECAY_RATE = 3.0
N_BASE_PEAKS = 4


@dataclass(frozen=True)
class TimeGrid:
    """Uniform, strictly increasing grid of log-time values."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least 2 points")
        diffs = np.diff(pts)
        if np.any(diffs <= 0):
            raise ValueError("grid points must be strictly increasing")
        dt = (pts[-1] - pts[0]) / (pts.size - 1)
        if np.max(np.abs(diffs - dt)) >= 1e-12 * max(abs(dt), 1.0):
            raise ValueError("grid points must be uniformly spaced")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.size

    @property
    def dt(self) -> float:
        return float((self.points[-1] - self.points[0]) / (self.points.size - 1))

    @property
    def start(self) -> float:
        return float(self.points[0])

    @property
    def stop(self) -> float:
        return float(self.points[-1])


def default_grid(count: int = 1000, start: float = -4.0, stop: float = 0.0) -> TimeGrid:
    """Canonical log-time grid: `count` uniform points on [start, stop]."""
    return TimeGrid(np.linspace(start, stop, count))


@dataclass(frozen=True)
class Labels:
    y1: int
    y2: int
    y3: float

    def __post_init__(self):
        if self.y1 not in (0, 1) or self.y2 not in (0, 1):
            raise ValueError("y1 and y2 must be 0 or 1")
        if not 0.0 <= self.y3 <= 1.0:
            raise ValueError(f"y3 must lie in [0, 1], got {self.y3}")


@dataclass(frozen=True)
class Signature:
    values: np.ndarray
    labels: Labels


@dataclass(frozen=True)
class SimParams:
    """Generator parameters. Defaults produce the documented qualitative
    label effects; zero the jitter and noise fields for exact-shape tests."""

    peak_centers: tuple[float, ...] = (-3.7, -2.4, -1.3, -0.35)
    peak_widths: tuple[float, ...] = (0.16, 0.22, 0.30, 0.18)
    peak_amplitudes: tuple[float, ...] = (3.0, 2.0, 1.6, 0.6)
    baseline_intensity: float = 3.0
    baseline_decay: float = 1.1
    y1_boost_gain: float = 3.0
    y1_first_peak_shift: float = -0.08
    y2_gain: float = 0.7
    y3_gain: float = 0.75
    y3_timing_span: float = 0.19
    amp_jitter_sd: float = 0.10
    center_jitter_sd: float = 0.01
    width_jitter_sd: float = 0.04
    noise_sd: float = 0.02

    def __post_init__(self):
        for name in ("peak_centers", "peak_widths", "peak_amplitudes"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != N_BASE_PEAKS:
                raise ValueError(f"{name} must have {N_BASE_PEAKS} entries")
            object.__setattr__(self, name, vals)
        if any(w <= 0 for w in self.peak_widths):
            raise ValueError("peak widths must be positive")
        if any(a <= 0 for a in self.peak_amplitudes):
            raise ValueError("peak amplitudes must be positive")
        for name in ("amp_jitter_sd", "center_jitter_sd", "width_jitter_sd", "noise_sd"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def noiseless(self) -> "SimParams":
        """Copy with all jitter and observation-noise sds set to zero."""
        return replace(self, amp_jitter_sd=0.0, center_jitter_sd=0.0,
                       width_jitter_sd=0.0, noise_sd=0.0)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "SimParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown SimParams fields: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass(frozen=True)
class LabelSet:
    """Column arrays of labels; indexing yields a Labels record."""

    y1: np.ndarray
    y2: np.ndarray
    y3: np.ndarray

    def __len__(self) -> int:
        return self.y1.size

    def __getitem__(self, i: int) -> Labels:
        return Labels(int(self.y1[i]), int(self.y2[i]), float(self.y3[i]))

    def __iter__(self) -> Iterator[Labels]:
        return (self[i] for i in range(len(self)))


@dataclass
class Dataset:
    grid: TimeGrid
    values: np.ndarray
    labels: LabelSet
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.count:
            raise ValueError("values must be (n, grid.count)")
        if self.values.shape[0] != len(self.labels):
            raise ValueError("values and labels disagree on n")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def signature(self, i: int) -> Signature:
        return Signature(self.values[i], self.labels[i])

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.grid, self.values[idx],
                       LabelSet(self.labels.y1[idx], self.labels.y2[idx],
                                self.labels.y3[idx]),
                       dict(self.provenance, subset=True))


def sample_labels(n: int, seed: int) -> LabelSet:
    """Draw n label triples: y1, y2 ~ Bernoulli(1/2), y3 ~ Uniform(0, 1).

    Draws are laid out one row of three uniforms per signature, so label i
    is the same regardless of n (subset reproducibility).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    u = np.random.default_rng(np.random.SeedSequence(seed)).random((n, 3))
    return LabelSet(y1=(u[:, 0] < 0.5).astype(np.int64),
                    y2=(u[:, 1] < 0.5).astype(np.int64),
                    y3=u[:, 2].copy())


def _jitter_draws(params: SimParams, rng: np.random.Generator):
    """Fixed-order per-signature draws: 4 amp, 4 center, 4 width normals."""
    z = rng.standard_normal(3 * N_BASE_PEAKS)
    amp_factor = np.exp(params.amp_jitter_sd * z[0:4])
    center_shift = params.center_jitter_sd * z[4:8]
    width_factor = np.exp(params.width_jitter_sd * z[8:12])
    return amp_factor, center_shift, width_factor


def _signature_rows(labels: Labels, params: SimParams, rng: np.random.Generator):
    amp_factor, center_shift, width_factor = _jitter_draws(params, rng)
    amps = np.asarray(params.peak_amplitudes) * amp_factor
    centers = (np.asarray(params.peak_centers) + center_shift
               + params.y3_timing_span * (labels.y3 - 0.5))
    if labels.y1 == 1:
        centers[0] += params.y1_first_peak_shift
    widths = np.asarray(params.peak_widths) * width_factor
    n_peaks = N_BASE_PEAKS if labels.y1 == 1 else N_BASE_PEAKS - 1
    gain = (1.0 + params.y2_gain * labels.y2) * (1.0 + params.y3_gain * labels.y3)
    boost = params.y1_boost_gain if labels.y1 == 1 else 0.0
    return amps, centers, widths, n_peaks, gain, boost


def _finalize(raw: np.ndarray, noise: np.ndarray, noise_sd: float) -> np.ndarray:
    values = raw + noise_sd * noise
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("signature generation produced non-finite values")
    return np.maximum(values, INTENSITY_FLOOR)


def generate_signature(labels: Labels, params: SimParams, grid: TimeGrid,
                       rng: np.random.Generator) -> Signature:
    """Generate one signature, drawing jitters then noise from `rng`."""
    amps, centers, widths, n_peaks, gain, boost = _signature_rows(labels, params, rng)
    raw = kernels.curve_batch(
        grid.points, centers[None, :], widths[None, :], amps[None, :],
        np.array([n_peaks], dtype=np.int64), np.array([gain]), np.array([boost]),
        BOOST_DECAY_RATE, params.baseline_intensity, params.baseline_decay,
        grid.start)
    noise = rng.standard_normal(grid.count)
    return Signature(_finalize(raw[0], noise, params.noise_sd), labels)


def generate_dataset(n: int, params: SimParams, seed: int,
                     grid: TimeGrid | None = None) -> Dataset:
    """Generate n signatures with labels; fully determined by (n, params, seed, grid)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if grid is None:
        grid = default_grid()
    label_seed = stage_seed(seed, "labels")
    signature_seed = stage_seed(seed, "signatures")
    labels = sample_labels(n, label_seed)

    amps = np.empty((n, N_BASE_PEAKS))
    centers = np.empty((n, N_BASE_PEAKS))
    widths = np.empty((n, N_BASE_PEAKS))
    n_peaks = np.empty(n, dtype=np.int64)
    gains = np.empty(n)
    boosts = np.empty(n)
    noise = np.empty((n, grid.count))
    for i in range(n):
        rng_i = substream(signature_seed, i)
        amps[i], centers[i], widths[i], n_peaks[i], gains[i], boosts[i] = \
            _signature_rows(labels[i], params, rng_i)
        noise[i] = rng_i.standard_normal(grid.count)

    raw = kernels.curve_batch(grid.points, centers, widths, amps, n_peaks,
                              gains, boosts, BOOST_DECAY_RATE,
                              params.baseline_intensity, params.baseline_decay,
                              grid.start)
    values = _finalize(raw, noise, params.noise_sd)
    provenance = {"seed": int(seed), "n": int(n), "params": params.to_dict()}
    return Dataset(grid, values, labels, provenance)


@dataclass(frozen=True)
class GroupCurves:
    name: str
    mean: np.ndarray
    sd: np.ndarray
    size: int


GROUPINGS = ("by-y1", "by-y2", "by-y3-quartile")


def class_conditional_means(dataset: Dataset, grouping: str) -> list[GroupCurves]:
    """Point-wise mean and sd curves per label group.

    `grouping` is one of "by-y1", "by-y2", or "by-y3-quartile"; quartile
    bins use the empirical quartiles of y3 within the dataset. The sd is
    the population (ddof=0) point-wise standard deviation.
    """
    if grouping == "by-y1":
        masks = [(f"y1={v}", dataset.labels.y1 == v) for v in (0, 1)]
    elif grouping == "by-y2":
        masks = [(f"y2={v}", dataset.labels.y2 == v) for v in (0, 1)]
    elif grouping == "by-y3-quartile":
        y3 = dataset.labels.y3
        edges = np.quantile(y3, [0.25, 0.5, 0.75])
        bins = np.searchsorted(edges, y3, side="left")
        masks = [(f"y3 Q{q + 1}", bins == q) for q in range(4)]
    else:
        raise ValueError(f"unknown grouping {grouping!r}; expected one of {GROUPINGS}")

    groups = []
    for name, mask in masks:
        if not np.any(mask):
            raise ValueError(f"group {name!r} is empty")
        block = dataset.values[mask]
        groups.append(GroupCurves(name, block.mean(axis=0), block.std(axis=0),
                                  int(mask.sum())))
    return groups
