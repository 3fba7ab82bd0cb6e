"""Spatial focusing maps of the useful signal and third-order distortion over a cell.

Binary map format (``.bspt``, little-endian)::

    offset  type        field
    0       4 bytes     magic b"BSPT"
    4       uint32      format version (1)
    8       uint32      ny (rows, along y)
    12      uint32      nx (columns, along x)
    16      uint32      number of layers
    20      float64     x of column 0 centre (m)
    28      float64     y of row 0 centre (m)
    36      float64     grid step (m)
    44      ...         layers, each ny * nx float64 in row-major order

Layers are written in the order signal, distortion. Masked cells hold NaN.
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .engine import Scenario, psd_at_frequency, psd_band_power
from .errors import BeamspotError, GridError

MAGIC = b"BSPT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIddd")
LAYERS = ("signal", "distortion")

# floor applied before taking dB, relative to the layer maximum
DB_FLOOR = 1e-15


@dataclass(frozen=True)
class CellSpec:
    """Rectangular evaluation region sampled at cell centres."""

    width: float = 100.0
    height: float = 100.0
    step: float | None = None
    origin: tuple[float, float] = (0.0, 0.0)
    omega: float = 0.0
    band_average: bool = False

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("cell extent must be positive")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")

    def resolved_step(self, wavelength: float) -> float:
        return self.step if self.step is not None else wavelength / 2

    def axes(self, wavelength: float) -> tuple[np.ndarray, np.ndarray]:
        step = self.resolved_step(wavelength)
        nx = max(1, int(round(self.width / step)))
        ny = max(1, int(round(self.height / step)))
        x = self.origin[0] + (np.arange(nx) + 0.5) * step
        y = self.origin[1] + (np.arange(ny) + 0.5) * step
        return x, y


@dataclass
class FocusingMap:
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    signal: np.ndarray = field(repr=False)
    distortion: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict)

    @property
    def step(self) -> float:
        if self.x.size > 1:
            return float(self.x[1] - self.x[0])
        return float(self.metadata.get("step_m", 0.0))

    @property
    def shape(self) -> tuple[int, int]:
        return self.signal.shape

    def layer(self, name: str) -> np.ndarray:
        if name not in LAYERS:
            raise KeyError(f"unknown layer {name!r}; expected one of {LAYERS}")
        return getattr(self, name)


def scenario_hash(scenario: Scenario, cell: CellSpec | None = None) -> str:
    """Stable digest of everything that determines a map."""
    payload = repr((scenario, cell)).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def mask_radius(scenario: Scenario) -> float:
    return max(scenario.carrier.ref_distance, 2 * scenario.carrier.wavelength)


def exclusion_mask(scenario: Scenario, x: np.ndarray, y: np.ndarray, radius: float | None = None) -> np.ndarray:
    """True where a grid point lies within ``radius`` of an array reference point."""
    radius = mask_radius(scenario) if radius is None else radius
    xx, yy = np.meshgrid(x, y)
    mask = np.zeros(xx.shape, dtype=bool)
    for arr in scenario.arrays:
        mask |= np.hypot(xx - arr.position[0], yy - arr.position[1]) <= radius
    return mask


def sweep(
    scenario: Scenario,
    cell: CellSpec = CellSpec(),
    threads: int = 1,
    chunk: int = 16384,
    mask_radius_m: float | None = None,
) -> FocusingMap:
    """Signal and distortion focusing over the cell.

    Each layer is divided by its mean over unmasked points, so a perfectly
    uniform radiator gives 1 everywhere. A layer that is identically zero (linear
    PA) is returned as zeros.
    """
    wavelength = scenario.carrier.wavelength
    x, y = cell.axes(wavelength)
    radius = mask_radius(scenario) if mask_radius_m is None else mask_radius_m
    mask = exclusion_mask(scenario, x, y, radius)
    xx, yy = np.meshgrid(x, y)
    pts = np.stack([xx[~mask], yy[~mask]], axis=-1)
    if pts.shape[0] == 0:
        raise GridError("every grid point is masked")

    sig = np.empty(pts.shape[0])
    dis = np.empty(pts.shape[0])
    # force shared cached state before workers start
    scenario.weights, scenario.correlation, scenario.output_coeffs

    def work(start: int):
        stop = min(start + chunk, pts.shape[0])
        links = scenario.observer_link_arrays(pts[start:stop])
        if cell.band_average:
            s, d = psd_band_power(scenario, links)
        else:
            s, d = psd_at_frequency(scenario, links, cell.omega)
        sig[start:stop] = s
        dis[start:stop] = d

    starts = range(0, pts.shape[0], chunk)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)

    layers = []
    for values in (sig, dis):
        mean = values.mean()
        full = np.full(mask.shape, np.nan)
        full[~mask] = values / mean if mean > 0 else 0.0
        layers.append(full)
    meta = {
        "scenario_hash": scenario_hash(scenario, cell),
        "omega_rad_s": cell.omega,
        "band_average": cell.band_average,
        "mask_radius_m": radius,
        "step_m": cell.resolved_step(wavelength),
        "num_arrays": scenario.num_arrays,
        "num_users": scenario.num_users,
        "mean_signal_psd": float(sig.mean()),
        "mean_distortion_psd": float(dis.mean()),
    }
    return FocusingMap(x, y, layers[0], layers[1], mask, meta)


def uniformity_metric(layer: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Standard deviation (dB) of ``10 log10(layer)`` over unmasked, finite cells.

    Values are floored at ``DB_FLOOR`` times the layer maximum so exact nulls stay finite.
    """
    values = np.asarray(layer, dtype=float)
    keep = np.isfinite(values)
    if mask is not None:
        keep &= ~np.asarray(mask, dtype=bool)
    values = values[keep]
    if values.size == 0:
        raise BeamspotError("no unmasked cells to evaluate")
    peak = values.max()
    if peak <= 0:
        return 0.0
    db = 10 * np.log10(np.maximum(values, DB_FLOOR * peak))
    return float(db.std())


@dataclass(frozen=True)
class Peak:
    position: tuple[float, float]
    value: float
    nearest_user_distance: float


def peak_report(
    fmap: FocusingMap,
    user_positions,
    layer: str = "distortion",
    threshold: float = 1.0,
    neighborhood: int = 3,
    array_positions=(),
    exclusion_radius: float = 0.0,
) -> list[Peak]:
    """Local maxima of a layer above ``threshold``, strongest first.

    Points within ``exclusion_radius`` of any of ``array_positions`` are ignored,
    which keeps the near-array path-loss peak from hiding the beamspots.
    """
    values = np.nan_to_num(fmap.layer(layer), nan=-np.inf)
    xx, yy = np.meshgrid(fmap.x, fmap.y)
    for ax, ay in array_positions:
        values = np.where(np.hypot(xx - ax, yy - ay) <= exclusion_radius, -np.inf, values)
    local = ndimage.maximum_filter(values, size=neighborhood, mode="nearest")
    hits = np.argwhere((values == local) & (values >= threshold) & np.isfinite(values))
    users = np.asarray(user_positions, dtype=float).reshape(-1, 2)
    peaks = []
    for iy, ix in hits:
        pos = (float(fmap.x[ix]), float(fmap.y[iy]))
        dist = float(np.min(np.hypot(users[:, 0] - pos[0], users[:, 1] - pos[1]))) if users.size else np.inf
        peaks.append(Peak(pos, float(values[iy, ix]), dist))
    peaks.sort(key=lambda p: -p.value)
    return peaks


def transect_autocorrelation(layer_row: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalised autocovariance of a 1-D transect of a layer (lags ``0..max_lag``, in grid steps)."""
    v = np.asarray(layer_row, dtype=float)
    v = v[np.isfinite(v)]
    v = v - v.mean()
    denom = np.dot(v, v)
    return np.array([np.dot(v[: v.size - k], v[k:]) / denom for k in range(max_lag + 1)])


def speckle_autocorrelation(
    fmap: FocusingMap,
    layer: str = "distortion",
    region: tuple[float, float, float, float] | None = None,
    detrend_length: float = 3.0,
    max_lag: int = 16,
) -> np.ndarray:
    """Row-averaged autocovariance of the small-scale fluctuation of a layer along x.

    Each row of ``10 log10(layer)`` inside ``region`` (``x0, x1, y0, y1`` in metres,
    default the whole map) has its moving average over ``detrend_length`` metres
    removed, which strips path loss and beam envelopes and leaves the fading
    component. Rows containing masked cells are skipped.
    """
    values = fmap.layer(layer)
    x0, x1, y0, y1 = region if region is not None else (-np.inf, np.inf, -np.inf, np.inf)
    sx = (fmap.x >= x0) & (fmap.x <= x1)
    sy = (fmap.y >= y0) & (fmap.y <= y1)
    sub = values[np.ix_(sy, sx)]
    sub = sub[np.all(np.isfinite(sub) & (sub > 0), axis=1)]
    if sub.shape[0] == 0 or sub.shape[1] <= max_lag:
        raise BeamspotError("transect region too small or fully masked")
    width = max(1, int(round(detrend_length / fmap.step)))
    db = 10 * np.log10(sub)
    db = db - ndimage.uniform_filter1d(db, width, axis=1, mode="nearest")
    db = db - db.mean(axis=1, keepdims=True)
    acov = np.array([np.sum(db[:, : db.shape[1] - k] * db[:, k:]) for k in range(max_lag + 1)])
    return acov / acov[0]


def decorrelation_lag(acov: np.ndarray, level: float = np.exp(-1)) -> int:
    """First lag (grid steps) at which ``acov`` falls to ``level`` or below, -1 if never."""
    below = np.nonzero(np.asarray(acov) <= level)[0]
    return int(below[0]) if below.size else -1


# --- file output ---------------------------------------------------------------------------


def write_bspt(fmap: FocusingMap, path) -> None:
    ny, nx = fmap.shape
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, ny, nx, len(LAYERS), float(fmap.x[0]), float(fmap.y[0]), fmap.step
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for name in LAYERS:
            fh.write(np.ascontiguousarray(fmap.layer(name), dtype="<f8").tobytes())


def read_bspt(path) -> FocusingMap:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise BeamspotError(f"{path}: truncated header")
    magic, version, ny, nx, nlayers, x0, y0, step = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BeamspotError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise BeamspotError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + nlayers * ny * nx * 8
    if len(raw) != expected:
        raise BeamspotError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(nlayers, ny, nx)
    x = x0 + step * np.arange(nx)
    y = y0 + step * np.arange(ny)
    signal, distortion = data[0].copy(), data[1].copy()
    return FocusingMap(x, y, signal, distortion, np.isnan(signal), {"step_m": step})


def write_csv(fmap: FocusingMap, path) -> None:
    """One row per unmasked grid point: ``x_m, y_m, signal, distortion``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_m", "y_m", "signal_focusing", "distortion_focusing"])
        for iy, yv in enumerate(fmap.y):
            for ix, xv in enumerate(fmap.x):
                if fmap.mask[iy, ix]:
                    continue
                writer.writerow([f"{xv:.6f}", f"{yv:.6f}", repr(float(fmap.signal[iy, ix])), repr(float(fmap.distortion[iy, ix]))])


def write_sidecar(fmap: FocusingMap, path, extra: dict | None = None) -> None:
    meta = dict(fmap.metadata)
    meta.update(
        {
            "format": "BSPT",
            "format_version": FORMAT_VERSION,
            "layers": list(LAYERS),
            "shape": list(fmap.shape),
            "uniformity_db": {name: uniformity_metric(fmap.layer(name), fmap.mask) for name in LAYERS},
        }
    )
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
