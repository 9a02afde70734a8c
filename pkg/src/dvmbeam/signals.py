"""Uniform linear array signal simulator and dataset handling.

A plane wave from direction theta reaches element k of a uniform linear
array (k - 1) * spacing * sin(theta) / c seconds after element 0, so the
noiseless baseband snapshot is u_k(t) = exp(-2 pi j f (t - delay_k)).
Training pairs map the real-split noisy snapshot to the real-split scaled
delay-Vandermonde transform of that same snapshot, with the transform's
generator alpha = exp(-2 pi j f tau) tied to the sampling interval
tau = 1 / (sample_rate * n).  The regression target is therefore an exact
linear function of the input, noise included.

Noise draws use a per-sample child generator seeded by (seed, sample index),
so any single sample can be regenerated without replaying the whole stream.
"""

from __future__ import annotations

from dataclasses import dataclass
import csv
import io
import math
import struct

import numpy as np

from .dvm import DvmSpec, build_bluestein_chain, cis, fast_dvm_apply

SPEED_OF_LIGHT = 299792458.0
DEFAULT_SAMPLE_RATE = 32e9


@dataclass(frozen=True)
class ArrayGeometry:
    """Element count and uniform spacing (meters) of the receive array."""

    n_elements: int
    spacing: float

    def __post_init__(self):
        if self.n_elements < 2:
            raise ValueError("array needs at least 2 elements")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise ValueError("spacing must be a positive finite length")


def half_wavelength_spacing(design_freq: float = DEFAULT_SAMPLE_RATE) -> float:
    """Spacing c / (2 f) that avoids grating lobes at the design frequency."""
    return SPEED_OF_LIGHT / (2.0 * design_freq)


def steering_delay(geom: ArrayGeometry, theta: float) -> np.ndarray:
    """Arrival delay of each element relative to element 0, in seconds."""
    k = np.arange(geom.n_elements, dtype=np.float64)
    return k * geom.spacing * math.sin(theta) / SPEED_OF_LIGHT


def synth_received(
    geom: ArrayGeometry,
    freq: float,
    theta: float,
    t,
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Noisy baseband snapshots, shape (n_elements, len(t)).

    noise_std is the total complex noise standard deviation; each real
    component gets noise_std / sqrt(2).
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    delays = steering_delay(geom, theta)
    phase_arg = freq * (t[None, :] - delays[:, None])
    u = np.exp(-2j * np.pi * phase_arg)
    if noise_std:
        if rng is None:
            raise ValueError("noise_std > 0 requires an rng")
        s = noise_std / math.sqrt(2.0)
        u = u + s * (
            rng.standard_normal(u.shape) + 1j * rng.standard_normal(u.shape)
        )
    return u


def transform_alpha(freq: float, n: int, sample_rate: float = DEFAULT_SAMPLE_RATE) -> complex:
    """Generator exp(-2 pi j f tau) with tau = 1 / (sample_rate * n)."""
    return complex(cis(-2.0 * np.pi * freq / (sample_rate * n), 1.0))


@dataclass
class Dataset:
    """Row-major sample arrays plus the metadata that generated them."""

    x: np.ndarray        # (samples, 2n) real-split snapshots
    y: np.ndarray        # (samples, 2n) real-split transform outputs
    angle: np.ndarray    # (samples,) radians
    time: np.ndarray     # (samples,) seconds
    n: int
    freq: float
    sample_rate: float
    spacing: float
    noise_std: float
    seed: int

    @property
    def alpha(self) -> complex:
        return transform_alpha(self.freq, self.n, self.sample_rate)

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]


def make_dataset(
    n: int,
    freq: float,
    angles_deg,
    samples_per_angle: int,
    noise_std: float,
    seed: int,
    spacing: float | None = None,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
) -> Dataset:
    """Simulate snapshots over an angle grid and attach transform targets.

    Each angle contributes samples_per_angle snapshots on the time grid
    [0, 1) with step 1/samples_per_angle.  Sample s (counted across the
    whole set) draws its noise from default_rng([seed, s]).
    """
    if samples_per_angle < 1:
        raise ValueError("samples_per_angle must be >= 1")
    angles_deg = np.atleast_1d(np.asarray(angles_deg, dtype=np.float64))
    geom = ArrayGeometry(n, half_wavelength_spacing() if spacing is None else spacing)
    spec = DvmSpec(n, transform_alpha(freq, n, sample_rate))
    chain = build_bluestein_chain(spec)
    t_grid = np.arange(samples_per_angle, dtype=np.float64) / samples_per_angle
    total = angles_deg.size * samples_per_angle
    x = np.empty((total, 2 * n))
    y = np.empty((total, 2 * n))
    angle_col = np.empty(total)
    time_col = np.empty(total)
    row = 0
    for a_deg in angles_deg:
        theta = math.radians(a_deg)
        clean = synth_received(geom, freq, theta, t_grid)
        for j in range(samples_per_angle):
            u = clean[:, j]
            if noise_std:
                child = np.random.default_rng([seed, row])
                s = noise_std / math.sqrt(2.0)
                u = u + s * (
                    child.standard_normal(n) + 1j * child.standard_normal(n)
                )
            v = fast_dvm_apply(chain, u)
            x[row, :n] = u.real
            x[row, n:] = u.imag
            y[row, :n] = v.real
            y[row, n:] = v.imag
            angle_col[row] = theta
            time_col[row] = t_grid[j]
            row += 1
    return Dataset(
        x=x, y=y, angle=angle_col, time=time_col, n=n, freq=freq,
        sample_rate=sample_rate, spacing=geom.spacing,
        noise_std=noise_std, seed=seed,
    )


def split_dataset(ds: Dataset, train_fraction: float = 0.8, seed: int = 0):
    """Stratified split: every distinct angle keeps train_fraction of its
    samples in the training part.  Returns (train, val) datasets."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for theta in np.unique(ds.angle):
        rows = np.flatnonzero(ds.angle == theta)
        perm = rows[rng.permutation(rows.size)]
        k = int(round(train_fraction * rows.size))
        k = min(max(k, 1), rows.size - 1) if rows.size > 1 else rows.size
        train_idx.append(perm[:k])
        val_idx.append(perm[k:])
    train_idx = np.concatenate(train_idx)
    val_idx = np.concatenate(val_idx) if val_idx else np.zeros(0, dtype=int)

    def take(idx):
        return Dataset(
            x=ds.x[idx].copy(), y=ds.y[idx].copy(),
            angle=ds.angle[idx].copy(), time=ds.time[idx].copy(),
            n=ds.n, freq=ds.freq, sample_rate=ds.sample_rate,
            spacing=ds.spacing, noise_std=ds.noise_std, seed=ds.seed,
        )

    return take(train_idx), take(val_idx)


# ---------------------------------------------------------------------------
# persistence

_MAGIC = b"DVMB"
_VERSION = 1
_HEAD_FMT = "<4sIIQdddddq"


def save_dataset(ds: Dataset, path: str, format: str = "binary") -> None:
    """Binary layout: magic, version, n, sample count, freq, sample_rate,
    spacing, noise_std, reserved, seed, then angle/time/x/y arrays as
    little-endian float64.  format="csv" writes the tabular twin instead."""
    if format == "csv":
        save_dataset_csv(ds, path)
        return
    if format != "binary":
        raise ValueError(f"unknown dataset format {format!r}")
    head = struct.pack(
        _HEAD_FMT, _MAGIC, _VERSION, ds.n, ds.n_samples, ds.freq,
        ds.sample_rate, ds.spacing, ds.noise_std, 0.0, ds.seed,
    )
    with open(path, "wb") as fh:
        fh.write(head)
        for arr in (ds.angle, ds.time, ds.x, ds.y):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_dataset(path: str, verify: bool = True, format: str = "binary",
                 **csv_meta) -> Dataset:
    """Read a saved dataset; unless disabled, recompute every target from
    its input and fail loudly on drift beyond 1e-9.  format="csv" reads the
    tabular twin (pass freq=... to enable verification there)."""
    if format == "csv":
        return load_dataset_csv(path, verify=verify, **csv_meta)
    if format != "binary":
        raise ValueError(f"unknown dataset format {format!r}")
    with open(path, "rb") as fh:
        data = fh.read()
    head_size = struct.calcsize(_HEAD_FMT)
    if len(data) < head_size:
        raise ValueError(f"{path}: truncated dataset file")
    magic, version, n, count, freq, rate, spacing, noise_std, _res, seed = (
        struct.unpack(_HEAD_FMT, data[:head_size])
    )
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, not a dataset file")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported dataset version {version}")
    need = head_size + 8 * (count * 2 + count * 4 * n)
    if len(data) != need:
        raise ValueError(f"{path}: expected {need} bytes, found {len(data)}")
    body = np.frombuffer(data, dtype="<f8", offset=head_size)
    pos = 0

    def take(k, shape):
        nonlocal pos
        out = np.array(body[pos : pos + k], dtype=np.float64).reshape(shape)
        pos += k
        return out

    angle = take(count, (count,))
    time = take(count, (count,))
    x = take(count * 2 * n, (count, 2 * n))
    y = take(count * 2 * n, (count, 2 * n))
    ds = Dataset(
        x=x, y=y, angle=angle, time=time, n=n, freq=freq, sample_rate=rate,
        spacing=spacing, noise_std=noise_std, seed=seed,
    )
    if verify:
        err = verify_targets(ds)
        if err > 1e-9:
            raise ValueError(
                f"{path}: stored targets deviate from recomputed transform "
                f"by {err:.3e} (limit 1e-9); file is stale or corrupt"
            )
    return ds


def verify_targets(ds: Dataset) -> float:
    """Max absolute difference between stored targets and the transform of
    the stored inputs."""
    spec = DvmSpec(ds.n, ds.alpha)
    chain = build_bluestein_chain(spec)
    u = (ds.x[:, : ds.n] + 1j * ds.x[:, ds.n :]).T
    v = fast_dvm_apply(chain, u)
    expect = np.concatenate([v.real, v.imag]).T
    return float(np.max(np.abs(expect - ds.y))) if ds.n_samples else 0.0


def save_dataset_csv(ds: Dataset, path: str) -> None:
    """Tabular twin of the binary format: one header row, one row per sample,
    17 significant digits per value (lossless for float64)."""
    n = ds.n
    header = (
        ["sample_id", "t", "angle_deg"]
        + [f"x_re_{i}" for i in range(n)]
        + [f"x_im_{i}" for i in range(n)]
        + [f"y_re_{i}" for i in range(n)]
        + [f"y_im_{i}" for i in range(n)]
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(ds.n_samples):
            row = [str(i), f"{ds.time[i]:.17g}", f"{math.degrees(ds.angle[i]):.17g}"]
            row += [f"{v:.17g}" for v in ds.x[i]]
            row += [f"{v:.17g}" for v in ds.y[i]]
            w.writerow(row)


def load_dataset_csv(path: str, freq: float | None = None,
                     sample_rate: float = DEFAULT_SAMPLE_RATE,
                     spacing: float | None = None, noise_std: float = 0.0,
                     seed: int = 0, verify: bool = True) -> Dataset:
    """Read the tabular format back.  The table carries no generator
    metadata, so freq (and friends) must be supplied to re-verify targets;
    without freq the data loads unverified."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "sample_id":
        raise ValueError(f"{path}: not a dataset table (missing header)")
    width = len(rows[0])
    if (width - 3) % 4:
        raise ValueError(f"{path}: header has {width} columns, want 3 + 4n")
    n = (width - 3) // 4
    count = len(rows) - 1
    x = np.empty((count, 2 * n))
    y = np.empty((count, 2 * n))
    angle = np.empty(count)
    time = np.empty(count)
    for i, row in enumerate(rows[1:]):
        if len(row) != width:
            raise ValueError(f"{path}: row {i} has {len(row)} fields, want {width}")
        vals = np.asarray(row[1:], dtype=np.float64)
        time[i] = vals[0]
        angle[i] = math.radians(vals[1])
        x[i] = vals[2 : 2 + 2 * n]
        y[i] = vals[2 + 2 * n :]
    ds = Dataset(
        x=x, y=y, angle=angle, time=time, n=n,
        freq=(math.nan if freq is None else freq), sample_rate=sample_rate,
        spacing=(half_wavelength_spacing() if spacing is None else spacing),
        noise_std=noise_std, seed=seed,
    )
    if verify and freq is not None:
        err = verify_targets(ds)
        if err > 1e-9:
            raise ValueError(
                f"{path}: stored targets deviate from recomputed transform "
                f"by {err:.3e} (limit 1e-9); file is stale or corrupt"
            )
    return ds
