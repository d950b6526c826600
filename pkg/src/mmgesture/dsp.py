"""Range-Doppler processing, CA-CFAR detection and angle estimation.

The chain turns one ADC cube into a list of reflection points carrying
(x, y, z, radial velocity, intensity).  Hann windows are applied on both
axes; with the periodic window an exactly static reflector lands entirely
in the three Doppler bins around zero, which the zero-Doppler exclusion
then removes, leaving only dynamic returns for detection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d
from scipy.signal import get_window

from .errors import InvalidArgumentError, NoSignalError
from .frontend import (MAX_OPERATING_RANGE_M, AdcCube, VirtualArray,
                       virtual_array_for)

AOA_FFT_SIZE = 512


@dataclass(frozen=True)
class CfarConfig:
    """Cell-averaging CFAR window: per-side cell counts along each axis."""

    guard_cells: int = 2
    training_cells: int = 8
    pfa: float = 1e-4

    def __post_init__(self):
        if self.guard_cells < 0:
            raise InvalidArgumentError("guard_cells must be >= 0")
        if self.training_cells < 1:
            raise InvalidArgumentError("training_cells must be >= 1")
        if not 0.0 < self.pfa < 1.0:
            raise InvalidArgumentError("pfa must lie in (0, 1)")

    @property
    def window_extent(self) -> int:
        return 2 * (self.guard_cells + self.training_cells) + 1


@dataclass(frozen=True)
class DetectedPoint:
    """One reflection point: position (m), radial velocity (m/s), intensity.

    range_bin/doppler_bin record the source cell when the point came out of
    the detector; they order intensity ties in the retention rule.
    """

    x: float
    y: float
    z: float
    v: float
    intensity: float
    range_bin: int | None = None
    doppler_bin: int | None = None

    def __post_init__(self):
        if not self.intensity > 0:
            raise InvalidArgumentError("point intensity must be positive")

    def features(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.v, self.intensity])


@dataclass(frozen=True)
class RangeDopplerMap:
    """Per-antenna complex spectra plus power maps, [range bin][doppler bin].

    ``power`` is |spectrum|^2 per antenna; ``summed`` is the noncoherent
    mean over antennas.  Doppler axis is fftshifted: bin ``n_doppler // 2``
    is zero velocity, higher bins recede.
    """

    spectra: np.ndarray
    power: np.ndarray
    summed: np.ndarray
    range_resolution: float
    velocity_resolution: float

    @property
    def n_range(self) -> int:
        return self.summed.shape[0]

    @property
    def n_doppler(self) -> int:
        return self.summed.shape[1]

    @property
    def zero_doppler_bin(self) -> int:
        return self.n_doppler // 2

    def velocity_of_bin(self, doppler_bin) -> float:
        return (np.asarray(doppler_bin) - self.zero_doppler_bin) * self.velocity_resolution

    def range_of_bin(self, range_bin) -> float:
        return np.asarray(range_bin) * self.range_resolution


def range_doppler(cube: AdcCube, max_range_m: float = MAX_OPERATING_RANGE_M) -> RangeDopplerMap:
    """Windowed fast-time then slow-time DFT, cropped to the operating range."""
    config = cube.config
    n_ant, n_chirps, n_samples = (config.n_virtual, config.chirps_per_frame,
                                  config.samples_per_chirp)
    if cube.data.shape != (n_ant, n_chirps, n_samples):
        raise InvalidArgumentError("cube dimensions do not match its config")

    w_fast = get_window("hann", n_samples, fftbins=True)
    spectra = np.fft.fft(cube.data * w_fast, axis=2)
    n_keep = min(int(np.floor(max_range_m / config.range_resolution)) + 1, n_samples)
    spectra = spectra[:, :, :n_keep]

    w_slow = get_window("hann", n_chirps, fftbins=True)
    spectra = np.transpose(spectra, (0, 2, 1)) * w_slow
    spectra = np.fft.fftshift(np.fft.fft(spectra, axis=2), axes=2)

    power = spectra.real**2 + spectra.imag**2
    return RangeDopplerMap(
        spectra=spectra,
        power=power,
        summed=power.mean(axis=0),
        range_resolution=config.range_resolution,
        velocity_resolution=config.velocity_resolution,
    )


def _cfar_threshold_cells(cells: np.ndarray, cfg: CfarConfig,
                          eligible: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell CA threshold over a cross-shaped training window.

    Range edges truncate (training mean renormalized by the live count);
    the Doppler axis wraps.  Excluded cells contribute nothing.  The scale
    alpha = N * (pfa^(-1/N) - 1) is evaluated with each cell's actual
    training count N, so the false-alarm rate stays calibrated at edges.
    """
    g, t = cfg.guard_cells, cfg.training_cells
    kernel = np.ones(2 * (g + t) + 1)
    kernel[t:t + 2 * g + 1] = 0.0

    masked = np.where(eligible, cells, 0.0)
    ind = eligible.astype(float)
    sums = (convolve1d(masked, kernel, axis=0, mode="constant", cval=0.0)
            + convolve1d(masked, kernel, axis=1, mode="wrap"))
    counts = (convolve1d(ind, kernel, axis=0, mode="constant", cval=0.0)
              + convolve1d(ind, kernel, axis=1, mode="wrap"))
    counts = np.round(counts)

    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = counts * (cfg.pfa ** (-1.0 / np.maximum(counts, 1.0)) - 1.0)
        threshold = alpha * sums / np.maximum(counts, 1.0)
    return threshold, counts


def cfar_detect(rd, cfg: CfarConfig, *, exclude_zero_doppler: bool = True,
                zero_doppler_halfwidth: int = 1):
    """Cells exceeding the CA-CFAR threshold, as (range bin, doppler bin, value).

    ``rd`` is a RangeDopplerMap (detection runs on its summed map) or a raw
    2-D power array.  The zero-Doppler stripe is removed before detection:
    those cells can neither fire nor train, which is what isolates dynamic
    returns from static interferers.
    """
    if isinstance(rd, RangeDopplerMap):
        cells = rd.summed
        zero_bin = rd.zero_doppler_bin
    else:
        cells = np.asarray(rd, dtype=float)
        if cells.ndim != 2:
            raise InvalidArgumentError("expected a 2-D power map")
        zero_bin = cells.shape[1] // 2
    if (cells < 0).any() or not np.isfinite(cells).all():
        raise InvalidArgumentError("power map must be finite and non-negative")
    if min(cells.shape) < cfg.window_extent:
        raise InvalidArgumentError(
            f"map shape {cells.shape} smaller than the CFAR window "
            f"({cfg.window_extent} cells)")

    eligible = np.ones_like(cells, dtype=bool)
    if exclude_zero_doppler:
        lo = zero_bin - zero_doppler_halfwidth
        hi = zero_bin + zero_doppler_halfwidth + 1
        eligible[:, max(lo, 0):hi] = False

    threshold, counts = _cfar_threshold_cells(cells, cfg, eligible)
    hits = eligible & (counts >= 1) & (cells > threshold)
    rbins, dbins = np.nonzero(hits)
    values = cells[rbins, dbins]
    return [(int(r), int(d), float(v)) for r, d, v in zip(rbins, dbins, values)]


def estimate_aoa(antenna_values: np.ndarray, array: VirtualArray,
                 n_fft: int = AOA_FFT_SIZE) -> tuple[float, float]:
    """(azimuth, elevation) in radians from one cell's per-antenna values.

    Azimuth: peak of the zero-padded DFT across the uniform bottom row
    (phase step pi*sin(az) per half-wavelength element).  Elevation: phase
    of the top-vs-bottom row correlation at shared azimuth offsets, which
    cancels the azimuth term exactly.
    """
    values = np.asarray(antenna_values)
    if values.shape != (len(array.elements),):
        raise InvalidArgumentError(
            f"expected {len(array.elements)} antenna values, got {values.shape}")
    if not np.abs(values).max() > 0:
        raise NoSignalError("all-zero antenna slice")

    row = values[array.azimuth_row()]
    spectrum = np.fft.fft(row, n_fft)
    peak = int(np.argmax(np.abs(spectrum)))
    if peak >= n_fft // 2:
        peak -= n_fft
    sin_az = np.clip(2.0 * peak / n_fft, -1.0, 1.0)
    azimuth = float(np.arcsin(sin_az))

    elevation = 0.0
    pairs = array.elevation_pairs()
    if pairs:
        corr = sum(values[top] * np.conj(values[bottom]) for bottom, top in pairs)
        if np.abs(corr) > 0:
            sin_el = np.clip(np.angle(corr) / np.pi, -1.0, 1.0)
            elevation = float(np.arcsin(sin_el))
    return azimuth, elevation


def extract_points(cube: AdcCube, cfar: CfarConfig,
                   max_range_m: float = MAX_OPERATING_RANGE_M,
                   array: VirtualArray | None = None) -> list[DetectedPoint]:
    """range_doppler -> cfar_detect -> estimate_aoa, to Cartesian points."""
    if array is None:
        array = virtual_array_for(cube.config.n_tx, cube.config.n_rx)
    rd = range_doppler(cube, max_range_m=max_range_m)
    points = []
    for rbin, dbin, intensity in cfar_detect(rd, cfar):
        azimuth, elevation = estimate_aoa(rd.spectra[:, rbin, dbin], array)
        r = rd.range_of_bin(rbin)
        x = r * np.sin(azimuth)
        z = r * np.sin(elevation)
        y = np.sqrt(max(r * r - x * x - z * z, 0.0))
        points.append(DetectedPoint(
            x=float(x), y=float(y), z=float(z),
            v=float(rd.velocity_of_bin(dbin)),
            intensity=intensity, range_bin=rbin, doppler_bin=dbin))
    return points
