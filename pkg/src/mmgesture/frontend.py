"""FMCW radar front end: chirp configuration, virtual MIMO array, IF synthesis.

A scene is turned into one frame of sampled IF data per call.  The mixer
output for a point reflector at distance ``d`` is a complex tone

    beat frequency  f0   = S * 2d / c
    starting phase  phi0 = 4 pi d / lambda

with ``S`` the chirp slope.  Motion across chirps advances phi0 by
``4 pi v T / lambda`` per chirp interval ``T``, which the Doppler FFT
recovers; element position in the virtual array adds ``pi * (u * sin(az)
+ w * sin(el))`` for an element offset of (u, w) half-wavelengths.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, NumericsError, OutOfRangeError

LIGHT_SPEED = 2.99792458e8

# Data-sheet operating range of the sensor.  Scenes are validated against it
# and the processing chain crops range bins beyond it.
MAX_OPERATING_RANGE_M = 9.62

CONFIG_KEYS = (
    "carrier_freq_hz",
    "bandwidth_hz",
    "ramp_time_s",
    "samples_per_chirp",
    "adc_rate_sps",
    "chirps_per_frame",
    "frame_period_s",
    "n_tx",
    "n_rx",
    "noise_std",
)


@dataclass(frozen=True)
class ChirpConfig:
    """Full FMCW waveform and array parameterization.

    Defaults model a commodity 77 GHz 3TX/4RX sensor: 4 GHz sweep over a
    60 us ramp sampled at 37.5 Msps (2250 samples fill the ramp exactly),
    64 chirp snapshots per 100 ms frame.
    """

    carrier_freq: float = 77e9
    bandwidth: float = 4e9
    ramp_time: float = 60e-6
    samples_per_chirp: int = 2250
    adc_rate: float = 37.5e6
    chirps_per_frame: int = 64
    frame_period: float = 0.1
    n_tx: int = 3
    n_rx: int = 4
    light_speed: float = LIGHT_SPEED

    def __post_init__(self):
        if min(self.carrier_freq, self.bandwidth, self.ramp_time,
               self.adc_rate, self.frame_period) <= 0:
            raise InvalidArgumentError("chirp config fields must be positive")
        if self.samples_per_chirp < 2 or self.chirps_per_frame < 2:
            raise InvalidArgumentError("need at least 2 samples and 2 chirps")
        if self.n_tx < 1 or self.n_rx < 1:
            raise InvalidArgumentError("need at least one TX and one RX")
        window = self.samples_per_chirp / self.adc_rate
        if window > self.ramp_time * (1 + 1e-9):
            raise InvalidArgumentError(
                f"sampling window {window:.3e}s exceeds ramp time {self.ramp_time:.3e}s"
            )
        if self.frame_span > self.frame_period * (1 + 1e-9):
            raise InvalidArgumentError("chirp burst does not fit in the frame period")

    @property
    def slope(self) -> float:
        """Sweep slope S in Hz/s; slope * ramp_time == bandwidth exactly."""
        return self.bandwidth / self.ramp_time

    @property
    def wavelength(self) -> float:
        return self.light_speed / self.carrier_freq

    @property
    def n_virtual(self) -> int:
        return self.n_tx * self.n_rx

    @property
    def chirp_interval(self) -> float:
        """Slow-time sampling period: one full TDM snapshot of n_tx ramps."""
        return self.n_tx * self.ramp_time

    @property
    def frame_span(self) -> float:
        """Duration of the chirp burst at the start of a frame."""
        return self.chirps_per_frame * self.chirp_interval

    @property
    def range_resolution(self) -> float:
        """Meters per range bin: c / (2 * S * T_sample)."""
        t_sample = self.samples_per_chirp / self.adc_rate
        return self.light_speed / (2 * self.slope * t_sample)

    @property
    def max_unambiguous_range(self) -> float:
        """adc_rate * c / (2 * slope * 2); real-sampling Nyquist bound."""
        return self.adc_rate * self.light_speed / (4 * self.slope)

    @property
    def velocity_resolution(self) -> float:
        return self.wavelength / (2 * self.chirps_per_frame * self.chirp_interval)

    @property
    def max_unambiguous_velocity(self) -> float:
        return self.wavelength / (4 * self.chirp_interval)

    def chirp_times(self, t0: float) -> np.ndarray:
        return t0 + np.arange(self.chirps_per_frame) * self.chirp_interval

    def to_mapping(self, noise_std: float = 1.0) -> dict:
        return {
            "carrier_freq_hz": self.carrier_freq,
            "bandwidth_hz": self.bandwidth,
            "ramp_time_s": self.ramp_time,
            "samples_per_chirp": self.samples_per_chirp,
            "adc_rate_sps": self.adc_rate,
            "chirps_per_frame": self.chirps_per_frame,
            "frame_period_s": self.frame_period,
            "n_tx": self.n_tx,
            "n_rx": self.n_rx,
            "noise_std": noise_std,
        }


DEFAULT_CONFIG = ChirpConfig()

# Desk-scale profile: identical waveform geometry but only 512 fast-time
# samples (13.7 us of the ramp), trading range resolution (16.5 cm) for a
# ~4x cheaper simulate/process path.  Used by the batch experiments.
FAST_CONFIG = ChirpConfig(samples_per_chirp=512)


def parse_config_file(path) -> dict:
    """Read a flat key=value chirp profile; '#' starts a comment."""
    values: dict[str, float] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise InvalidArgumentError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise InvalidArgumentError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = float(value.strip())
        except ValueError:
            raise InvalidArgumentError(f"{path}:{lineno}: non-numeric value {value.strip()!r}")
    return values


def load_profile(path) -> tuple[ChirpConfig, float]:
    """Load (ChirpConfig, noise_std) from a key=value profile file."""
    values = parse_config_file(path)
    noise_std = values.pop("noise_std", 1.0)
    if noise_std < 0:
        raise InvalidArgumentError("noise_std must be >= 0")
    kwargs = {}
    rename = {
        "carrier_freq_hz": "carrier_freq",
        "bandwidth_hz": "bandwidth",
        "ramp_time_s": "ramp_time",
        "adc_rate_sps": "adc_rate",
        "frame_period_s": "frame_period",
    }
    for key, value in values.items():
        name = rename.get(key, key)
        if name in ("samples_per_chirp", "chirps_per_frame", "n_tx", "n_rx"):
            value = int(round(value))
        kwargs[name] = value
    return ChirpConfig(**kwargs), noise_std


def write_profile(path, config: ChirpConfig, noise_std: float = 1.0) -> None:
    mapping = config.to_mapping(noise_std)
    lines = [f"{key}={mapping[key]!r}" for key in CONFIG_KEYS]
    Path(path).write_text("\n".join(lines) + "\n")


def config_hash(config: ChirpConfig, noise_std: float = 1.0) -> str:
    """Short stable digest of a profile, recorded in manifests and checkpoints."""
    mapping = config.to_mapping(noise_std)
    text = ";".join(f"{key}={mapping[key]!r}" for key in sorted(mapping))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class VirtualArray:
    """TX*RX virtual element positions in half-wavelength units.

    ``elements`` maps virtual index -> (azimuth offset u, elevation offset w).
    The default 3TX/4RX sensor forms 8 uniformly spaced azimuth elements in
    the bottom row plus a 4-element row half a wavelength above it.
    """

    elements: tuple[tuple[int, tuple[float, float]], ...]
    n_azimuth: int
    n_elevation: int

    @property
    def offsets(self) -> np.ndarray:
        return np.array([pos for _, pos in self.elements], dtype=float)

    def azimuth_row(self) -> list[int]:
        """Indices of the bottom (w == 0) row, sorted by azimuth offset."""
        row = [(pos[0], idx) for idx, pos in self.elements if pos[1] == 0.0]
        return [idx for _, idx in sorted(row)]

    def elevation_pairs(self) -> list[tuple[int, int]]:
        """(bottom, top) index pairs sharing an azimuth offset."""
        bottom = {pos[0]: idx for idx, pos in self.elements if pos[1] == 0.0}
        top = {pos[0]: idx for idx, pos in self.elements if pos[1] != 0.0}
        return [(bottom[u], top[u]) for u in sorted(set(bottom) & set(top))]


def virtual_array_for(n_tx: int, n_rx: int) -> VirtualArray:
    """Standard layout for the 3TX/4RX sensor; plain ULA otherwise."""
    if (n_tx, n_rx) == (3, 4):
        elements = [(i, (float(i), 0.0)) for i in range(8)]
        elements += [(8 + i, (float(2 + i), 1.0)) for i in range(4)]
        return VirtualArray(tuple(elements), n_azimuth=8, n_elevation=2)
    n = n_tx * n_rx
    return VirtualArray(tuple((i, (float(i), 0.0)) for i in range(n)),
                        n_azimuth=n, n_elevation=1)


@dataclass(frozen=True)
class AdcCube:
    """One frame of sampled IF data, [virtual antenna][chirp][fast-time]."""

    data: np.ndarray
    config: ChirpConfig
    frame_index: int = 0
    timestamp: float = 0.0

    def __post_init__(self):
        expected = (self.config.n_virtual, self.config.chirps_per_frame,
                    self.config.samples_per_chirp)
        if self.data.shape != expected:
            raise InvalidArgumentError(
                f"cube shape {self.data.shape} does not match config {expected}")
        if not np.isfinite(self.data).all():
            raise NumericsError("non-finite samples in ADC cube")


def if_tone_params(config: ChirpConfig, range_m: float) -> tuple[float, float]:
    """Beat frequency and starting phase of the IF tone for a reflector.

    f0 = S * 2d / c, phi0 = 4 pi d / lambda reduced to [0, 2 pi).
    """
    if not 0 < range_m <= config.max_unambiguous_range:
        raise OutOfRangeError(
            f"range {range_m} m outside (0, {config.max_unambiguous_range:.2f}] m")
    beat = config.slope * 2.0 * range_m / config.light_speed
    phase = np.mod(4.0 * np.pi * range_m / config.wavelength, 2.0 * np.pi)
    return beat, float(phase)


def _track_states(scene, t_chirps: np.ndarray) -> tuple[np.ndarray, ...]:
    """Positions, amplitudes and liveness of every track at each chirp time.

    Dead chirps get amplitude 0 (position evaluated at clamped times so the
    trajectory function never sees arguments outside its domain).
    """
    tracks = list(scene.hand_tracks) + list(scene.clutter_tracks)
    n, k = len(tracks), t_chirps.size
    pos = np.zeros((n, k, 3))
    amp_mask = np.zeros((n, k))
    rcs = np.zeros(n)
    for i, track in enumerate(tracks):
        t_clamped = np.clip(t_chirps, track.birth, track.death)
        pos[i] = np.asarray(track.position_fn(t_clamped), dtype=float).reshape(k, 3)
        amp_mask[i] = (t_chirps >= track.birth) & (t_chirps <= track.death)
        rcs[i] = track.rcs
    return pos, amp_mask, rcs


def synthesize_frame(scene, config: ChirpConfig, t0: float,
                     noise_std: float = 0.0, rng_seed: int = 0,
                     array: VirtualArray | None = None,
                     frame_index: int | None = None) -> AdcCube:
    """Superpose the IF tones of every live scatterer plus receiver noise.

    Per chirp the reflector distance is re-evaluated, so Doppler phase
    progression and range migration both fall out of the geometry.  The
    per-sample fast-time tone is generated as a geometric recurrence
    (uniform sampling makes each tone exp(j*d*(a*t_s+b)) a cumulative
    product), which is ~2x cheaper than direct complex exponentials.
    Amplitude follows rcs / d^2.  Noise is circular Gaussian with total
    standard deviation ``noise_std`` per complex sample.
    """
    if array is None:
        array = virtual_array_for(config.n_tx, config.n_rx)
    if t0 < -1e-12 or t0 + config.frame_period > scene.duration * (1 + 1e-9) + 1e-12:
        raise OutOfRangeError(
            f"frame [{t0}, {t0 + config.frame_period}] s outside scene duration "
            f"{scene.duration} s")
    n_ant = config.n_virtual
    k, n = config.chirps_per_frame, config.samples_per_chirp
    t_chirps = config.chirp_times(t0)
    cube = np.zeros((n_ant, k, n), dtype=np.complex128)

    pos, amp_mask, rcs = _track_states(scene, t_chirps)
    if pos.shape[0]:
        dist = np.linalg.norm(pos, axis=2)
        if (dist < 1e-6).any():
            raise OutOfRangeError("scatterer collided with the radar origin")
        ux = pos[:, :, 0] / dist
        uz = pos[:, :, 2] / dist
        amp = amp_mask * rcs[:, None] / dist**2

        # fast-time tone: phase(s, k, n) = d[s, k] * (a * t_n + b)
        a = 4.0 * np.pi * config.slope / config.light_speed
        b = 4.0 * np.pi / config.wavelength
        step = np.exp(1j * (dist * (a / config.adc_rate)))
        tones = np.broadcast_to(step[:, :, None], (pos.shape[0], k, n)).copy()
        tones[:, :, 0] = np.exp(1j * (dist * b))
        tones = np.cumprod(tones, axis=2)

        offsets = array.offsets  # (A, 2)
        steer = np.exp(1j * np.pi * (offsets[:, 0, None, None] * ux
                                     + offsets[:, 1, None, None] * uz))
        coef = steer * amp  # (A, S, K)
        for ki in range(k):
            cube[:, ki, :] += coef[:, :, ki] @ tones[:, ki, :]

    if noise_std > 0:
        rng = np.random.default_rng(rng_seed)
        scale = noise_std / np.sqrt(2.0)
        cube += scale * (rng.standard_normal(cube.shape)
                         + 1j * rng.standard_normal(cube.shape))

    if frame_index is None:
        frame_index = int(round(t0 / config.frame_period))
    return AdcCube(data=cube, config=config, frame_index=frame_index, timestamp=t0)
