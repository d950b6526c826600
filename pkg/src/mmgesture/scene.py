"""Parametric scatterer-level gesture scenes.

Each scene is a set of keyframe trajectories (monotone cubic interpolation
between jittered waypoints) carrying a rigid cluster of point scatterers
per hand, plus optional static clutter.  All randomness flows through the
seed, and every track keeps its keyframe parameters so scenes serialize
and rebuild exactly.

Motion design notes: purely transverse motion is invisible to a Doppler
radar (zero radial velocity), so every gesture couples a forward/back
component into its strokes the way a pivoting arm does.  Hand rolls are
modeled in the depth/height plane for the same reason; a perfect circle
facing the sensor would keep constant range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InvalidArgumentError, OutOfRangeError
from .frontend import MAX_OPERATING_RANGE_M

GESTURE_LABELS = ("knock", "left_swipe", "right_swipe", "rotate")
INTERFERENCE_LABELS = ("interference_tiny", "interference_walk_run")
MOVING_LABELS = GESTURE_LABELS + INTERFERENCE_LABELS
ALL_LABELS = MOVING_LABELS + ("clutter_only",)

PRESET_TO_LABEL = {
    "knock": "knock",
    "left-swipe": "left_swipe",
    "right-swipe": "right_swipe",
    "rotate": "rotate",
    "tiny": "interference_tiny",
    "walk-run": "interference_walk_run",
    "clutter": "clutter_only",
}
LABEL_TO_PRESET = {v: k for k, v in PRESET_TO_LABEL.items()}

CAPTURE_SECONDS = 3.0
SCATTERERS_PER_HAND = 10
JITTER_FRACTION = 0.15
DEFAULT_CLUTTER_EXTENT = ((-2.5, 2.5), (0.8, 5.0), (-0.5, 1.2))


@dataclass
class ScattererTrack:
    """A time-parameterized point reflector.

    ``position_fn`` maps time (s, scalar or 1-D array) to positions in the
    radar frame; it is defined for all t in [birth, death].  ``params``
    holds the keyframe description the function was built from.
    """

    position_fn: Callable[[np.ndarray], np.ndarray]
    rcs: float
    birth: float
    death: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.death <= self.birth:
            raise InvalidArgumentError("track death must come after birth")
        if not self.rcs > 0:
            raise InvalidArgumentError("track rcs must be positive")


@dataclass
class GestureScene:
    label: str
    hand_tracks: list[ScattererTrack]
    clutter_tracks: list[ScattererTrack]
    duration: float
    anchor: tuple[float, float, float]

    def __post_init__(self):
        if self.label not in ALL_LABELS:
            raise InvalidArgumentError(f"unknown scene label {self.label!r}")
        if (self.label == "clutter_only") != (len(self.hand_tracks) == 0):
            raise InvalidArgumentError(
                "hand_tracks must be empty exactly for clutter_only scenes")
        if self.duration <= 0:
            raise InvalidArgumentError("scene duration must be positive")

    def all_tracks(self) -> list[ScattererTrack]:
        return list(self.hand_tracks) + list(self.clutter_tracks)

    def describe(self) -> dict:
        """JSON-able scene description; rebuilds bit-identically."""
        return {
            "label": self.label,
            "anchor": [float(v) for v in self.anchor],
            "duration": float(self.duration),
            "hand_tracks": [t.params for t in self.hand_tracks],
            "clutter_tracks": [t.params for t in self.clutter_tracks],
        }

    def to_json(self) -> str:
        return json.dumps(self.describe(), sort_keys=True)


def _keyframe_track(times, points, offset, rcs, birth, death) -> ScattererTrack:
    """Track following a monotone cubic through keyframes, plus a rigid offset."""
    times = np.asarray(times, dtype=float)
    points = np.asarray(points, dtype=float)
    offset = np.asarray(offset, dtype=float)
    params = {
        "kind": "keyframes",
        "times": [float(v) for v in times],
        "points": [[float(c) for c in p] for p in points],
        "offset": [float(c) for c in offset],
        "rcs": float(rcs),
        "birth": float(birth),
        "death": float(death),
    }
    path = PchipInterpolator(times, points, axis=0)
    t0, t1 = float(times[0]), float(times[-1])

    def position_fn(t, _path=path, _t0=t0, _t1=t1, _off=offset):
        return _path(np.clip(t, _t0, _t1)) + _off

    return ScattererTrack(position_fn=position_fn, rcs=rcs,
                          birth=birth, death=death, params=params)


def _static_track(position, rcs, birth, death) -> ScattererTrack:
    position = np.asarray(position, dtype=float)
    params = {
        "kind": "static",
        "position": [float(c) for c in position],
        "rcs": float(rcs),
        "birth": float(birth),
        "death": float(death),
    }

    def position_fn(t, _p=position):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(_p, t.shape + (3,)).copy()

    return ScattererTrack(position_fn=position_fn, rcs=rcs,
                          birth=birth, death=death, params=params)


def track_from_params(params: dict) -> ScattererTrack:
    if params["kind"] == "static":
        track = _static_track(params["position"], params["rcs"],
                              params["birth"], params["death"])
    elif params["kind"] == "keyframes":
        track = _keyframe_track(params["times"], params["points"], params["offset"],
                                params["rcs"], params["birth"], params["death"])
    else:
        raise InvalidArgumentError(f"unknown track kind {params['kind']!r}")
    for key, value in params.items():  # auxiliary keys (e.g. phases) round-trip
        track.params.setdefault(key, value)
    return track


def scene_from_description(desc: dict) -> GestureScene:
    return GestureScene(
        label=desc["label"],
        hand_tracks=[track_from_params(p) for p in desc["hand_tracks"]],
        clutter_tracks=[track_from_params(p) for p in desc["clutter_tracks"]],
        duration=desc["duration"],
        anchor=tuple(desc["anchor"]),
    )


def _jit(rng) -> float:
    return 1.0 + rng.uniform(-JITTER_FRACTION, JITTER_FRACTION)


def _hold_until(t, p, duration):
    """Compress the motion if jitter overran the capture, then hold the pose."""
    if t[-1] > duration - 0.02:
        scale = (duration - 0.02) / t[-1]
        t = [ti * scale for ti in t]
    t.append(duration)
    p.append(p[-1])
    return t, p


def _knock_keyframes(rng, duration):
    delay = 0.30 * _jit(rng)
    raise_dur = 0.45 * _jit(rng)
    tap_half = 0.15 * _jit(rng)
    return_dur = 0.50 * _jit(rng)
    z_up = 0.48 * _jit(rng)
    z_dip = 0.34 * _jit(rng)
    y_reach = -0.035 * _jit(rng)

    t = [0.0, delay]
    p = [(0, 0, 0), (0, 0, 0)]
    t.append(t[-1] + raise_dur); p.append((0, y_reach, z_up))
    for _ in range(2):  # two down-up taps
        t.append(t[-1] + tap_half); p.append((0, y_reach, z_up - z_dip))
        t.append(t[-1] + tap_half); p.append((0, y_reach, z_up))
    t.append(t[-1] + return_dur); p.append((0, 0, 0))
    t, p = _hold_until(t, p, duration)
    phases = {"stroke_start": t[2], "stroke_end": t[6]}
    return t, p, phases


def _swipe_keyframes(rng, duration, direction):
    """direction=-1 sweeps toward -x (left swipe), +1 mirrors it."""
    delay = 0.30 * _jit(rng)
    raise_dur = 0.40 * _jit(rng)
    stroke_dur = 0.55 * _jit(rng)
    return_dur = 0.50 * _jit(rng)
    x_start = -direction * 0.22 * _jit(rng)
    x_end = direction * 0.42 * _jit(rng)
    z_lift = 0.18 * _jit(rng)
    y_arc = -0.13 * _jit(rng)
    # the arm drops to the side afterwards instead of retracing the stroke,
    # leaving a net displacement whose sign identifies the swipe direction
    x_final = 0.3 * x_end

    t = [0.0, delay]
    p = [(0, 0, 0), (0, 0, 0)]
    t.append(t[-1] + raise_dur); p.append((x_start, -0.04, z_lift))
    t.append(t[-1] + stroke_dur / 2); p.append(((x_start + x_end) / 2, -0.04 + y_arc, z_lift))
    t.append(t[-1] + stroke_dur / 2); p.append((x_end, -0.04, 0.9 * z_lift))
    t.append(t[-1] + return_dur); p.append((x_final, 0, 0.01))
    t, p = _hold_until(t, p, duration)
    phases = {"stroke_start": t[2], "stroke_end": t[4]}
    return t, p, phases


def _rotate_keyframes(rng, duration, phase0):
    """Hand-roll ellipse in the depth/height plane; phase0 staggers the hands."""
    delay = 0.25 * _jit(rng)
    raise_dur = 0.35 * _jit(rng)
    roll_dur = 1.55 * _jit(rng)
    settle_dur = 0.40 * _jit(rng)
    freq = 1.25 * _jit(rng)
    r_y = 0.11 * _jit(rng)
    r_z = 0.14 * _jit(rng)
    center = np.array([0.03, -0.06, 0.12]) * _jit(rng)

    def on_circle(tau):
        ang = 2 * np.pi * freq * tau + phase0
        return (center[0], center[1] + r_y * np.cos(ang), center[2] + r_z * np.sin(ang))

    t = [0.0, delay]
    p = [(0, 0, 0), (0, 0, 0)]
    t.append(t[-1] + raise_dur); p.append(on_circle(0.0))
    roll_start = t[-1]
    n_knots = max(8, int(np.ceil(8 * freq * roll_dur)))
    for i in range(1, n_knots + 1):
        tau = roll_dur * i / n_knots
        t.append(roll_start + tau); p.append(on_circle(tau))
    t.append(t[-1] + settle_dur); p.append((0, 0, 0))
    t, p = _hold_until(t, p, duration)
    phases = {"stroke_start": t[2], "stroke_end": t[-3]}
    return t, p, phases


def _tiny_keyframes(rng, duration):
    """Small wrist flicks near the rest pose; similar tempo, far smaller extent."""
    delay = 0.40 * _jit(rng)
    n_flicks = int(rng.integers(2, 4))
    flick_half = 0.13 * _jit(rng)
    y_dip = -0.06 * _jit(rng)
    z_wob = 0.025 * _jit(rng)

    t = [0.0, delay]
    p = [(0, 0, 0), (0, 0, 0)]
    for i in range(n_flicks):
        sign = 1 if i % 2 == 0 else -1
        t.append(t[-1] + flick_half); p.append((0, y_dip, sign * z_wob))
        t.append(t[-1] + flick_half); p.append((0, 0, 0))
    t, p = _hold_until(t, p, duration)
    phases = {"stroke_start": t[1], "stroke_end": t[-2]}
    return t, p, phases


def _walk_keyframes(rng, duration, anchor):
    """Torso center crossing the room; walking or running pace per seed."""
    running = bool(rng.integers(0, 2))
    speed = rng.uniform(2.0, 2.6) if running else rng.uniform(1.0, 1.4)
    x0 = rng.choice([-1.0, 1.0]) * rng.uniform(1.1, 1.4)
    y0 = rng.uniform(1.7, 3.0)
    y_drift = rng.uniform(-0.5, 0.5)
    delay = 0.2 * _jit(rng)

    start = np.array([x0, y0, 0.1]) - np.asarray(anchor)  # keyframes are anchor-relative
    heading = np.array([-2 * x0, y_drift, 0.0])
    heading /= np.linalg.norm(heading)
    path_len = min(speed * (duration - delay), 2.6)
    travel = path_len / speed

    t = [0.0, delay]
    p = [tuple(start), tuple(start)]
    n_knots = max(4, int(np.ceil(travel / 0.25)))
    for i in range(1, n_knots + 1):
        tau = travel * i / n_knots
        p.append(tuple(start + heading * speed * tau))
        t.append(delay + tau)
    t, p = _hold_until(t, p, duration)
    phases = {"stroke_start": t[1], "stroke_end": t[-2]}
    return t, p, phases


_KEYFRAME_BUILDERS = {
    "knock": lambda rng, T, anchor: [_knock_keyframes(rng, T)],
    "left_swipe": lambda rng, T, anchor: [_swipe_keyframes(rng, T, -1)],
    "right_swipe": lambda rng, T, anchor: [_swipe_keyframes(rng, T, +1)],
    "rotate": lambda rng, T, anchor: [_rotate_keyframes(rng, T, 0.0),
                                      _rotate_keyframes(rng, T, np.pi)],
    "interference_tiny": lambda rng, T, anchor: [_tiny_keyframes(rng, T)],
    "interference_walk_run": lambda rng, T, anchor: [_walk_keyframes(rng, T, anchor)],
}

# second rotate hand sits beside the first; walking bodies are bigger clusters
_CLUSTER_SIGMA = {"interference_walk_run": (0.12, 0.10, 0.38)}
_CLUSTER_RCS_MU = {"interference_walk_run": np.log(2.0)}


def _validate_extent_of_tracks(tracks):
    for track in tracks:
        pts = np.asarray(track.params.get("points") or [track.params["position"]])
        reach = np.linalg.norm(pts, axis=1).max()
        reach += np.linalg.norm(track.params.get("offset", (0, 0, 0)))
        if reach > MAX_OPERATING_RANGE_M:
            raise InvalidArgumentError(
                f"track reaches {reach:.2f} m, beyond the {MAX_OPERATING_RANGE_M} m "
                "operating range")


def make_gesture_scene(label: str, anchor, rng_seed: int, *,
                       duration: float = CAPTURE_SECONDS,
                       scatterers_per_hand: int = SCATTERERS_PER_HAND,
                       n_clutter: int = 0,
                       clutter_extent=DEFAULT_CLUTTER_EXTENT) -> GestureScene:
    """Build a deterministic scene for one of the moving-target labels.

    The hand is a rigid cluster of ``scatterers_per_hand`` point reflectors
    with fixed Gaussian offsets (sigma 2 cm) riding a jittered nominal
    trajectory.  Timing and amplitudes vary +-15% per seed.
    """
    if label not in MOVING_LABELS:
        raise InvalidArgumentError(
            f"label {label!r} is not a gesture/interference class; "
            f"expected one of {MOVING_LABELS}")
    anchor = np.asarray(anchor, dtype=float)
    if np.linalg.norm(anchor) > MAX_OPERATING_RANGE_M:
        raise InvalidArgumentError("anchor outside the radar operating range")
    rng = np.random.default_rng(rng_seed)

    hand_tracks: list[ScattererTrack] = []
    sigma = _CLUSTER_SIGMA.get(label, (0.02, 0.02, 0.02))
    rcs_mu = _CLUSTER_RCS_MU.get(label, 0.0)
    for hand_index, (times, points, phases) in enumerate(
            _KEYFRAME_BUILDERS[label](rng, duration, anchor)):
        abs_points = [tuple(np.asarray(p) + anchor) for p in points]
        x_side = 0.0 if label != "rotate" else (-0.07 if hand_index == 0 else 0.07)
        n_scat = scatterers_per_hand
        offsets = rng.normal(0.0, 1.0, (n_scat, 3)) * np.asarray(sigma)
        offsets[:, 0] += x_side
        rcs_values = rng.lognormal(rcs_mu, 0.35, n_scat)
        for k in range(n_scat):
            track = _keyframe_track(times, abs_points, offsets[k], rcs_values[k],
                                    birth=0.0, death=duration)
            track.params["phases"] = {k2: float(v) for k2, v in phases.items()}
            hand_tracks.append(track)

    clutter = make_clutter(n_clutter, clutter_extent, rng) if n_clutter else []
    scene = GestureScene(label=label, hand_tracks=hand_tracks,
                         clutter_tracks=clutter, duration=duration,
                         anchor=tuple(float(v) for v in anchor))
    _validate_extent_of_tracks(scene.all_tracks())
    return scene


def make_clutter_scene(anchor, rng_seed: int, *, n_clutter: int = 5,
                       duration: float = CAPTURE_SECONDS,
                       clutter_extent=DEFAULT_CLUTTER_EXTENT) -> GestureScene:
    rng = np.random.default_rng(rng_seed)
    scene = GestureScene(label="clutter_only", hand_tracks=[],
                         clutter_tracks=make_clutter(n_clutter, clutter_extent, rng),
                         duration=duration,
                         anchor=tuple(float(v) for v in np.asarray(anchor, dtype=float)))
    _validate_extent_of_tracks(scene.all_tracks())
    return scene


def make_clutter(n: int, extent, rng_seed, *,
                 duration: float = CAPTURE_SECONDS) -> list[ScattererTrack]:
    """``n`` static reflectors uniform in the extent box.

    rcs is log-uniform over one decade [3, 30], deliberately stronger than
    a single hand scatterer so static interference dominates raw returns.
    ``rng_seed`` may be an int seed or a Generator.
    """
    if n < 0:
        raise InvalidArgumentError("clutter count must be >= 0")
    extent = np.asarray(extent, dtype=float)
    if extent.shape != (3, 2):
        raise InvalidArgumentError("extent must be ((xmin,xmax),(ymin,ymax),(zmin,zmax))")
    if (extent[:, 1] <= extent[:, 0]).any():
        raise InvalidArgumentError("extent box has zero or negative volume")
    corners = np.array(np.meshgrid(*extent, indexing="ij")).reshape(3, -1).T
    if np.linalg.norm(corners, axis=1).max() > MAX_OPERATING_RANGE_M:
        raise InvalidArgumentError("extent box leaves the radar operating range")
    if n == 0:
        return []
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) \
        else np.random.default_rng(rng_seed)
    positions = rng.uniform(extent[:, 0], extent[:, 1], (n, 3))
    rcs = np.exp(rng.uniform(np.log(3.0), np.log(30.0), n))
    return [_static_track(positions[i], rcs[i], 0.0, duration) for i in range(n)]


def make_preset_scene(preset: str, anchor, rng_seed: int, *,
                      n_clutter: int = 0, **kwargs) -> GestureScene:
    """Scene for a CLI preset name (``knock``, ``left-swipe``, ..., ``clutter``)."""
    if preset not in PRESET_TO_LABEL:
        raise InvalidArgumentError(
            f"unknown preset {preset!r}; expected one of {sorted(PRESET_TO_LABEL)}")
    label = PRESET_TO_LABEL[preset]
    if label == "clutter_only":
        return make_clutter_scene(anchor, rng_seed,
                                  n_clutter=n_clutter if n_clutter > 0 else 5, **kwargs)
    return make_gesture_scene(label, anchor, rng_seed, n_clutter=n_clutter, **kwargs)


def sample_scene(scene: GestureScene, t: float):
    """(position, radial_velocity, rcs) for every track live at time t.

    Radial velocity is the central-difference derivative of range; positive
    means receding from the radar.
    """
    if not 0.0 <= t <= scene.duration:
        raise OutOfRangeError(f"t={t} outside scene duration [0, {scene.duration}]")
    out = []
    h = 1e-4
    for track in scene.all_tracks():
        if not track.birth <= t <= track.death:
            continue
        pos = np.asarray(track.position_fn(t), dtype=float).reshape(3)
        ta = max(t - h, track.birth)
        tb = min(t + h, track.death)
        pa = np.asarray(track.position_fn(ta), dtype=float).reshape(3)
        pb = np.asarray(track.position_fn(tb), dtype=float).reshape(3)
        v_r = (np.linalg.norm(pb) - np.linalg.norm(pa)) / (tb - ta)
        out.append((pos, float(v_r), track.rcs))
    return out
