"""Gesture tensor assembly and the CSV interchange format.

A gesture is 30 frames of reflection points.  Per frame the 64 strongest
points are retained; the component-wise mean over every retained point of
the gesture becomes the standard point, each retained point is re-expressed
as its difference from that mean, and the result is packed into a fixed
5 x 30 x 65 tensor: feature planes (x, y, z, v, intensity), slot 0 carrying
the standard point in every frame, slots 1..64 carrying the differences,
zero-padded.  Zero in difference space means "a point exactly at the
standard point", the neutral element under centering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import DetectedPoint
from .errors import (CsvFormatError, EmptyGestureError, InvalidArgumentError,
                     ShapeError)

N_FRAMES = 30
N_SLOTS = 65
MAX_POINTS_PER_FRAME = N_SLOTS - 1
FEATURE_NAMES = ("x", "y", "z", "v", "intensity")

CSV_HEADER = "sample_id,label,frame,slot,x,y,z,v,intensity"


@dataclass
class FramePoints:
    """Detected points of one capture frame."""

    frame_index: int
    points: list[DetectedPoint] = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.frame_index < N_FRAMES:
            raise InvalidArgumentError(
                f"frame_index {self.frame_index} outside 0..{N_FRAMES - 1}")


@dataclass(frozen=True)
class StandardPoint:
    x: float
    y: float
    z: float
    v: float
    intensity: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.v, self.intensity])


@dataclass
class GestureSample:
    """The fixed-size gesture tensor plus label and provenance."""

    tensor: np.ndarray
    label: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tensor = np.asarray(self.tensor, dtype=float)
        if self.tensor.shape != (5, N_FRAMES, N_SLOTS):
            raise ShapeError(
                f"gesture tensor must be (5, {N_FRAMES}, {N_SLOTS}), "
                f"got {self.tensor.shape}")


def _sort_key(point: DetectedPoint):
    # descending intensity; provenance bins (then coordinates) break ties
    rb = point.range_bin if point.range_bin is not None else np.inf
    db = point.doppler_bin if point.doppler_bin is not None else np.inf
    return (-point.intensity, rb, db, point.x, point.y, point.z, point.v)


def retain_points(points, cap: int = MAX_POINTS_PER_FRAME) -> list[DetectedPoint]:
    """The ``cap`` highest-intensity points, deterministically ordered."""
    return sorted(points, key=_sort_key)[:cap]


def retain_frames(frames) -> list[FramePoints]:
    return [FramePoints(f.frame_index, retain_points(f.points)) for f in frames]


def standard_point(frames) -> StandardPoint:
    """Component-wise mean over all points pooled across frames."""
    stacked = [p.features() for f in frames for p in f.points]
    if not stacked:
        raise EmptyGestureError("no reflection points in any frame")
    mean = np.mean(stacked, axis=0)
    return StandardPoint(*(float(v) for v in mean))


def delta_points(frames, p0: StandardPoint) -> list[np.ndarray]:
    """Per frame, the (n_points, 5) array of differences from the mean."""
    ref = p0.as_array()
    out = []
    for frame in frames:
        if frame.points:
            out.append(np.stack([p.features() for p in frame.points]) - ref)
        else:
            out.append(np.zeros((0, 5)))
    return out


def assemble(frames, p0: StandardPoint, deltas, label: str = "",
             meta: dict | None = None) -> GestureSample:
    """Pack standard point and per-frame deltas into the gesture tensor."""
    frames = list(frames)
    if len(frames) != N_FRAMES:
        raise ShapeError(f"expected exactly {N_FRAMES} frames, got {len(frames)}")
    if len(deltas) != N_FRAMES:
        raise ShapeError(f"expected {N_FRAMES} delta groups, got {len(deltas)}")
    tensor = np.zeros((5, N_FRAMES, N_SLOTS))
    tensor[:, :, 0] = p0.as_array()[:, None]
    for j, frame_deltas in enumerate(deltas):
        kept = np.asarray(frame_deltas)[:MAX_POINTS_PER_FRAME]
        if kept.size:
            tensor[:, j, 1:1 + kept.shape[0]] = kept.T
    return GestureSample(tensor=tensor, label=label, meta=dict(meta or {}))


def build_sample(frames, label: str, meta: dict | None = None) -> GestureSample:
    """Retention -> standard point -> deltas -> tensor, in one call.

    Retention happens first so the mean is taken over exactly the points
    that end up in the tensor; pooled deltas then center to zero.
    """
    retained = retain_frames(frames)
    p0 = standard_point(retained)
    deltas = delta_points(retained, p0)
    sample = assemble(retained, p0, deltas, label=label, meta=meta)
    sample.meta.setdefault("standard_point", [float(v) for v in p0.as_array()])
    return sample


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _parse_rows(path):
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise CsvFormatError(f"{path}: empty file, expected header {CSV_HEADER!r}")
    if lines[0] != CSV_HEADER:
        raise CsvFormatError(
            f"{path}:1: bad header {lines[0]!r}, expected {CSV_HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 9:
            raise CsvFormatError(
                f"{path}:{lineno}: expected 9 columns, got {len(parts)}")
        sample_id, label = parts[0], parts[1]
        try:
            frame, slot = int(parts[2]), int(parts[3])
            values = [float(v) for v in parts[4:]]
        except ValueError as exc:
            raise CsvFormatError(f"{path}:{lineno}: non-numeric field ({exc})")
        rows.append((lineno, sample_id, label, frame, slot, values))
    return rows


def write_frames_csv(path, sample_id: str, label: str, frames) -> None:
    """Raw per-frame point lists; slot is the point index within its frame."""
    out = [CSV_HEADER]
    for frame in frames:
        for slot, point in enumerate(frame.points):
            values = ",".join(_fmt(v) for v in point.features())
            out.append(f"{sample_id},{label},{frame.frame_index},{slot},{values}")
    Path(path).write_text("\n".join(out) + "\n")


def read_frames_csv(path, n_frames: int = N_FRAMES):
    """Inverse of write_frames_csv -> (sample_id, label, frames)."""
    rows = _parse_rows(path)
    frames = [FramePoints(j, []) for j in range(n_frames)]
    sample_id, label = "", ""
    for lineno, sid, lab, frame, slot, values in rows:
        sample_id, label = sid, lab
        if not 0 <= frame < n_frames:
            raise CsvFormatError(f"{path}:{lineno}: frame {frame} outside 0..{n_frames - 1}")
        x, y, z, v, intensity = values
        frames[frame].points.append(
            DetectedPoint(x=x, y=y, z=z, v=v, intensity=intensity))
    return sample_id, label, frames


def write_sample_csv(path, sample: GestureSample, sample_id: str | None = None) -> None:
    """Assembled tensor as CSV; zero-padding slots are implied, not written."""
    sid = sample_id or str(sample.meta.get("sample_id", "sample"))
    out = [CSV_HEADER]
    for j in range(N_FRAMES):
        out.append(f"{sid},{sample.label},{j},0,"
                   + ",".join(_fmt(v) for v in sample.tensor[:, j, 0]))
        for slot in range(1, N_SLOTS):
            column = sample.tensor[:, j, slot]
            if np.any(column != 0.0):
                out.append(f"{sid},{sample.label},{j},{slot},"
                           + ",".join(_fmt(v) for v in column))
    Path(path).write_text("\n".join(out) + "\n")


def read_sample_csv(path) -> GestureSample:
    rows = _parse_rows(path)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    tensor = np.zeros((5, N_FRAMES, N_SLOTS))
    sample_id, label = rows[0][1], rows[0][2]
    seen_p0 = np.zeros(N_FRAMES, dtype=bool)
    for lineno, sid, lab, frame, slot, values in rows:
        if not 0 <= frame < N_FRAMES:
            raise CsvFormatError(f"{path}:{lineno}: frame {frame} outside 0..{N_FRAMES - 1}")
        if not 0 <= slot < N_SLOTS:
            raise CsvFormatError(f"{path}:{lineno}: slot {slot} outside 0..{N_SLOTS - 1}")
        tensor[:, frame, slot] = values
        if slot == 0:
            seen_p0[frame] = True
    if not seen_p0.all():
        missing = int(np.flatnonzero(~seen_p0)[0])
        raise CsvFormatError(f"{path}: frame {missing} is missing its slot-0 row")
    return GestureSample(tensor=tensor, label=label, meta={"sample_id": sample_id})
