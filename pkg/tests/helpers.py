"""Shared builders for tests: minimal scenes and pipeline shortcuts."""

import numpy as np

from mmgesture import dsp, pointcloud
from mmgesture.frontend import ChirpConfig, synthesize_frame
from mmgesture.scene import GestureScene, _keyframe_track, _static_track


def static_scene(position, rcs=1.0, duration=3.0):
    track = _static_track(position, rcs, 0.0, duration)
    return GestureScene(label="clutter_only", hand_tracks=[],
                        clutter_tracks=[track], duration=duration,
                        anchor=(0.0, 0.0, 0.0))


def line_scene(start, velocity, duration=0.2, rcs=1.0):
    """Single scatterer moving at a constant velocity vector."""
    start = np.asarray(start, dtype=float)
    end = start + np.asarray(velocity, dtype=float) * duration
    track = _keyframe_track([0.0, duration], [start, end], (0, 0, 0),
                            rcs, 0.0, duration)
    return GestureScene(label="clutter_only", hand_tracks=[],
                        clutter_tracks=[track], duration=duration,
                        anchor=(0.0, 0.0, 0.0))


def multi_scene(tracks, duration=3.0):
    return GestureScene(label="clutter_only", hand_tracks=[],
                        clutter_tracks=list(tracks), duration=duration,
                        anchor=(0.0, 0.0, 0.0))


def capture_frames(scene, config: ChirpConfig, noise_std=0.0, seed=0,
                   cfar=None, n_frames=pointcloud.N_FRAMES):
    """Synthesize + extract all frames of a capture."""
    cfar = cfar or dsp.CfarConfig()
    frames = []
    for j in range(n_frames):
        cube = synthesize_frame(scene, config, t0=j * config.frame_period,
                                noise_std=noise_std, rng_seed=seed * 10007 + j)
        frames.append(pointcloud.FramePoints(j, dsp.extract_points(cube, cfar)))
    return frames


def point(x=0.0, y=0.0, z=0.0, v=0.0, intensity=1.0, rb=None, db=None):
    return dsp.DetectedPoint(x=x, y=y, z=z, v=v, intensity=intensity,
                             range_bin=rb, doppler_bin=db)
