"""mmgesture: simulator-backed mmWave FMCW gesture recognition.

Scene synthesis -> IF simulation -> range-Doppler / CA-CFAR / AoA point
extraction -> 5x30x65 gesture tensors -> five-branch convolutional
classifier, plus a CLI for dataset generation, training and evaluation.
"""

from .dsp import CfarConfig, DetectedPoint, RangeDopplerMap
from .frontend import (DEFAULT_CONFIG, FAST_CONFIG, AdcCube, ChirpConfig,
                       VirtualArray, if_tone_params, synthesize_frame,
                       virtual_array_for)
from .pointcloud import (FramePoints, GestureSample, StandardPoint,
                         build_sample)
from .scene import (GestureScene, ScattererTrack, make_clutter,
                    make_gesture_scene, make_preset_scene, sample_scene)

__version__ = "0.1.0"

__all__ = [
    "AdcCube", "CfarConfig", "ChirpConfig", "DEFAULT_CONFIG", "DetectedPoint",
    "FAST_CONFIG", "FramePoints", "GestureSample", "GestureScene",
    "RangeDopplerMap", "ScattererTrack", "StandardPoint", "VirtualArray",
    "build_sample", "if_tone_params", "make_clutter", "make_gesture_scene",
    "make_preset_scene", "sample_scene", "synthesize_frame",
    "virtual_array_for",
]
