"""The five-branch gesture classifier.

Each of the five feature planes (x, y, z, v, intensity) of the 5x30x65
gesture tensor is routed through its own convolutional branch; the branch
outputs are concatenated along channels, fused by one convolution, and
flattened into class scores.  Branches never see any other plane, which is
what keeps interference in one feature from corrupting the rest.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..pointcloud import FEATURE_NAMES, N_FRAMES, N_SLOTS
from .layers import (BatchNorm2d, Conv2d, Flatten, Layer, Linear, MaxPool2d,
                     ReLU, ResidualBlock, Sequential)

BRANCH_MID_CHANNELS = 16
BRANCH_OUT_CHANNELS = 32


class BranchNet(Layer):
    """(B, 1, 30, 65) -> (B, 32, 4, 9).

    A 7x7 stride-2 convolution with batch norm and ReLU, 3x3 stride-2 max
    pooling, then one stride-2 residual block widening 16 -> 32 channels
    through a 1x1 projection shortcut.
    """

    def __init__(self, rng, mid=BRANCH_MID_CHANNELS, out=BRANCH_OUT_CHANNELS):
        self.stack = Sequential([
            ("conv1", Conv2d(1, mid, 7, stride=2, padding=3, rng=rng)),
            ("bn1", BatchNorm2d(mid)),
            ("relu", ReLU()),
            ("pool", MaxPool2d(3, stride=2, padding=1)),
            ("block", ResidualBlock(mid, out, stride=2, rng=rng)),
        ])

    def children(self):
        return [("stack", self.stack)]

    def forward(self, x):
        return self.stack.forward(x)

    def backward(self, gout):
        return self.stack.backward(gout)


class GestureNet(Layer):
    """Five independent branches, channel concatenation, combine layer, scores."""

    def __init__(self, n_classes: int = 4, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.n_classes = n_classes
        self.seed = seed
        self.branches = [BranchNet(rng) for _ in FEATURE_NAMES]
        cat = len(FEATURE_NAMES) * BRANCH_OUT_CHANNELS  # 160 channels
        self.combine = Sequential([
            ("conv", Conv2d(cat, cat, 3, stride=1, padding=1, rng=rng)),
            ("bn", BatchNorm2d(cat)),
            ("relu", ReLU()),
        ])
        self.flatten = Flatten()
        self.fc = Linear(cat * 4 * 9, n_classes, rng=rng)  # 5760 inputs

    def children(self):
        out = [(f"branch_{name}", b) for name, b in zip(FEATURE_NAMES, self.branches)]
        out += [("combine", self.combine), ("flatten", self.flatten), ("fc", self.fc)]
        return out

    def _check_input(self, x):
        if x.ndim != 4 or x.shape[1:] != (len(FEATURE_NAMES), N_FRAMES, N_SLOTS):
            raise ShapeError(
                f"expected (B, {len(FEATURE_NAMES)}, {N_FRAMES}, {N_SLOTS}), got {x.shape}")

    def branch_outputs(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-branch pre-concatenation activations (used to verify isolation)."""
        self._check_input(x)
        return [branch.forward(x[:, f:f + 1]) for f, branch in enumerate(self.branches)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        outs = self.branch_outputs(x)
        self._split = [o.shape[1] for o in outs]
        h = self.combine.forward(np.concatenate(outs, axis=1))
        return self.fc.forward(self.flatten.forward(h))

    def backward(self, gout: np.ndarray) -> np.ndarray:
        g = self.combine.backward(self.flatten.backward(self.fc.backward(gout)))
        dx = []
        start = 0
        for width, branch in zip(self._split, self.branches):
            dx.append(branch.backward(g[:, start:start + width]))
            start += width
        return np.concatenate(dx, axis=1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward(x), axis=1)

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.value for name, p in self.named_parameters()}
        state.update({name: buf for name, buf in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, param in self.named_parameters():
            if name not in state:
                raise ShapeError(f"checkpoint is missing parameter {name!r}")
            if state[name].shape != param.value.shape:
                raise ShapeError(f"{name}: checkpoint shape {state[name].shape} "
                                 f"!= model shape {param.value.shape}")
            param.value[...] = state[name]
        for name, buf in self.named_buffers():
            if name not in state:
                raise ShapeError(f"checkpoint is missing buffer {name!r}")
            buf[...] = state[name]
