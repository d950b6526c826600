"""Differentiable layers with explicit forward/backward passes (numpy only).

Every layer caches what its backward pass needs, checks output finiteness,
and exposes (name, Parameter) pairs for the optimizer and checkpointing.
Convolutions and pooling loop over the kernel taps with strided slices,
so the heavy lifting is plain GEMMs and elementwise ops.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericsError, ShapeError


def check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericsError(f"non-finite values in {name}")
    return arr


class Parameter:
    """A trainable array with a same-shape gradient accumulator."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape


class Layer:
    training = True

    def children(self):
        return []

    def own_parameters(self):
        return []

    def own_buffers(self):
        return []

    def named_parameters(self, prefix: str = ""):
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.")
        for name, param in self.own_parameters():
            yield prefix + name, param

    def named_buffers(self, prefix: str = ""):
        for name, child in self.children():
            yield from child.named_buffers(f"{prefix}{name}.")
        for name, buf in self.own_buffers():
            yield prefix + name, buf

    def set_training(self, flag: bool):
        self.training = flag
        for _, child in self.children():
            child.set_training(flag)

    def zero_grad(self):
        for _, param in self.named_parameters():
            param.grad[...] = 0.0


def _out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int,
            oh: int, ow: int) -> np.ndarray:
    b, c = xp.shape[:2]
    cols = np.empty((b, c, kh, kw, oh, ow), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw]
    return cols


def _col2im(dcols: np.ndarray, xp_shape, kh, kw, sh, sw, oh, ow) -> np.ndarray:
    dxp = np.zeros(xp_shape, dtype=dcols.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw] += dcols[:, :, i, j]
    return dxp


class Conv2d(Layer):
    def __init__(self, in_channels, out_channels, kernel, stride=1, padding=0,
                 bias=False, rng=None):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = (kernel, kernel) if np.isscalar(kernel) else tuple(kernel)
        self.stride = (stride, stride) if np.isscalar(stride) else tuple(stride)
        self.padding = (padding, padding) if np.isscalar(padding) else tuple(padding)
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * self.kernel[0] * self.kernel[1]
        bound = np.sqrt(6.0 / fan_in)  # Kaiming uniform, ReLU gain
        self.weight = Parameter(rng.uniform(-bound, bound,
                                            (out_channels, in_channels, *self.kernel)))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None
        self._cache = None

    def own_parameters(self):
        out = [("weight", self.weight)]
        if self.bias is not None:
            out.append(("bias", self.bias))
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(f"conv expected (B, {self.in_channels}, H, W), got {x.shape}")
        b, _, h, w = x.shape
        (kh, kw), (sh, sw), (ph, pw) = self.kernel, self.stride, self.padding
        oh, ow = _out_size(h, kh, sh, ph), _out_size(w, kw, sw, pw)
        if oh < 1 or ow < 1:
            raise ShapeError(f"conv output would be empty for input {x.shape}")
        xp = np.zeros((b, self.in_channels, h + 2 * ph, w + 2 * pw), dtype=x.dtype)
        xp[:, :, ph:ph + h, pw:pw + w] = x
        cols = _im2col(xp, kh, kw, sh, sw, oh, ow)
        cols2 = cols.reshape(b, self.in_channels * kh * kw, oh * ow)
        out = self.weight.value.reshape(self.out_channels, -1) @ cols2
        if self.bias is not None:
            out = out + self.bias.value[:, None]
        self._cache = (cols2, xp.shape, (b, h, w, oh, ow))
        return check_finite("conv2d output", out.reshape(b, self.out_channels, oh, ow))

    def backward(self, gout: np.ndarray) -> np.ndarray:
        cols2, xp_shape, (b, h, w, oh, ow) = self._cache
        (kh, kw), (sh, sw), (ph, pw) = self.kernel, self.stride, self.padding
        ck = self.in_channels * kh * kw
        g = gout.reshape(b, self.out_channels, oh * ow)
        g_flat = g.transpose(1, 0, 2).reshape(self.out_channels, -1)
        cols_flat = cols2.transpose(0, 2, 1).reshape(-1, ck)
        self.weight.grad += (g_flat @ cols_flat).reshape(self.weight.shape)
        if self.bias is not None:
            self.bias.grad += g.sum(axis=(0, 2))
        dcols = self.weight.value.reshape(self.out_channels, -1).T @ g
        dxp = _col2im(dcols.reshape(b, self.in_channels, kh, kw, oh, ow),
                      xp_shape, kh, kw, sh, sw, oh, ow)
        return dxp[:, :, ph:ph + h, pw:pw + w]


class BatchNorm2d(Layer):
    """Per-channel normalization; tracks running stats for inference mode."""

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self._cache = None

    def own_parameters(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def own_buffers(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeError(f"batchnorm expected (B, {self.channels}, H, W), got {x.shape}")
        if self.training:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (var - self.running_var)
        else:
            mean, var = self.running_mean, self.running_var
        invstd = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[:, None, None]) * invstd[:, None, None]
        self._cache = (xhat, invstd)
        out = self.gamma.value[:, None, None] * xhat + self.beta.value[:, None, None]
        return check_finite("batchnorm output", out)

    def backward(self, gout: np.ndarray) -> np.ndarray:
        xhat, invstd = self._cache
        dgamma = (gout * xhat).sum(axis=(0, 2, 3))
        dbeta = gout.sum(axis=(0, 2, 3))
        self.gamma.grad += dgamma
        self.beta.grad += dbeta
        scale = (self.gamma.value * invstd)[:, None, None]
        if not self.training:
            return gout * scale
        n = gout.shape[0] * gout.shape[2] * gout.shape[3]
        return (scale / n) * (n * gout
                              - dbeta[:, None, None]
                              - xhat * dgamma[:, None, None])


class ReLU(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return x * self._mask

    def backward(self, gout: np.ndarray) -> np.ndarray:
        return gout * self._mask


class MaxPool2d(Layer):
    def __init__(self, kernel=3, stride=2, padding=1):
        self.kernel = (kernel, kernel) if np.isscalar(kernel) else tuple(kernel)
        self.stride = (stride, stride) if np.isscalar(stride) else tuple(stride)
        self.padding = (padding, padding) if np.isscalar(padding) else tuple(padding)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4:
            raise ShapeError(f"maxpool expected a 4-D input, got {x.shape}")
        b, c, h, w = x.shape
        (kh, kw), (sh, sw), (ph, pw) = self.kernel, self.stride, self.padding
        oh, ow = _out_size(h, kh, sh, ph), _out_size(w, kw, sw, pw)
        if oh < 1 or ow < 1:
            raise ShapeError(f"maxpool output would be empty for input {x.shape}")
        xp = np.full((b, c, h + 2 * ph, w + 2 * pw), -np.inf, dtype=x.dtype)
        xp[:, :, ph:ph + h, pw:pw + w] = x
        taps = _im2col(xp, kh, kw, sh, sw, oh, ow).reshape(b, c, kh * kw, oh, ow)
        self._argmax = taps.argmax(axis=2)
        self._geometry = (x.shape, xp.shape, oh, ow)
        return check_finite("maxpool output", np.take_along_axis(
            taps, self._argmax[:, :, None], axis=2)[:, :, 0])

    def backward(self, gout: np.ndarray) -> np.ndarray:
        x_shape, xp_shape, oh, ow = self._geometry
        (kh, kw), (sh, sw), (ph, pw) = self.kernel, self.stride, self.padding
        dtaps = np.zeros((gout.shape[0], gout.shape[1], kh * kw, oh, ow))
        np.put_along_axis(dtaps, self._argmax[:, :, None], gout[:, :, None], axis=2)
        dxp = _col2im(dtaps.reshape(gout.shape[0], gout.shape[1], kh, kw, oh, ow),
                      xp_shape, kh, kw, sh, sw, oh, ow)
        return dxp[:, :, ph:ph + x_shape[2], pw:pw + x_shape[3]]


class Flatten(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gout: np.ndarray) -> np.ndarray:
        return gout.reshape(self._shape)


class Linear(Layer):
    def __init__(self, in_features, out_features, rng=None):
        rng = rng or np.random.default_rng(0)
        bound = 1.0 / np.sqrt(in_features)
        self.in_features = in_features
        self.weight = Parameter(rng.uniform(-bound, bound, (out_features, in_features)))
        self.bias = Parameter(np.zeros(out_features))

    def own_parameters(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"linear expected (B, {self.in_features}), got {x.shape}")
        self._x = x
        return check_finite("linear output", x @ self.weight.value.T + self.bias.value)

    def backward(self, gout: np.ndarray) -> np.ndarray:
        self.weight.grad += gout.T @ self._x
        self.bias.grad += gout.sum(axis=0)
        return gout @ self.weight.value


class Sequential(Layer):
    def __init__(self, named_layers):
        self._layers = list(named_layers)

    def children(self):
        return list(self._layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for _, layer in self._layers:
            x = layer.forward(x)
        return x

    def backward(self, gout: np.ndarray) -> np.ndarray:
        for _, layer in reversed(self._layers):
            gout = layer.backward(gout)
        return gout


class ResidualBlock(Layer):
    """Two 3x3 convolutions with a shortcut; 1x1 projection when shapes change."""

    def __init__(self, in_channels, out_channels, stride=1, rng=None):
        self.conv1 = Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, rng=rng)
        self.bn1 = BatchNorm2d(out_channels)
        self.relu1 = ReLU()
        self.conv2 = Conv2d(out_channels, out_channels, 3, stride=1, padding=1, rng=rng)
        self.bn2 = BatchNorm2d(out_channels)
        self.relu_out = ReLU()
        if stride != 1 or in_channels != out_channels:
            self.shortcut = Sequential([
                ("conv", Conv2d(in_channels, out_channels, 1, stride=stride, rng=rng)),
                ("bn", BatchNorm2d(out_channels)),
            ])
        else:
            self.shortcut = None

    def children(self):
        out = [("conv1", self.conv1), ("bn1", self.bn1), ("relu1", self.relu1),
               ("conv2", self.conv2), ("bn2", self.bn2), ("relu_out", self.relu_out)]
        if self.shortcut is not None:
            out.append(("shortcut", self.shortcut))
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self.relu1.forward(self.bn1.forward(self.conv1.forward(x)))
        h = self.bn2.forward(self.conv2.forward(h))
        s = self.shortcut.forward(x) if self.shortcut is not None else x
        return self.relu_out.forward(h + s)

    def backward(self, gout: np.ndarray) -> np.ndarray:
        g = self.relu_out.backward(gout)
        dmain = self.conv1.backward(self.bn1.backward(self.relu1.backward(
            self.conv2.backward(self.bn2.backward(g)))))
        dshort = self.shortcut.backward(g) if self.shortcut is not None else g
        return dmain + dshort


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross entropy and its logit gradient.

    Returns (loss, dlogits, probs); probs are the softmax outputs.
    """
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"got logits {logits.shape} with labels {labels.shape}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    nll = -shifted[np.arange(n), labels] + np.log(exp.sum(axis=1))
    loss = float(nll.mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, dlogits, probs
