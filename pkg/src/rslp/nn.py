"""Small layer kit with hand-written reverse-mode gradients and Adam.

Tensors are float64 numpy arrays in NCHW layout.  Every layer caches what its
``backward`` needs during ``forward``; calling ``backward`` first raises
StateError.  Weight parameters may carry a ``binary`` or ``ternary``
precision tag, in which case the forward pass uses the quantized weights and
the gradient reaches the latent full-precision values through the
straight-through estimator.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from rslp.errors import DimensionError, StateError
from rslp.quant import PRECISIONS, quantized_values, ste_backward

ROLES = ("weight", "bias", "bn_scale", "bn_shift", "prelu_slope", "scalar", "bn_mean", "bn_var")
SOFTPLUS_LINEAR = 30.0
STE_ACT_CLIP = 1.0


class LayerParam:
    """A named parameter array with its gradient, role and precision tag."""

    def __init__(self, name, values, role, precision="fp32", trainable=True):
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        if precision not in PRECISIONS:
            raise ValueError(f"unknown precision {precision!r}")
        if precision != "fp32" and role != "weight":
            raise ValueError("only weights can be quantized")
        self.name = name
        self.values = np.array(values, dtype=float)
        self.grad = np.zeros_like(self.values)
        self.role = role
        self.precision = precision
        self.trainable = trainable and role not in ("bn_mean", "bn_var")

    def effective(self):
        """Values used in the forward pass (quantized when tagged)."""
        return quantized_values(self.values, self.precision)

    def set_effective_grad(self, g):
        self.grad = ste_backward(g, self.values) if self.precision != "fp32" else g

    def __repr__(self):
        return f"LayerParam({self.name!r}, shape={self.values.shape}, {self.role}, {self.precision})"


# -- activations -----------------------------------------------------------------


def softplus(x):
    """``ln(1 + e^x)``, returned as ``x`` itself above 30."""
    x = np.asarray(x, dtype=float)
    return np.where(x > SOFTPLUS_LINEAR, x, np.log1p(np.exp(np.minimum(x, SOFTPLUS_LINEAR))))


def softplus_inverse(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > SOFTPLUS_LINEAR, y, np.log(np.expm1(np.minimum(y, SOFTPLUS_LINEAR))))


def softplus_grad(x):
    return expit(x)


def prelu(x, a):
    return np.where(x >= 0, x, a * x)


def sign(x):
    return np.where(x >= 0, 1.0, -1.0)


# -- convolution -------------------------------------------------------------------


def _windows(x, kh, kw, padding, dilation):
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    span_h = dilation * (kh - 1) + 1
    span_w = dilation * (kw - 1) + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (span_h, span_w), axis=(2, 3))
    return win[..., ::dilation, ::dilation]  # (B, C, Ho, Wo, kh, kw)


def conv2d_forward(x, w, b, padding=1, dilation=1):
    """Cross-correlation of ``x`` (B, C, H, W) with ``w`` (O, C, kh, kw) plus bias."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise DimensionError(f"incompatible conv shapes {x.shape} and {w.shape}")
    if b is not None and np.shape(b) != (w.shape[0],):
        raise DimensionError("bias length must equal the number of output channels")
    kh, kw = w.shape[2:]
    if x.shape[2] + 2 * padding < dilation * (kh - 1) + 1 or x.shape[3] + 2 * padding < dilation * (kw - 1) + 1:
        raise DimensionError("kernel larger than padded input")
    return _correlate(_windows(x, kh, kw, padding, dilation), w, b)


def _correlate(win, w, b):
    B, C, Ho, Wo, kh, kw = win.shape
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, C * kh * kw)
    out = (cols @ w.reshape(w.shape[0], -1).T).reshape(B, Ho, Wo, -1).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + np.asarray(b)[None, :, None, None]
    return np.ascontiguousarray(out)


class Layer:
    """Base class; subclasses implement ``_forward``/``_backward``."""

    def __init__(self):
        self._cache = None

    def params(self):
        return []

    def forward(self, x, train=False):
        out, self._cache = self._forward(x, train)
        return out

    def backward(self, dout):
        if self._cache is None:
            raise StateError(f"{type(self).__name__}.backward called before forward")
        return self._backward(dout, self._cache)

    __call__ = forward


def he_uniform(rng, shape, fan_in):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Conv2d(Layer):
    def __init__(self, in_ch, out_ch, kernel=3, padding=1, dilation=1, precision="fp32",
                 rng=None, name="conv"):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng()
        fan_in = in_ch * kernel * kernel
        self.weight = LayerParam(f"{name}.weight", he_uniform(rng, (out_ch, in_ch, kernel, kernel), fan_in),
                                 "weight", precision)
        self.bias = LayerParam(f"{name}.bias", np.zeros(out_ch), "bias")
        self.padding = padding
        self.dilation = dilation

    def params(self):
        return [self.weight, self.bias]

    def _forward(self, x, train):
        w = self.weight.effective()
        if x.ndim != 4 or x.shape[1] != w.shape[1]:
            raise DimensionError(f"incompatible conv shapes {x.shape} and {w.shape}")
        win = _windows(x, *w.shape[2:], self.padding, self.dilation)
        return _correlate(win, w, self.bias.values), (x.shape, win, w)

    def _backward(self, dout, cache):
        shape, win, w = cache
        self.weight.set_effective_grad(np.einsum("bohw,bchwpq->ocpq", dout, win, optimize=True))
        self.bias.grad = dout.sum(axis=(0, 2, 3))
        dwin = np.einsum("bohw,ocpq->bchwpq", dout, w, optimize=True)
        B, C, H, W = shape
        p, d = self.padding, self.dilation
        Ho, Wo = dout.shape[2:]
        dx = np.zeros((B, C, H + 2 * p, W + 2 * p))
        for i in range(w.shape[2]):
            for j in range(w.shape[3]):
                dx[:, :, i * d:i * d + Ho, j * d:j * d + Wo] += dwin[..., i, j]
        return dx[:, :, p:p + H, p:p + W]


class Linear(Layer):
    def __init__(self, n_in, n_out, precision="fp32", rng=None, name="fc"):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng()
        self.weight = LayerParam(f"{name}.weight", he_uniform(rng, (n_out, n_in), n_in), "weight", precision)
        self.bias = LayerParam(f"{name}.bias", np.zeros(n_out), "bias")

    def params(self):
        return [self.weight, self.bias]

    def _forward(self, x, train):
        if x.ndim != 2 or x.shape[1] != self.weight.values.shape[1]:
            raise DimensionError(f"expected (B, {self.weight.values.shape[1]}), got {x.shape}")
        w = self.weight.effective()
        return x @ w.T + self.bias.values, (x, w)

    def _backward(self, dout, cache):
        x, w = cache
        self.weight.set_effective_grad(dout.T @ x)
        self.bias.grad = dout.sum(axis=0)
        return dout @ w


class BatchNorm2d(Layer):
    """Per-channel batch normalization with running statistics.

    Running statistics follow ``r <- (1 - momentum) r + momentum * batch``,
    using the unbiased batch variance, and start at mean 0 / variance 1.
    """

    def __init__(self, channels, eps=1e-6, momentum=0.1, name="bn"):
        super().__init__()
        self.scale = LayerParam(f"{name}.scale", np.ones(channels), "bn_scale")
        self.shift = LayerParam(f"{name}.shift", np.zeros(channels), "bn_shift")
        self.running_mean = LayerParam(f"{name}.running_mean", np.zeros(channels), "bn_mean")
        self.running_var = LayerParam(f"{name}.running_var", np.ones(channels), "bn_var")
        self.eps = eps
        self.momentum = momentum

    def params(self):
        return [self.scale, self.shift, self.running_mean, self.running_var]

    def folded(self):
        """Inference affine ``(a, c)`` with ``bn(x) = a x + c`` per channel."""
        a = self.scale.values / np.sqrt(self.running_var.values + self.eps)
        return a, self.shift.values - a * self.running_mean.values

    def _forward(self, x, train):
        if x.ndim != 4 or x.shape[1] != self.scale.values.size:
            raise DimensionError(f"expected {self.scale.values.size} channels, got {x.shape}")
        c = (None, slice(None), None, None)
        if train:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            n = x.size // x.shape[1]
            unbiased = var * n / (n - 1) if n > 1 else var
            m = self.momentum
            self.running_mean.values = (1 - m) * self.running_mean.values + m * mean
            self.running_var.values = (1 - m) * self.running_var.values + m * unbiased
        else:
            mean = self.running_mean.values
            var = self.running_var.values
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[c]) * inv[c]
        return self.scale.values[c] * xhat + self.shift.values[c], (xhat, inv, train)

    def _backward(self, dout, cache):
        xhat, inv, train = cache
        c = (None, slice(None), None, None)
        self.scale.grad = np.sum(dout * xhat, axis=(0, 2, 3))
        self.shift.grad = dout.sum(axis=(0, 2, 3))
        dxhat = dout * self.scale.values[c]
        if not train:
            return dxhat * inv[c]
        mean_d = dxhat.mean(axis=(0, 2, 3))[c]
        mean_dx = (dxhat * xhat).mean(axis=(0, 2, 3))[c]
        return inv[c] * (dxhat - mean_d - xhat * mean_dx)


class PReLU(Layer):
    """Parametric ReLU with one shared slope."""

    def __init__(self, init=0.25, name="prelu"):
        super().__init__()
        self.slope = LayerParam(f"{name}.slope", np.array([init]), "prelu_slope")

    def params(self):
        return [self.slope]

    def _forward(self, x, train):
        return prelu(x, self.slope.values[0]), x

    def _backward(self, dout, x):
        neg = x < 0
        self.slope.grad = np.array([np.sum(dout * x * neg)])
        return np.where(neg, self.slope.values[0] * dout, dout)


class Sign(Layer):
    """Sign activation (+1 at zero) with a clipped straight-through gradient."""

    def _forward(self, x, train):
        return sign(x), x

    def _backward(self, dout, x):
        return np.where(np.abs(x) <= STE_ACT_CLIP, dout, 0.0)



class Softplus(Layer):
    def _forward(self, x, train):
        return softplus(x), x

    def _backward(self, dout, x):
        return dout * softplus_grad(x)


class AvgPool2d(Layer):
    """Average pooling without padding; kernel (1, 1) is the identity."""

    def __init__(self, kernel=(1, 1), stride=(1, 1)):
        super().__init__()
        self.kernel = tuple(kernel)
        self.stride = tuple(stride)

    def _forward(self, x, train):
        kh, kw = self.kernel
        sh, sw = self.stride
        win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
        return win.mean(axis=(-2, -1)), (x.shape, win.shape[2:4])

    def _backward(self, dout, cache):
        shape, (Ho, Wo) = cache
        kh, kw = self.kernel
        sh, sw = self.stride
        dx = np.zeros(shape)
        share = dout / (kh * kw)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i:i + sh * (Ho - 1) + 1:sh, j:j + sw * (Wo - 1) + 1:sw] += share
        return dx


class Flatten(Layer):
    def _forward(self, x, train):
        return x.reshape(x.shape[0], -1), x.shape

    def _backward(self, dout, shape):
        return dout.reshape(shape)


class Reshape(Layer):
    """Reshape the non-batch axes to ``shape``."""

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)

    def _forward(self, x, train):
        return x.reshape((x.shape[0],) + self.shape), x.shape

    def _backward(self, dout, shape):
        return dout.reshape(shape)


class Sequential(Layer):
    def __init__(self, layers):
        super().__init__()
        self.layers = list(layers)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train)
        self._cache = True
        return x

    def _backward(self, dout, cache):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout


# -- optimizer -----------------------------------------------------------------------


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


def adam_step(params, state):
    """One bias-corrected Adam update of every trainable parameter, in place."""
    params = [p for p in params if p.trainable]
    if not state.m:
        state.m = [np.zeros_like(p.values) for p in params]
        state.v = [np.zeros_like(p.values) for p in params]
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.values -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
