"""Small numpy conv-net core and the GAF convolutional autoencoder.

Tensors are float64 ``numpy`` arrays in channels-first layout: a single
image is ``(C, H, W)`` and a batch is ``(B, C, H, W)``.  Every layer uses a
3x3 kernel with stride 2.  Forward layers use "same" padding, so the output
side is ``ceil(n / 2)``; the padding is split symmetrically and the odd extra
cell goes on the bottom/right.  Transposed layers are the exact adjoint of a
forward layer mapping ``2n -> n`` and therefore double the spatial size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CheckpointFormatError, NonFiniteLoss, ShapeMismatch

KERNEL = 3
STRIDE = 2
LEAKY_SLOPE = 0.01
BOTTLENECK = 9
MAX_WIDTH = 128

ACTIVATIONS = ("leaky", "tanh", "identity")


def same_padding(size):
    """Return ``(before, after)`` zero padding for a stride-2 3x3 window."""
    out = -(-size // STRIDE)
    total = max((out - 1) * STRIDE + KERNEL - size, 0)
    return total // 2, total - total // 2


@dataclass
class ConvLayer:
    """One stride-2 3x3 convolution (or transposed convolution).

    ``kernels`` has shape ``(out_channels, in_channels, 3, 3)`` for both
    directions.
    """

    kernels: np.ndarray
    bias: np.ndarray
    transposed: bool = False
    activation: str = "leaky"

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.kernels.ndim != 4 or self.kernels.shape[2:] != (KERNEL, KERNEL):
            raise ShapeMismatch(f"kernels must be (out, in, 3, 3), got {self.kernels.shape}")
        if self.bias.shape != (self.kernels.shape[0],):
            raise ShapeMismatch("bias length must equal out_channels")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def out_channels(self):
        return self.kernels.shape[0]

    @property
    def in_channels(self):
        return self.kernels.shape[1]

    def output_size(self, size):
        return 2 * size if self.transposed else -(-size // STRIDE)


# ---------------------------------------------------------------------------
# raw linear maps (no bias, no activation), batched (B, C, H, W)


def _windows(xp):
    # (B, C, Hp, Wp) -> (B, C, Ho, Wo, 3, 3) strided view
    return sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))[:, :, ::STRIDE, ::STRIDE]


def _scatter_taps(taps, out_h, out_w):
    """Overlap-add ``taps`` (B, h, w, C, 3, 3) onto a stride-2 grid and crop."""
    b, h, w, c = taps.shape[:4]
    (pt, pb), (pl, pr) = same_padding(out_h), same_padding(out_w)
    buf = np.zeros((b, c, out_h + pt + pb, out_w + pl + pr))
    for di in range(KERNEL):
        for dj in range(KERNEL):
            buf[:, :, di:di + STRIDE * h - 1:STRIDE, dj:dj + STRIDE * w - 1:STRIDE] += (
                taps[:, :, :, :, di, dj].transpose(0, 3, 1, 2)
            )
    return buf[:, :, pt:pt + out_h, pl:pl + out_w]


def _pad_same(x):
    (pt, pb), (pl, pr) = same_padding(x.shape[2]), same_padding(x.shape[3])
    return np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))


def _conv(x, k):
    win = _windows(_pad_same(x))
    return np.tensordot(win, k, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)


def _conv_grads(x, k, g, need_dx=True):
    win = _windows(_pad_same(x))
    dk = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))
    if not need_dx:
        return None, dk
    taps = np.tensordot(g, k, axes=([1], [0]))  # (B, Ho, Wo, C, 3, 3)
    dx = _scatter_taps(taps, x.shape[2], x.shape[3])
    return dx, dk


def _tconv(x, k):
    taps = np.tensordot(x, k, axes=([1], [1]))  # (B, H, W, O, 3, 3)
    return _scatter_taps(taps, 2 * x.shape[2], 2 * x.shape[3])


def _tconv_grads(x, k, g, need_dx=True):
    win = _windows(_pad_same(g))  # (B, O, H, W, 3, 3)
    dx = None
    if need_dx:
        dx = np.tensordot(win, k, axes=([1, 4, 5], [0, 2, 3])).transpose(0, 3, 1, 2)
    dk = np.tensordot(win, x, axes=([0, 2, 3], [0, 2, 3])).transpose(0, 3, 1, 2)
    return dx, dk


def _activate(z, kind):
    if kind == "leaky":
        return np.maximum(z, LEAKY_SLOPE * z)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z, y, g, kind):
    if kind == "leaky":
        slope = (z > 0).astype(np.float64)
        slope *= 1.0 - LEAKY_SLOPE
        slope += LEAKY_SLOPE
        return g * slope
    if kind == "tanh":
        return g * (1.0 - y * y)
    return g


def _as_batch(layer, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4:
        raise ShapeMismatch(f"expected (C, H, W) or (B, C, H, W), got shape {x.shape}")
    if x.shape[1] != layer.in_channels:
        raise ShapeMismatch(f"layer expects {layer.in_channels} input channels, got {x.shape[1]}")
    if x.shape[2] < 1 or x.shape[3] < 1:
        raise ShapeMismatch("spatial dimensions must be >= 1")
    return x, single


def _forward(layer, x):
    lin = _tconv if layer.transposed else _conv
    z = lin(x, layer.kernels) + layer.bias[None, :, None, None]
    return z, _activate(z, layer.activation)


def _backward(layer, x, z, y, g, need_dx=True):
    gz = _activation_grad(z, y, g, layer.activation)
    grads = _tconv_grads if layer.transposed else _conv_grads
    dx, dk = grads(x, layer.kernels, gz, need_dx)
    return dx, dk, gz.sum(axis=(0, 2, 3))


def conv_forward(layer, x):
    """Apply ``layer`` (linear map + bias + activation) to ``x``."""
    x, single = _as_batch(layer, x)
    _, y = _forward(layer, x)
    return y[0] if single else y


def conv_backward(layer, x, grad_out):
    """Gradients of a scalar objective through one layer.

    ``grad_out`` is the gradient with respect to the layer's (post-activation)
    output.  Returns ``(grad_input, grad_kernels, grad_bias)``; weight and bias
    gradients are summed over the batch.
    """
    x, single = _as_batch(layer, x)
    g = np.asarray(grad_out, dtype=np.float64)
    if single:
        g = g[None]
    z, y = _forward(layer, x)
    if g.shape != y.shape:
        raise ShapeMismatch(f"upstream gradient shape {g.shape} != output shape {y.shape}")
    dx, dk, db = _backward(layer, x, z, y, g)
    return (dx[0] if single else dx), dk, db


# ---------------------------------------------------------------------------
# autoencoder


def _glorot(rng, out_ch, in_ch):
    fan_in = in_ch * KERNEL * KERNEL
    fan_out = out_ch * KERNEL * KERNEL
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(out_ch, in_ch, KERNEL, KERNEL))


def encoder_depth(input_size):
    """Number of stride-2 layers taking ``input_size`` exactly to 9x9.

    The decoder mirrors the encoder by doubling, so the chain must consist
    of exact halvings.
    """
    depth, size = 0, input_size
    while size > BOTTLENECK and size % 2 == 0:
        size //= 2
        depth += 1
    if size != BOTTLENECK:
        raise ShapeMismatch(f"input size {input_size} is not 9 * 2**d")
    return depth


def default_channels(depth):
    """Doubling ramp from 16, capped at 128, with the last layer fixed at 128."""
    ramp = [min(16 * 2**i, MAX_WIDTH) for i in range(depth - 1)]
    return ramp + [MAX_WIDTH]


@dataclass
class AutoencoderModel:
    """Stride-2 conv encoder plus a mirrored transposed-conv decoder."""

    encoder: list
    decoder: list
    input_size: int

    @classmethod
    def build(cls, input_size, seed=0, channels=None):
        """Initialise a model for square ``input_size`` GAF images.

        With ``channels`` omitted the depth is derived from ``input_size`` so
        that the encoder ends at 9x9x128 (288 -> 5 layers, 72 -> 3 layers).
        Passing ``channels`` builds a custom-width encoder, mainly for small
        diagnostic models; ``input_size`` must then be divisible by
        ``2**len(channels)``.
        """
        if channels is None:
            channels = default_channels(encoder_depth(input_size))
        channels = list(channels)
        if input_size % (2 ** len(channels)):
            raise ShapeMismatch("decoder cannot invert the encoder for this input size")
        rng = np.random.default_rng(seed)
        widths = [1] + channels
        encoder = []
        for cin, cout in zip(widths[:-1], widths[1:]):
            encoder.append(ConvLayer(_glorot(rng, cout, cin), np.zeros(cout)))
        decoder = []
        rev = widths[::-1]
        for i, (cin, cout) in enumerate(zip(rev[:-1], rev[1:])):
            act = "tanh" if i == len(rev) - 2 else "leaky"
            decoder.append(ConvLayer(_glorot(rng, cout, cin), np.zeros(cout), True, act))
        return cls(encoder, decoder, input_size)

    @property
    def layers(self):
        return self.encoder + self.decoder

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None, None]
        elif x.ndim == 3:
            x = x[:, None]
        n = self.input_size
        if x.ndim != 4 or x.shape[1:] != (1, n, n):
            raise ShapeMismatch(f"model expects {n}x{n} single-channel inputs, got {x.shape}")
        return x

    def encode(self, x):
        """Encoder output ``(B, 128, 9, 9)`` for a batch of ``n x n`` images."""
        h = self._check(x)
        for layer in self.encoder:
            h = _forward(layer, h)[1]
        return h

    def reconstruct(self, x):
        h = self.encode(x)
        for layer in self.decoder:
            h = _forward(layer, h)[1]
        return h

    def params(self):
        out = []
        for layer in self.layers:
            out.extend([layer.kernels, layer.bias])
        return out

    def loss_and_grads(self, x):
        """Summed squared reconstruction error of a batch and its gradients."""
        x = self._check(x)
        caches = []
        h = x
        for layer in self.layers:
            z, y = _forward(layer, h)
            caches.append((h, z, y))
            h = y
        diff = h - x
        loss = float(np.sum(diff * diff))
        g = 2.0 * diff
        grads = [None] * (2 * len(self.layers))
        for idx in range(len(self.layers) - 1, -1, -1):
            inp, z, y = caches[idx]
            g, dk, db = _backward(self.layers[idx], inp, z, y, g, need_dx=idx > 0)
            grads[2 * idx], grads[2 * idx + 1] = dk, db
        return loss, grads


def reconstruction_loss(model, batch):
    """Sum over the batch of squared reconstruction errors."""
    if len(batch) == 0:
        return 0.0
    x = model._check(np.stack([np.asarray(b, dtype=np.float64) for b in batch]))
    diff = model.reconstruct(x) - x
    return float(np.sum(diff * diff))


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 4
    learning_rate: float = 1e-5
    momentum: float = 0.9
    seed: int = 0


@dataclass
class TrainResult:
    model: AutoencoderModel
    losses: list = field(default_factory=list)


def train(model, dataset, config=None, progress=None):
    """Mini-batch momentum SGD on the summed reconstruction error.

    The model is updated in place and also returned.  ``losses[e]`` is the sum
    of the batch losses seen during epoch ``e``.  Shuffling is driven by
    ``config.seed`` only, so identical inputs give bit-identical traces.
    """
    config = config or TrainConfig()
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    data = model._check(np.stack([np.asarray(d, dtype=np.float64) for d in dataset]))
    rng = np.random.default_rng(config.seed)
    params = model.params()
    velocity = [np.zeros_like(p) for p in params]
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        total = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, len(order), config.batch_size):
                batch = data[order[start:start + config.batch_size]]
                loss, grads = model.loss_and_grads(batch)
                if not np.isfinite(loss):
                    raise NonFiniteLoss(epoch)
                total += loss
                for p, v, g in zip(params, velocity, grads):
                    v *= config.momentum
                    v += g
                    p -= config.learning_rate * v
        if not np.isfinite(total) or not all(np.isfinite(p).all() for p in params):
            raise NonFiniteLoss(epoch)
        losses.append(total)
        if progress is not None:
            progress(epoch, total)
    return TrainResult(model, losses)


def extract_features(model, gaf):
    """Channel-mean of the encoder output, flattened row-major.

    Accepts one ``n x n`` matrix (returns a length-81 vector for the 9x9
    bottleneck) or a stack ``(B, n, n)`` (returns ``(B, 81)``).
    """
    gaf = np.asarray(gaf, dtype=np.float64)
    single = gaf.ndim == 2
    enc = model.encode(gaf)
    feats = pool_channels(enc)
    return feats[0] if single else feats


def pool_channels(encoded):
    """Average ``(B, C, h, w)`` over channels and flatten to ``(B, h*w)``."""
    encoded = np.asarray(encoded, dtype=np.float64)
    return encoded.mean(axis=1).reshape(encoded.shape[0], -1)


def extract_features_batched(model, gafs, batch_size=32):
    out = []
    for start in range(0, len(gafs), batch_size):
        out.append(extract_features(model, np.asarray(gafs[start:start + batch_size])))
    return np.concatenate(out) if out else np.zeros((0, BOTTLENECK * BOTTLENECK))


# ---------------------------------------------------------------------------
# checkpoint file: "NPAE", u32 version, u32 input_size, u32 layer_count, then
# per layer u32 in_ch, u32 out_ch, u8 direction, f64 kernels, f64 biases.

MAGIC = b"NPAE"
VERSION = 1


def save_checkpoint(model, path):
    layers = model.layers
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, model.input_size, len(layers)))
        for layer in layers:
            fh.write(struct.pack("<IIB", layer.in_channels, layer.out_channels, int(layer.transposed)))
            fh.write(layer.kernels.astype("<f8").tobytes())
            fh.write(layer.bias.astype("<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic")
    try:
        version, input_size, count = struct.unpack_from("<III", blob, 4)
        if version != VERSION:
            raise CheckpointFormatError(f"{path}: unsupported version {version}")
        pos = 16
        raw = []
        for _ in range(count):
            cin, cout, direction = struct.unpack_from("<IIB", blob, pos)
            pos += 9
            nk = cout * cin * KERNEL * KERNEL
            k = np.frombuffer(blob, "<f8", nk, pos).reshape(cout, cin, KERNEL, KERNEL)
            pos += 8 * nk
            b = np.frombuffer(blob, "<f8", cout, pos)
            pos += 8 * cout
            raw.append((k.astype(np.float64), b.astype(np.float64), bool(direction)))
    except struct.error as exc:
        raise CheckpointFormatError(f"{path}: truncated") from exc
    if pos != len(blob):
        raise CheckpointFormatError(f"{path}: trailing bytes")
    encoder = [ConvLayer(k, b, False, "leaky") for k, b, t in raw if not t]
    tr = [(k, b) for k, b, t in raw if t]
    decoder = [
        ConvLayer(k, b, True, "tanh" if i == len(tr) - 1 else "leaky") for i, (k, b) in enumerate(tr)
    ]
    return AutoencoderModel(encoder, decoder, input_size)
