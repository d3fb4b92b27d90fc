"""Layers with explicit forward/backward passes and the three benchmark models.

Every model is a plain sequence of layers topped by a fused softmax
cross-entropy head. Parameters live in one flat float64 buffer owned by the
model; each layer's weight tensors are contiguous reshaped views into it, so
swapping the whole parameter vector (which the probe-based optimizer does
three times per batch step) is a single copy. Gradients mirror that layout in
a second flat buffer.

Flat ordering is fixed: layers in forward order, then each layer's tensors in
declaration order (weights before bias), each raveled row-major.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import NonFiniteError, rng_uniform

__all__ = [
    "Layer",
    "Dense",
    "Relu",
    "Conv2d",
    "MaxPool2",
    "Flatten",
    "SpatialZeroPad",
    "Model",
    "softmax_cross_entropy",
    "forward_loss",
    "backward",
    "build_logreg",
    "build_mlp",
    "build_lenet5",
    "flatten_params",
    "unflatten_params",
    "init_params",
    "make_loss_probe",
]


class Layer:
    """One stage of a model. Subclasses set param_shapes and fan in/out."""

    param_shapes = ()
    params: list
    grads: list

    def attach(self, params, grads):
        """Receive parameter/gradient views carved from the model's flat buffers."""
        self.params = params
        self.grads = grads

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def fans(self):
        """(fan_in, fan_out) of the weight tensor, or None for parameterless layers."""
        return None


class Dense(Layer):
    """Fully connected layer: x @ W + b with W of shape (in, out)."""

    def __init__(self, in_dim, out_dim):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.param_shapes = ((in_dim, out_dim), (out_dim,))
        self._x = None

    def fans(self):
        return self.in_dim, self.out_dim

    def forward(self, x):
        self._x = x
        W, b = self.params
        return x @ W + b

    def backward(self, dout):
        W, _ = self.params
        gW, gb = self.grads
        gW[:] = self._x.T @ dout
        gb[:] = dout.sum(axis=0)
        return dout @ W.T


class Relu(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout):
        return np.where(self._mask, dout, 0.0)


class Conv2d(Layer):
    """Valid (unpadded) 2-D convolution, stride 1, square kernel.

    Forward lowers each input window to a row (im2col) and runs one matrix
    product against the reshaped filter bank.
    """

    def __init__(self, in_channels, out_channels, kernel=5):
        self.cin = in_channels
        self.cout = out_channels
        self.k = kernel
        self.param_shapes = ((out_channels, in_channels, kernel, kernel), (out_channels,))
        self._cols = None
        self._xshape = None

    def fans(self):
        return self.cin * self.k * self.k, self.cout * self.k * self.k

    def forward(self, x):
        n, cin, h, w = x.shape
        if cin != self.cin:
            raise ValueError(f"expected {self.cin} input channels, got {cin}")
        k = self.k
        oh, ow = h - k + 1, w - k + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"input {h}x{w} smaller than kernel {k}x{k}")
        windows = sliding_window_view(x, (k, k), axis=(2, 3))  # (n, cin, oh, ow, k, k)
        cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5))
        cols = cols.reshape(n * oh * ow, cin * k * k)
        W, b = self.params
        out = cols @ W.reshape(self.cout, -1).T + b
        self._cols = cols
        self._xshape = x.shape
        return out.reshape(n, oh, ow, self.cout).transpose(0, 3, 1, 2)

    def backward(self, dout):
        n, cin, h, w = self._xshape
        k = self.k
        _, cout, oh, ow = dout.shape
        W, _ = self.params
        gW, gb = self.grads
        dmat = dout.transpose(0, 2, 3, 1).reshape(n * oh * ow, cout)
        gW[:] = (dmat.T @ self._cols).reshape(gW.shape)
        gb[:] = dmat.sum(axis=0)
        dcols = dmat @ W.reshape(cout, -1)
        dcols = dcols.reshape(n, oh, ow, cin, k, k).transpose(0, 3, 1, 2, 4, 5)
        dx = np.zeros(self._xshape, dtype=np.float64)
        for i in range(k):
            for j in range(k):
                dx[:, :, i : i + oh, j : j + ow] += dcols[:, :, :, :, i, j]
        return dx


class MaxPool2(Layer):
    """2x2 max pooling with stride 2. Ties break toward the first element."""

    def __init__(self):
        self._idx = None
        self._xshape = None

    def forward(self, x):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"pooling needs even spatial extents, got {h}x{w}")
        oh, ow = h // 2, w // 2
        tiles = x.reshape(n, c, oh, 2, ow, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, 4)
        idx = tiles.argmax(axis=4)
        self._idx = idx
        self._xshape = x.shape
        return np.take_along_axis(tiles, idx[..., None], axis=4)[..., 0]

    def backward(self, dout):
        n, c, h, w = self._xshape
        oh, ow = h // 2, w // 2
        d = np.zeros((n, c, oh, ow, 4), dtype=np.float64)
        np.put_along_axis(d, self._idx[..., None], dout[..., None], axis=4)
        return d.reshape(n, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)


class Flatten(Layer):
    def __init__(self):
        self._xshape = None

    def forward(self, x):
        self._xshape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._xshape)


class SpatialZeroPad(Layer):
    """Zero-pads the two trailing spatial axes by `pad` on each side."""

    def __init__(self, pad):
        self.pad = pad

    def forward(self, x):
        p = self.pad
        return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))

    def backward(self, dout):
        p = self.pad
        return dout[:, :, p:-p, p:-p].copy()


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer labels under softmax(logits).

    Fused in log space (log-sum-exp with max subtraction). Returns the loss
    and its gradient with respect to the logits, (softmax - onehot)/n.
    """
    n = logits.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):  # callers surface non-finite losses
        z = logits - logits.max(axis=1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=1))
        rows = np.arange(n)
        loss = float(np.mean(lse - z[rows, labels]))
        dlogits = np.exp(z - lse[:, None])
        dlogits[rows, labels] -= 1.0
        dlogits /= n
    return loss, dlogits


class Model:
    """An ordered layer stack plus the softmax cross-entropy head.

    `input_shape` is the per-sample shape the forward pass expects; batches
    arriving flat are reshaped to it. A model instance is confined to one
    training thread and forward/backward are not reentrant.
    """

    def __init__(self, layers, input_shape, classes):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.classes = classes
        sizes = []
        for layer in self.layers:
            sizes.extend(int(np.prod(s)) for s in layer.param_shapes)
        self.param_count = sum(sizes)
        self._params_flat = np.zeros(self.param_count, dtype=np.float64)
        self._grads_flat = np.zeros(self.param_count, dtype=np.float64)
        offset = 0
        for layer in self.layers:
            pviews, gviews = [], []
            for shape in layer.param_shapes:
                size = int(np.prod(shape))
                pviews.append(self._params_flat[offset : offset + size].reshape(shape))
                gviews.append(self._grads_flat[offset : offset + size].reshape(shape))
                offset += size
            layer.attach(pviews, gviews)

    def set_params(self, vec):
        if vec.shape != (self.param_count,):
            raise ValueError(f"expected {self.param_count} parameters, got {vec.shape}")
        self._params_flat[:] = vec

    def get_params(self):
        return self._params_flat.copy()

    def forward(self, x):
        """Logits for a batch shaped (n, *input_shape)."""
        for layer in self.layers:
            x = layer.forward(x)
        return x


def _batch_input(model, batch):
    n = len(batch.labels)
    if n == 0:
        raise ValueError("batch is empty")
    return np.asarray(batch.inputs, dtype=np.float64).reshape((n, *model.input_shape))


def forward_loss(model, batch, params):
    """Mean batch NLL at the given parameter vector.

    The model's buffer is scratch space: it is left holding exactly `params`,
    so the call is pure with respect to the vector the caller owns.
    """
    model.set_params(params)
    logits = model.forward(_batch_input(model, batch))
    loss, _ = softmax_cross_entropy(logits, batch.labels)
    if not np.isfinite(loss):
        raise NonFiniteError("forward pass produced a non-finite loss")
    return loss


def backward(model, batch, params):
    """Batch loss and the exact analytic gradient of forward_loss at params."""
    model.set_params(params)
    logits = model.forward(_batch_input(model, batch))
    loss, d = softmax_cross_entropy(logits, batch.labels)
    if not np.isfinite(loss):
        raise NonFiniteError("forward pass produced a non-finite loss")
    for layer in reversed(model.layers):
        d = layer.backward(d)
    grad = model._grads_flat.copy()
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("backward pass produced a non-finite gradient")
    return loss, grad


def flatten_params(model):
    """Copy of all model parameters as one flat vector (documented fixed order)."""
    return model.get_params()


def unflatten_params(model, vec):
    """Write a flat vector back into the model's layer tensors (lossless inverse)."""
    model.set_params(np.asarray(vec, dtype=np.float64))


def init_params(model, rng, scheme="default"):
    """Seeded initialization.

    "default": each weight tensor uniform on [-r, r] with
    r = sqrt(6 / (fan_in + fan_out)); biases zero. "zeros": everything zero
    (kept because it is the degenerate-but-documented reproduction mode).
    Draws happen in layer order, so a given rng state fixes the result.
    """
    if scheme not in ("default", "zeros"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    model._params_flat[:] = 0.0
    if scheme == "zeros":
        return
    for layer in model.layers:
        fans = layer.fans()
        if fans is None:
            continue
        fan_in, fan_out = fans
        r = np.sqrt(6.0 / (fan_in + fan_out))
        W = layer.params[0]
        W[:] = rng_uniform(rng, W.shape, -r, r)


def build_logreg(input_dim=784, classes=10):
    """Multinomial logistic regression: one dense layer into the loss head."""
    return Model([Dense(input_dim, classes)], (input_dim,), classes)


def build_mlp(input_dim=784, hidden=1000, classes=10):
    """Two ReLU hidden layers of equal width."""
    layers = [
        Dense(input_dim, hidden),
        Relu(),
        Dense(hidden, hidden),
        Relu(),
        Dense(hidden, classes),
    ]
    return Model(layers, (input_dim,), classes)


def build_lenet5(input_shape=(1, 28, 28), classes=10, conv_channels=(6, 16), fc_dims=(120, 84)):
    """Classic LeNet-5 topology with ReLU activations and 2x2 max pooling.

    conv(5x5) -> pool -> conv(5x5) -> pool -> flatten -> three dense layers.
    28x28 inputs are zero-padded to 32x32 so the standard extents line up;
    conv_channels/fc_dims can be shrunk to make exhaustive gradient checks
    affordable.
    """
    cin, h, w = input_shape
    layers = []
    if (h, w) == (28, 28):
        layers.append(SpatialZeroPad(2))
        h = w = 32
    c1, c2 = conv_channels
    f1, f2 = fc_dims
    side = h
    for _ in range(2):  # two conv->pool stages, kernel 5, pool 2
        side = side - 4
        if side < 2 or side % 2:
            raise ValueError(f"input shape {input_shape} does not fit the topology")
        side //= 2
    layers += [
        Conv2d(cin, c1, 5),
        Relu(),
        MaxPool2(),
        Conv2d(c1, c2, 5),
        Relu(),
        MaxPool2(),
        Flatten(),
        Dense(c2 * side * side, f1),
        Relu(),
        Dense(f1, f2),
        Relu(),
        Dense(f2, classes),
    ]
    return Model(layers, input_shape, classes)


def make_loss_probe(model, batch, params, grad, loss0, on_eval=None):
    """Probe(s) = mean batch loss at params - s*grad, without touching `params`.

    probe(0.0) returns the already-known batch loss instead of re-running the
    forward pass, so a full coefficient estimate costs exactly two extra
    forward passes. `on_eval` (if given) is called once per actual forward
    pass, which is how the runner audits that cost.
    """

    def probe(s):
        s = float(s)
        if s == 0.0:
            return loss0
        if on_eval is not None:
            on_eval()
        return forward_loss(model, batch, params - s * grad)

    return probe
