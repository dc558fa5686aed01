"""A small reverse-mode automatic differentiation engine on numpy arrays.

Each :class:`Tensor` produced by an operation remembers its parents and a
closure that pushes its gradient back to them. :func:`backward` walks the
recorded graph in reverse topological order. Recurrent and convolutional
layers are single fused nodes with hand-derived backward passes, which keeps
the graph short enough for pure-Python training.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import TrainingDivergedError
from ..metrics import smape_gradient, smape_terms


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=None):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.data.shape})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=float, copy=True)
        else:
            self.grad += g

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    parents = tuple(p for p in parents if p.requires_grad or p._parents)
    if not parents:
        return Tensor(data)
    return Tensor(data, parents=parents, backward=backward)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _tracked(t: Tensor) -> bool:
    return t.requires_grad or bool(t._parents)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if _tracked(a):
            a._accumulate(_unbroadcast(g, a.shape))
        if _tracked(b):
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: a._accumulate(-g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if _tracked(a):
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if _tracked(b):
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if _tracked(a):
            a._accumulate(g @ np.swapaxes(b.data, -1, -2))
        if _tracked(b):
            gb = np.swapaxes(a.data, -1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.shape))

    return _make(a.data @ b.data, (a, b), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _make(out, (a,), lambda g: a._accumulate(g * out * (1.0 - out)))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: a._accumulate(g * (1.0 - out * out)))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: a._accumulate(g * mask))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: a._accumulate(g.reshape(a.shape)))


def getitem(a, index) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] += g
        a._accumulate(full)

    return _make(a.data[index], (a,), backward)


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.array(a.data.sum()), (a,), lambda g: a._accumulate(np.full(a.shape, g)))


def mean_all(a) -> Tensor:
    a = as_tensor(a)
    n = a.data.size
    return _make(np.array(a.data.mean()), (a,), lambda g: a._accumulate(np.full(a.shape, g / n)))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def gru_layer(x, w_ih, w_hh, b_ih, b_hh) -> Tensor:
    """Run a GRU over ``x`` of shape (batch, time, input); return all hidden states.

    Gate layout in the weight columns is (reset, update, candidate):

        r = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
        z = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
        n = tanh(x W_in + b_in + r * (h W_hn + b_hn))
        h' = (1 - z) * n + z * h
    """
    x, w_ih, w_hh, b_ih, b_hh = (as_tensor(t) for t in (x, w_ih, w_hh, b_ih, b_hh))
    B, T, _ = x.shape
    H = w_hh.shape[0]
    gi = x.data @ w_ih.data + b_ih.data
    hs = np.zeros((B, T + 1, H))
    rs = np.empty((B, T, H))
    zs = np.empty((B, T, H))
    ns = np.empty((B, T, H))
    ghn = np.empty((B, T, H))
    Whh, bhh = w_hh.data, b_hh.data
    for t in range(T):
        h = hs[:, t]
        gh = h @ Whh + bhh
        g = gi[:, t]
        r = _sigmoid(g[:, :H] + gh[:, :H])
        z = _sigmoid(g[:, H:2 * H] + gh[:, H:2 * H])
        n = np.tanh(g[:, 2 * H:] + r * gh[:, 2 * H:])
        hs[:, t + 1] = (1.0 - z) * n + z * h
        rs[:, t], zs[:, t], ns[:, t], ghn[:, t] = r, z, n, gh[:, 2 * H:]

    def backward(grad_out):
        dgi = np.empty((B, T, 3 * H))
        dW_hh = np.zeros_like(Whh)
        db_hh = np.zeros_like(bhh)
        dh_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            dh = grad_out[:, t] + dh_next
            h_prev = hs[:, t]
            r, z, n = rs[:, t], zs[:, t], ns[:, t]
            dn = dh * (1.0 - z)
            dz = dh * (h_prev - n)
            da_n = dn * (1.0 - n * n)
            dr = da_n * ghn[:, t]
            da_z = dz * z * (1.0 - z)
            da_r = dr * r * (1.0 - r)
            dgh = np.concatenate([da_r, da_z, da_n * r], axis=1)
            dgi[:, t] = np.concatenate([da_r, da_z, da_n], axis=1)
            dW_hh += h_prev.T @ dgh
            db_hh += dgh.sum(axis=0)
            dh_next = dh * z + dgh @ Whh.T
        if _tracked(w_hh):
            w_hh._accumulate(dW_hh)
        if _tracked(b_hh):
            b_hh._accumulate(db_hh)
        if _tracked(w_ih):
            w_ih._accumulate(np.einsum("bti,btg->ig", x.data, dgi))
        if _tracked(b_ih):
            b_ih._accumulate(dgi.sum(axis=(0, 1)))
        if _tracked(x):
            x._accumulate(dgi @ w_ih.data.T)

    return _make(hs[:, 1:].copy(), (x, w_ih, w_hh, b_ih, b_hh), backward)


def conv1d(x, weight, bias) -> Tensor:
    """Stride-1 'same' convolution: x (batch, c_in, length), weight (c_out, c_in, k)."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    B, C_in, L = x.shape
    C_out, _, K = weight.shape
    left = (K - 1) // 2
    right = K - 1 - left
    padded = np.pad(x.data, ((0, 0), (0, 0), (left, right)))
    # cols[b, l, c, k] = padded[b, c, l + k]
    cols = sliding_window_view(padded, K, axis=2).transpose(0, 2, 1, 3).reshape(B, L, C_in * K)
    wmat = weight.data.reshape(C_out, C_in * K)
    out = (cols @ wmat.T).transpose(0, 2, 1) + bias.data[None, :, None]

    def backward(g):
        g_lc = g.transpose(0, 2, 1)  # (B, L, C_out)
        if _tracked(weight):
            weight._accumulate(np.einsum("blo,blf->of", g_lc, cols).reshape(weight.shape))
        if _tracked(bias):
            bias._accumulate(g.sum(axis=(0, 2)))
        if _tracked(x):
            dcols = (g_lc @ wmat).reshape(B, L, C_in, K)
            dpad = np.zeros_like(padded)
            for k in range(K):
                dpad[:, :, k:k + L] += dcols[:, :, :, k].transpose(0, 2, 1)
            x._accumulate(dpad[:, :, left:left + L])

    return _make(out, (x, weight, bias), backward)


def smape_loss(predicted, actual) -> Tensor:
    """SMAPE in percent as a scalar node; ``actual`` is a constant array."""
    predicted = as_tensor(predicted)
    actual = np.asarray(actual, dtype=float)
    value = 100.0 * smape_terms(actual.reshape(-1), predicted.data.reshape(-1)).mean()

    def backward(g):
        grad = smape_gradient(actual.reshape(-1), predicted.data.reshape(-1))
        predicted._accumulate(g * grad.reshape(predicted.shape))

    return _make(np.array(value), (predicted,), backward)


def mse_loss(predicted, actual) -> Tensor:
    predicted = as_tensor(predicted)
    diff = predicted - Tensor(actual)
    return mean_all(diff * diff)


def _topological(root: Tensor):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, check_finite: bool = True):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every tracked leaf."""
    if not loss._parents and not loss.requires_grad:
        raise RuntimeError("loss has no recorded computation to differentiate")
    if loss.data.size != 1:
        raise ValueError("backward needs a scalar loss")
    if check_finite and not np.isfinite(loss.data).all():
        raise TrainingDivergedError("non-finite loss", {"loss": float(loss.data)})
    order = _topological(loss)
    for node in order:
        if node._parents:
            node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
            # interior gradients are no longer needed
            node.grad = None if node is not loss else node.grad
