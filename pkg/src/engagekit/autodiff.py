"""Minimal reverse-mode autodiff over numpy arrays.

Only the operations the engagement network needs are implemented, each
with a hand-derived backward pass.  Tensors form a tape: every op
records its parents and a closure that accumulates gradients into them.
All ops preserve the input dtype, so the same graph code runs in
float32 for training and float64 for finite-difference checking.

Batch axis order throughout is (B, C, T, N): batch, channel, frame,
node.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


class Tensor:
    """Array node on the autodiff tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def backward(self, seed=None):
        """Accumulate gradients of this (scalar) tensor into the tape."""
        if seed is None:
            if self.data.shape != ():
                raise ShapeError("backward() without seed requires a scalar")
            seed = np.ones((), dtype=self.data.dtype)
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        _acc(self, np.asarray(seed, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _acc(t: Tensor, g: np.ndarray):
    """Accumulate gradient g into t.grad (copy on first store)."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def parameter(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=False)


def _needs(*tensors) -> bool:
    return any(t.requires_grad for t in tensors)


# ---------------------------------------------------------------------------
# elementwise / structural ops

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add shapes differ: {a.data.shape} vs {b.data.shape}")
    out_data = a.data + b.data

    def backward(g):
        _acc(a, g)
        _acc(b, g)

    return Tensor(out_data, _needs(a, b), (a, b), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out_data = np.where(mask, x.data, 0)

    def backward(g):
        _acc(x, g * mask)

    return Tensor(out_data, x.requires_grad, (x,), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator,
            training: bool) -> Tensor:
    """Inverted dropout; identity when not training or rate is zero."""
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.data.shape) >= rate).astype(x.data.dtype)
    out_data = x.data * mask * np.asarray(1.0 / keep, dtype=x.data.dtype)

    def backward(g):
        _acc(x, g * mask * np.asarray(1.0 / keep, dtype=x.data.dtype))

    return Tensor(out_data, x.requires_grad, (x,), backward)


def strided_frames(x: Tensor, stride: int) -> Tensor:
    """Identity residual path under temporal stride: keep frames 0, s, 2s..."""
    if stride == 1:
        return x
    out_data = np.ascontiguousarray(x.data[:, :, ::stride, :])

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[:, :, ::stride, :] = g
        _acc(x, gx)

    return Tensor(out_data, x.requires_grad, (x,), backward)


def channel_map(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """1x1 channel projection: (B, C_in, T, N) -> (B, C_out, T, N)."""
    b_, c_in, t_, n_ = x.data.shape
    c_out = weight.data.shape[1]
    x_flat = np.moveaxis(x.data, 1, 3).reshape(b_ * t_ * n_, c_in)
    y_flat = x_flat @ weight.data + bias.data
    out_data = np.ascontiguousarray(
        np.moveaxis(y_flat.reshape(b_, t_, n_, c_out), 3, 1))

    def backward(g):
        g_flat = np.moveaxis(g, 1, 3).reshape(b_ * t_ * n_, c_out)
        _acc(bias, g_flat.sum(axis=0))
        _acc(weight, x_flat.T @ g_flat)
        if x.requires_grad:
            gx_flat = g_flat @ weight.data.T
            _acc(x, np.moveaxis(gx_flat.reshape(b_, t_, n_, c_in), 3, 1))

    return Tensor(out_data, _needs(x, weight, bias), (x, weight, bias), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """(B, C, T, N) -> (B, C) mean over frames and nodes."""
    b, c, t, n = x.data.shape
    out_data = x.data.mean(axis=(2, 3))

    def backward(g):
        scale = np.asarray(1.0 / (t * n), dtype=x.data.dtype)
        _acc(x, np.broadcast_to((g * scale)[:, :, None, None], x.data.shape))

    return Tensor(out_data, x.requires_grad, (x,), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """(B, C) @ (C, K) + (K,)."""
    out_data = x.data @ weight.data + bias.data

    def backward(g):
        _acc(x, g @ weight.data.T)
        _acc(weight, x.data.T @ g)
        _acc(bias, g.sum(axis=0))

    return Tensor(out_data, _needs(x, weight, bias), (x, weight, bias), backward)


def concat_cols(tensors) -> Tensor:
    """Concatenate (B, k_i) tensors along axis 1."""
    tensors = list(tensors)
    widths = [t.data.shape[1] for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=1)

    def backward(g):
        offset = 0
        for t, w in zip(tensors, widths):
            _acc(t, g[:, offset:offset + w])
            offset += w

    return Tensor(out_data, _needs(*tensors), tuple(tensors), backward)


# ---------------------------------------------------------------------------
# graph / temporal convolutions

def spatial_unit(x: Tensor, weight: Tensor, bias: Tensor, mask: Tensor,
                 p_matrix: np.ndarray) -> Tensor:
    """Graph convolution: channel mix with bias, then masked node mixing.

    p_matrix is the constant (A + I)_ij / sqrt(d_i d_j); multiplying it
    elementwise by the learnable mask yields the effective normalized
    adjacency (degrees are fixed by A + I, the mask scales only the
    numerator).  The bias is added before node mixing, so it is mixed
    along with the features.  x is (B, C_in, T, N) -> (B, C_out, T, N);
    out[..., n] = sum_m a_norm[n, m] * (channel-mixed x + bias)[..., m].
    """
    p = np.asarray(p_matrix, dtype=x.data.dtype)
    a_norm = p * mask.data
    b_, c_in, t_, n_ = x.data.shape
    c_out = weight.data.shape[1]
    # internal layout is (B, T, N, C): the node mix then runs as one
    # contiguous batched GEMM, which is much faster than matmul over a
    # strided channel-first view
    x_flat = np.moveaxis(x.data, 1, 3).reshape(b_ * t_ * n_, c_in)
    h = (x_flat @ weight.data + bias.data).reshape(b_, t_, n_, c_out)
    out_btno = np.matmul(a_norm, h)
    out_data = np.ascontiguousarray(np.moveaxis(out_btno, 3, 1))

    def backward(g):
        g_btno = np.ascontiguousarray(np.moveaxis(g, 1, 3))
        if mask.requires_grad:
            da = np.tensordot(g_btno, h, axes=([0, 1, 3], [0, 1, 3]))
            _acc(mask, da * p)
        gh = np.matmul(a_norm.T, g_btno)
        gh_flat = gh.reshape(b_ * t_ * n_, c_out)
        _acc(bias, gh_flat.sum(axis=0))
        _acc(weight, x_flat.T @ gh_flat)
        if x.requires_grad:
            gx = (gh_flat @ weight.data.T).reshape(b_, t_, n_, c_in)
            _acc(x, np.moveaxis(gx, 3, 1))

    return Tensor(out_data, _needs(x, weight, bias, mask),
                  (x, weight, bias, mask), backward)


def temporal_conv(x: Tensor, weight: Tensor, bias: Tensor,
                  stride: int = 1) -> Tensor:
    """Per-node temporal convolution with channel mixing.

    weight is (C_out, C_in, gamma); frames are zero-padded by gamma // 2
    on both sides, so stride 1 preserves T.  x is (B, C_in, T, N).
    """
    w = weight.data
    c_out, c_in, gamma = w.shape
    b_, cx, t_, n_ = x.data.shape
    if gamma % 2 == 0:
        raise ShapeError(f"temporal kernel must be odd, got {gamma}")
    if gamma > 2 * t_ - 1:
        raise ShapeError(f"temporal kernel {gamma} too long for {t_} frames")
    if cx != c_in:
        raise ShapeError(f"temporal_conv expects {c_in} channels, got {cx}")
    pad = gamma // 2
    x_pad = np.zeros((b_, c_in, t_ + 2 * pad, n_), dtype=x.data.dtype)
    x_pad[:, :, pad:pad + t_, :] = x.data
    t_out = (t_ + 2 * pad - gamma) // stride + 1

    out_flat = np.zeros((b_, c_out, t_out * n_), dtype=x.data.dtype)
    for tau in range(gamma):
        sl = x_pad[:, :, tau:tau + stride * (t_out - 1) + 1:stride, :]
        out_flat += np.matmul(w[:, :, tau].astype(x.data.dtype),
                              sl.reshape(b_, c_in, t_out * n_))
    out_data = out_flat.reshape(b_, c_out, t_out, n_) + bias.data[None, :, None, None]

    def backward(g):
        g_flat = g.reshape(b_, c_out, t_out * n_)
        _acc(bias, g.sum(axis=(0, 2, 3)))
        gw = np.zeros_like(w)
        gx_pad = np.zeros_like(x_pad) if x.requires_grad else None
        for tau in range(gamma):
            sl = x_pad[:, :, tau:tau + stride * (t_out - 1) + 1:stride, :]
            sl_flat = sl.reshape(b_, c_in, t_out * n_)
            gw[:, :, tau] = np.matmul(g_flat, sl_flat.transpose(0, 2, 1)).sum(axis=0)
            if gx_pad is not None:
                contrib = np.matmul(w[:, :, tau].T.astype(g.dtype), g_flat)
                gx_pad[:, :, tau:tau + stride * (t_out - 1) + 1:stride, :] += (
                    contrib.reshape(b_, c_in, t_out, n_))
        _acc(weight, gw)
        if gx_pad is not None:
            _acc(x, gx_pad[:, :, pad:pad + t_, :])

    return Tensor(out_data, _needs(x, weight, bias), (x, weight, bias), backward)


# ---------------------------------------------------------------------------
# batch normalization

class BnState:
    """Running statistics container (plain arrays, not on the tape)."""

    __slots__ = ("mean", "var")

    def __init__(self, shape, dtype=np.float32):
        self.mean = np.zeros(shape, dtype=dtype)
        self.var = np.ones(shape, dtype=dtype)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, state: BnState,
               axes: tuple, training: bool, momentum: float = 0.1,
               eps: float = 1e-5) -> Tensor:
    """Normalize over `axes`; gamma/beta/state are broadcast-shaped.

    With axes (0, 2, 3) and params shaped (1, C, 1, 1) this is standard
    per-channel normalization; with axes (0, 2) and params (1, C, 1, N)
    each (channel, node) feature is normalized independently, which is
    how the raw coordinates are whitened at the network input.
    """
    if training:
        mean = x.data.mean(axis=axes, keepdims=True)
        var = x.data.var(axis=axes, keepdims=True)
        m = 1
        for ax in axes:
            m *= x.data.shape[ax]
        unbiased = var * (m / (m - 1)) if m > 1 else var
        state.mean *= (1.0 - momentum)
        state.mean += momentum * mean.astype(state.mean.dtype)
        state.var *= (1.0 - momentum)
        state.var += momentum * unbiased.astype(state.var.dtype)
    else:
        mean = state.mean.astype(x.data.dtype)
        var = state.var.astype(x.data.dtype)
        m = 0

    inv_std = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    x_hat = (x.data - mean) * inv_std
    out_data = x_hat * gamma.data + beta.data

    def backward(g):
        _acc(beta, g.sum(axis=axes, keepdims=True))
        _acc(gamma, (g * x_hat).sum(axis=axes, keepdims=True))
        if not x.requires_grad:
            return
        if training:
            gm = g.mean(axis=axes, keepdims=True)
            gxm = (g * x_hat).mean(axis=axes, keepdims=True)
            _acc(x, gamma.data * inv_std * (g - gm - x_hat * gxm))
        else:
            _acc(x, g * gamma.data * inv_std)

    return Tensor(out_data, _needs(x, gamma, beta), (x, gamma, beta), backward)


# ---------------------------------------------------------------------------
# losses

def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy over the batch; labels are int class indices."""
    z = logits.data
    b_ = z.shape[0]
    z_shift = z - z.max(axis=1, keepdims=True)
    log_probs = z_shift - np.log(np.exp(z_shift).sum(axis=1, keepdims=True))
    idx = np.arange(b_)
    loss = -log_probs[idx, labels].mean()

    def backward(g):
        probs = np.exp(log_probs)
        grad = probs.copy()
        grad[idx, labels] -= 1.0
        _acc(logits, grad * (g / b_))

    return Tensor(np.asarray(loss, dtype=z.dtype), logits.requires_grad,
                  (logits,), backward)


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid_bce(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy on raw logits (numerically stable)."""
    z = logits.data
    t = np.asarray(targets, dtype=z.dtype)
    loss = (np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))).mean()

    def backward(g):
        sig = 1.0 / (1.0 + np.exp(-z))
        _acc(logits, (sig - t) * (g / z.size))

    return Tensor(np.asarray(loss, dtype=z.dtype), logits.requires_grad,
                  (logits,), backward)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
