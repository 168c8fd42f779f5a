"""Reverse-mode autodiff on numpy arrays.

A `Tensor` wraps an ndarray plus an optional gradient. Operations build a
tape of closures; `Tensor.backward()` on a scalar loss walks the tape in
reverse topological order and accumulates gradients into every
`requires_grad` tensor that contributed to the loss.

Only the operations the reconstruction network needs are provided:
1-D cross-correlation, batch normalization, PReLU, elementwise add,
reshape, and MSE loss. Signal tensors follow the (batch, channels,
length) layout; losses are 0-d. The convolution kernels route everything
heavy through large contiguous matmuls (see the per-path helpers).
"""
from __future__ import annotations

import contextlib

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ConfigurationError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / finite differences)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """An ndarray with an optional gradient and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def accumulate_grad(self, g: np.ndarray, own: bool = False):
        """Add g into .grad; with own=True a first assignment adopts g directly."""
        if self.grad is None:
            self.grad = g if own else g.copy()
        else:
            self.grad += g

    def backward(self):
        """Backpropagate from this scalar; populates .grad along the tape."""
        if self.data.ndim != 0:
            raise ConfigurationError(
                f"backward() needs a scalar loss, got shape {self.data.shape}"
            )
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def _result(data: np.ndarray, parents: tuple, backward) -> Tensor:
    """Wrap an op result, recording the tape only when gradients can flow."""
    record = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=record)
    if record:
        out._parents = parents
        out._backward = backward
    return out


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Batched 1-D cross-correlation.

    x: (B, C_in, L); weight: (C_out, C_in, K); bias: (C_out,) or None.
    Output length is floor((L + 2*padding - K) / stride) + 1.
    """
    batch, c_in, length = x.data.shape
    c_out, c_in_w, kernel = weight.data.shape
    if c_in != c_in_w:
        raise ConfigurationError(
            f"conv1d channel mismatch: input {x.data.shape} vs weight {weight.data.shape}"
        )
    padded_len = length + 2 * padding
    if padded_len < kernel:
        raise ConfigurationError(
            f"conv1d input too short: padded length {padded_len} < kernel {kernel} "
            f"(input {x.data.shape}, weight {weight.data.shape})"
        )
    if padding > 0:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding)))
    else:
        xp = x.data
    out_len = (padded_len - kernel) // stride + 1
    if out_len == 1 and stride == 1:
        out, backward = _conv1d_dense(x, weight, bias, xp, padding)
    elif stride == 1:
        out, backward = _conv1d_stacked(x, weight, bias, xp, out_len, padding)
    else:
        out, backward = _conv1d_im2col(x, weight, bias, xp, out_len, stride, padding)
    if bias is not None:
        out += bias.data[None, :, None]
    parents = (x, weight) if bias is None else (x, weight, bias)
    return _result(out, parents, backward)


def _conv1d_dense(x: Tensor, weight: Tensor, bias: Tensor | None,
                  xp: np.ndarray, padding: int):
    """Single-window case (full-width filters): a plain dense map, no copies."""
    batch, c_in, padded_len = xp.shape
    c_out, _, kernel = weight.data.shape
    x_flat = xp.reshape(batch, c_in * kernel)
    w_flat = weight.data.reshape(c_out, c_in * kernel)
    out = (x_flat @ w_flat.T).reshape(batch, c_out, 1)

    def backward(g):
        g2 = g.reshape(batch, c_out)
        if weight.requires_grad:
            weight.accumulate_grad((g2.T @ x_flat).reshape(weight.data.shape))
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g2.sum(axis=0))
        if x.requires_grad:
            gx = (g2 @ w_flat).reshape(batch, c_in, padded_len)
            if padding:
                gx = np.ascontiguousarray(gx[:, :, padding:padded_len - padding])
            x.accumulate_grad(gx, own=not padding)

    return out, backward


def _conv1d_stacked(x: Tensor, weight: Tensor, bias: Tensor | None,
                    xp: np.ndarray, out_len: int, padding: int):
    """Stride-1 path: stack the kernel shifts channels-first, one GEMM per pass.

    The stacked matrix is reused by the weight-gradient GEMM, so each
    training step runs exactly three large matmuls per convolution.
    """
    batch, c_in, padded_len = xp.shape
    c_out, _, kernel = weight.data.shape
    x_cf = np.ascontiguousarray(xp.transpose(1, 0, 2)).reshape(c_in, batch, padded_len)
    stack = np.empty((kernel * c_in, batch * out_len), dtype=xp.dtype)
    for k in range(kernel):
        stack[k * c_in:(k + 1) * c_in] = x_cf[:, :, k:k + out_len].reshape(
            c_in, batch * out_len)
    # row order of `stack` is (k, c); arrange the weights to match
    w_cols = np.ascontiguousarray(weight.data.transpose(2, 1, 0)).reshape(
        kernel * c_in, c_out)
    out_cf = w_cols.T @ stack                                     # (C_out, B*L_out)
    out = np.ascontiguousarray(
        out_cf.reshape(c_out, batch, out_len).transpose(1, 0, 2))

    def backward(g):
        g_cf = np.ascontiguousarray(g.transpose(1, 0, 2)).reshape(c_out, batch * out_len)
        if weight.requires_grad:
            gw = (g_cf @ stack.T).reshape(c_out, kernel, c_in)
            weight.accumulate_grad(np.ascontiguousarray(gw.transpose(0, 2, 1)))
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g_cf.sum(axis=1))
        if x.requires_grad:
            spread = (w_cols @ g_cf).reshape(kernel, c_in, batch, out_len)
            # overlap-add the taps; seed with the middle tap to skip a full zero fill
            mid = kernel // 2
            gx_cf = np.empty((c_in, batch, padded_len), dtype=g.dtype)
            gx_cf[:, :, :mid] = 0.0
            gx_cf[:, :, mid + out_len:] = 0.0
            gx_cf[:, :, mid:mid + out_len] = spread[mid]
            for k in range(kernel):
                if k != mid:
                    gx_cf[:, :, k:k + out_len] += spread[k]
            if padding:
                gx_cf = gx_cf[:, :, padding:padded_len - padding]
            x.accumulate_grad(np.ascontiguousarray(gx_cf.transpose(1, 0, 2)), own=True)

    return out, backward


def _conv1d_im2col(x: Tensor, weight: Tensor, bias: Tensor | None,
                   xp: np.ndarray, out_len: int, stride: int, padding: int):
    """General strided path via im2col + GEMM (only exercised by small cases)."""
    batch, c_in, padded_len = xp.shape
    c_out, _, kernel = weight.data.shape
    xt = np.ascontiguousarray(xp.transpose(0, 2, 1))                 # (B, Lp, C)
    windows = sliding_window_view(xt, kernel, axis=1)[:, ::stride]   # (B, L_out, C, K)
    cols = np.ascontiguousarray(windows.transpose(0, 1, 3, 2)).reshape(
        batch * out_len, kernel * c_in)
    w2 = weight.data.transpose(0, 2, 1).reshape(c_out, kernel * c_in)
    out = (cols @ w2.T).reshape(batch, out_len, c_out)
    out = np.ascontiguousarray(out.transpose(0, 2, 1))               # (B, C_out, L_out)

    def backward(g):
        gt = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(batch * out_len, c_out)
        if weight.requires_grad:
            gw = (gt.T @ cols).reshape(c_out, kernel, c_in)
            weight.accumulate_grad(np.ascontiguousarray(gw.transpose(0, 2, 1)))
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(gt.sum(axis=0))
        if x.requires_grad:
            dcols = (gt @ w2).reshape(batch, out_len, kernel, c_in)
            gxt = np.zeros_like(xt)
            for k in range(kernel):
                gxt[:, k:k + stride * out_len:stride, :] += dcols[:, :, k, :]
            gx = np.ascontiguousarray(gxt.transpose(0, 2, 1))
            if padding:
                gx = np.ascontiguousarray(gx[:, :, padding:padded_len - padding])
            x.accumulate_grad(gx, own=True)

    return out, backward


def batch_norm_train(x: Tensor, gamma: Tensor, beta: Tensor,
                     eps: float) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Training-mode normalization over the (batch, length) axes.

    Returns (output, batch mean, batch variance) so the layer can update
    its running statistics; the backward pass carries the dependence of
    mean/variance on x.
    """
    m = x.data.shape[0] * x.data.shape[2]
    mean = x.data.mean(axis=(0, 2))
    xhat = x.data - mean[None, :, None]
    var = np.einsum("bcl,bcl->c", xhat, xhat, optimize=True) / m
    inv = 1.0 / np.sqrt(var + eps)
    xhat *= inv[None, :, None]
    out = xhat * gamma.data[None, :, None]
    out += beta.data[None, :, None]

    def backward(g):
        if gamma.requires_grad:
            gamma.accumulate_grad(np.einsum("bcl,bcl->c", g, xhat, optimize=True))
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=(0, 2)))
        if x.requires_grad:
            gxhat = g * gamma.data[None, :, None]
            s1 = gxhat.sum(axis=(0, 2), keepdims=True)
            s2 = np.einsum("bcl,bcl->c", gxhat, xhat, optimize=True)
            gxhat -= s1 / m
            gxhat -= xhat * (s2[None, :, None] / m)
            gxhat *= inv[None, :, None]
            x.accumulate_grad(gxhat, own=True)

    return _result(out, (x, gamma, beta), backward), mean, var


def batch_norm_eval(x: Tensor, gamma: Tensor, beta: Tensor,
                    mean: np.ndarray, var: np.ndarray, eps: float) -> Tensor:
    """Eval-mode normalization with fixed (running) statistics."""
    inv = 1.0 / np.sqrt(var + eps)
    scale = gamma.data * inv
    shift = beta.data - mean * scale
    out = x.data * scale[None, :, None]
    out += shift[None, :, None]

    def backward(g):
        if gamma.requires_grad:
            xhat = (x.data - mean[None, :, None]) * inv[None, :, None]
            gamma.accumulate_grad(np.einsum("bcl,bcl->c", g, xhat, optimize=True))
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=(0, 2)))
        if x.requires_grad:
            x.accumulate_grad(g * scale[None, :, None], own=True)

    return _result(out, (x, gamma, beta), backward)


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """max(0, x) + slope * min(0, x) with one learnable slope per channel."""
    if slope.data.shape[0] != x.data.shape[1]:
        raise ConfigurationError(
            f"prelu slope count {slope.data.shape[0]} != channels {x.data.shape[1]}"
        )
    xneg = np.minimum(x.data, 0)
    out = np.maximum(x.data, 0)
    out += slope.data[None, :, None] * xneg

    def backward(g):
        if x.requires_grad:
            # derivative is 1 where x >= 0, slope where x < 0
            scale = (xneg < 0) * (slope.data[None, :, None] - x.dtype.type(1))
            scale += x.dtype.type(1)
            scale *= g
            x.accumulate_grad(scale, own=True)
        if slope.requires_grad:
            slope.accumulate_grad(np.einsum("bcl,bcl->c", g, xneg, optimize=True))

    return _result(out, (x, slope), backward)


def add(x: Tensor, y: Tensor) -> Tensor:
    if x.data.shape != y.data.shape:
        raise ConfigurationError(f"add shape mismatch: {x.data.shape} vs {y.data.shape}")
    out = x.data + y.data

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g)
        if y.requires_grad:
            y.accumulate_grad(g)

    return _result(out, (x, y), backward)


def reshape(x: Tensor, shape: tuple) -> Tensor:
    out = x.data.reshape(shape)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.data.shape))

    return _result(out, (x,), backward)


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of squared differences over all elements."""
    if pred.data.shape != target.data.shape:
        raise ConfigurationError(
            f"mse_loss shape mismatch: {pred.data.shape} vs {target.data.shape}"
        )
    diff = pred.data - target.data
    out = np.asarray(np.vdot(diff, diff) / diff.size, dtype=pred.data.dtype)

    def backward(g):
        scale = pred.dtype.type(2.0 / diff.size) * g
        if pred.requires_grad:
            pred.accumulate_grad(diff * scale, own=True)
        if target.requires_grad:
            target.accumulate_grad(diff * (-scale), own=True)

    return _result(out, (pred, target), backward)
