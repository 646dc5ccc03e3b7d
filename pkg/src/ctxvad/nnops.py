"""Dense numerical building blocks: same-padded 3x3 convolution and affine layers,
each with an explicit backward pass."""

from __future__ import annotations

import numpy as np

KERNEL = 3  # spatial kernel size used throughout the recurrent stack
PAD = KERNEL // 2


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def im2col(x: np.ndarray) -> np.ndarray:
    """(B, H, W, C) -> (B, H, W, 9*C) patch matrix with zero padding."""
    b, h, w, c = x.shape
    padded = np.zeros((b, h + 2 * PAD, w + 2 * PAD, c), dtype=x.dtype)
    padded[:, PAD : PAD + h, PAD : PAD + w, :] = x
    cols = np.empty((b, h, w, KERNEL * KERNEL, c), dtype=x.dtype)
    for di in range(KERNEL):
        for dj in range(KERNEL):
            cols[:, :, :, di * KERNEL + dj, :] = padded[:, di : di + h, dj : dj + w, :]
    return cols.reshape(b, h, w, KERNEL * KERNEL * c)


def col2im(dcols: np.ndarray, h: int, w: int, c: int) -> np.ndarray:
    """Adjoint of im2col: scatter-add patch gradients back to the input grid."""
    b = dcols.shape[0]
    dcols = dcols.reshape(b, h, w, KERNEL * KERNEL, c)
    dpad = np.zeros((b, h + 2 * PAD, w + 2 * PAD, c), dtype=dcols.dtype)
    for di in range(KERNEL):
        for dj in range(KERNEL):
            dpad[:, di : di + h, dj : dj + w, :] += dcols[:, :, :, di * KERNEL + dj, :]
    return dpad[:, PAD : PAD + h, PAD : PAD + w, :]


def conv2d_same(x: np.ndarray, kernel: np.ndarray, cols: np.ndarray | None = None):
    """Stride-1, zero-padded 3x3 convolution.

    x: (B, H, W, Cin); kernel: (3, 3, Cin, Cout) -> (B, H, W, Cout).
    Returns the output and the patch matrix for reuse in the backward pass.
    """
    b, h, w, cin = x.shape
    cout = kernel.shape[-1]
    if cols is None:
        cols = im2col(x)
    y = cols.reshape(b * h * w, -1) @ kernel.reshape(-1, cout)
    return y.reshape(b, h, w, cout), cols


def conv2d_same_backward(dy: np.ndarray, cols: np.ndarray, kernel: np.ndarray):
    """Gradients of conv2d_same w.r.t. input and kernel."""
    b, h, w, cout = dy.shape
    cin = kernel.shape[2]
    dy_m = dy.reshape(b * h * w, cout)
    dkernel = (cols.reshape(b * h * w, -1).T @ dy_m).reshape(kernel.shape)
    dcols = dy_m @ kernel.reshape(-1, cout).T
    dx = col2im(dcols.reshape(b, h, w, -1), h, w, cin)
    return dx, dkernel


def affine(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """x: (B, Din), weight: (Din, Dout)."""
    return x @ weight + bias


def affine_backward(dy: np.ndarray, x: np.ndarray, weight: np.ndarray):
    dx = dy @ weight.T
    dweight = x.T @ dy
    dbias = dy.sum(axis=0)
    return dx, dweight, dbias


def relu(x):
    return np.maximum(x, 0)


def relu_backward(dy, x):
    return dy * (x > 0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
