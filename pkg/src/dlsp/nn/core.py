"""Tensor primitives for the classifier: strided valid convolution via
im2col, ReLU, fully-connected layers, stable softmax cross-entropy, and
Adam.

Everything is plain numpy in NHWC layout.  Each forward returns whatever its
backward needs as an explicit cache tuple; backward functions return input
and parameter gradients.  No autograd, no framework.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_out_size(size: int, kernel: int, stride: int) -> int:
    if size < kernel:
        raise ValueError(f"input {size} smaller than kernel {kernel}")
    return (size - kernel) // stride + 1


def _im2col(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """(B,H,W,C) -> (B,OH,OW,k*k*C) patch matrix (copies once)."""
    windows = sliding_window_view(x, (kernel, kernel), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]  # (B,OH,OW,C,k,k)
    patches = windows.transpose(0, 1, 2, 4, 5, 3)  # (B,OH,OW,k,k,C)
    b, oh, ow = patches.shape[:3]
    return patches.reshape(b, oh, ow, kernel * kernel * x.shape[3])


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int):
    """Valid convolution; w has shape (k,k,Cin,Cout).

    Returns (out, cache).
    """
    k = w.shape[0]
    col = _im2col(x, k, stride)
    out = col @ w.reshape(-1, w.shape[3]) + b
    return out, (col, x.shape, w, stride)


def conv_backward(dout: np.ndarray, cache):
    col, x_shape, w, stride = cache
    k, _, c_in, c_out = w.shape
    b, oh, ow, _ = dout.shape

    col_mat = col.reshape(-1, col.shape[3])
    dout_mat = dout.reshape(-1, c_out)
    dw = (col_mat.T @ dout_mat).reshape(w.shape)
    db = dout_mat.sum(axis=0)

    # Scatter patch gradients back onto the input; strides never overlap
    # within one (u, v) offset so += over offsets is exact.
    dcol = (dout_mat @ w.reshape(-1, c_out).T).reshape(b, oh, ow, k, k, c_in)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for u in range(k):
        for v in range(k):
            dx[:, u : u + stride * oh : stride, v : v + stride * ow : stride, :] += dcol[
                :, :, :, u, v, :
            ]
    return dx, dw, db


def relu(x: np.ndarray):
    """Returns (out, cache)."""
    out = np.maximum(x, 0.0)
    return out, x


def relu_backward(dout: np.ndarray, cache) -> np.ndarray:
    return dout * (cache > 0.0)


def fc_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, x


def fc_backward(dout: np.ndarray, cache, w: np.ndarray):
    x = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood and its gradient w.r.t. logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -log_probs[np.arange(n), labels].mean()
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    return float(loss), dlogits / n


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    t: int
    m: dict
    v: dict


def adam_init(params: dict) -> AdamState:
    zeros = lambda p: np.zeros_like(p)
    return AdamState(
        t=0,
        m={k: zeros(p) for k, p in params.items()},
        v={k: zeros(p) for k, p in params.items()},
    )


def adam_step(params: dict, grads: dict, state: AdamState, lr, beta1, beta2, eps):
    """One bias-corrected Adam update; returns (new params, new state)."""
    t = state.t + 1
    new_params, m, v = {}, {}, {}
    for key, p in params.items():
        g = grads[key]
        m[key] = beta1 * state.m[key] + (1.0 - beta1) * g
        v[key] = beta2 * state.v[key] + (1.0 - beta2) * g * g
        m_hat = m[key] / (1.0 - beta1**t)
        v_hat = v[key] / (1.0 - beta2**t)
        new_params[key] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(t=t, m=m, v=v)
