"""Forward and backward kernels for the layer types used by the activity CNN.

All kernels work on float64 arrays. Convolution and pooling accept either a
single sample ``[C, T]`` or a batch ``[B, C, T]``; fully connected layers
accept ``[d]`` or ``[B, d]``. Backward kernels always take the batched form.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ConfigurationError, InvalidInputError

PROB_FLOOR = 1e-12


def _as_batch(x, ndim):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == ndim - 1:
        return x[np.newaxis], True
    if x.ndim != ndim:
        raise InvalidInputError(f"expected {ndim - 1}-d or {ndim}-d input, got shape {x.shape}")
    return x, False


def conv_output_length(length, kernel_size, stride):
    return (length - kernel_size) // stride + 1


# ----------------------------------------------------------------------------
# convolution
# ----------------------------------------------------------------------------


def _conv_columns(x, kernel_size, stride):
    # [B, C, T] -> [B, T_out, C * K]
    win = sliding_window_view(x, kernel_size, axis=2)[:, :, ::stride, :]
    b, c, t_out, k = win.shape
    return np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(b, t_out, c * k)


def conv1d_forward(x, weight, bias, stride=1):
    """Valid-mode 1-d cross-correlation.

    ``weight`` has shape ``[C_out, C_in, K]``; the output length is
    ``floor((T - K) / stride) + 1``.
    """
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    xb, squeeze = _as_batch(x, 3)
    if weight.ndim != 3:
        raise ConfigurationError(f"conv weight must be 3-d, got shape {weight.shape}")
    c_out, c_in, k = weight.shape
    if xb.shape[1] != c_in:
        raise ConfigurationError(f"input has {xb.shape[1]} channels, kernel expects {c_in}")
    if bias.shape != (c_out,):
        raise ConfigurationError(f"bias shape {bias.shape} does not match {c_out} output channels")
    if stride < 1:
        raise InvalidInputError("stride must be >= 1")
    if xb.shape[2] < k:
        raise InvalidInputError(f"input length {xb.shape[2]} shorter than kernel size {k}")
    cols = _conv_columns(xb, k, stride)
    out = cols @ weight.reshape(c_out, c_in * k).T + bias
    out = out.transpose(0, 2, 1)
    return out[0] if squeeze else np.ascontiguousarray(out)


def conv1d_backward(dout, x, weight, stride=1, need_dx=True):
    """Gradients of a batched convolution: returns ``(dx, dweight, dbias)``.

    ``dx`` is ``None`` when ``need_dx`` is false (first layer of the network).
    """
    c_out, c_in, k = weight.shape
    cols = _conv_columns(x, k, stride)
    dout_t = dout.transpose(0, 2, 1)  # [B, T_out, C_out]
    t_out = dout_t.shape[1]
    dweight = np.tensordot(dout_t, cols, axes=([0, 1], [0, 1])).reshape(weight.shape)
    dbias = dout.sum(axis=(0, 2))
    if not need_dx:
        return None, dweight, dbias
    dcols = (dout_t @ weight.reshape(c_out, c_in * k)).reshape(x.shape[0], t_out, c_in, k)
    dx = np.zeros_like(x)
    span = stride * (t_out - 1) + 1
    for j in range(k):
        dx[:, :, j:j + span:stride] += dcols[:, :, :, j].transpose(0, 2, 1)
    return dx, dweight, dbias


# ----------------------------------------------------------------------------
# max pooling
# ----------------------------------------------------------------------------


def maxpool1d_forward(x, window=2, stride=2):
    """Max over sliding windows along time.

    Returns ``(out, argmax)`` where ``argmax`` holds the absolute time index of
    each window's winner (first occurrence on ties).
    """
    xb, squeeze = _as_batch(x, 3)
    if window < 1 or stride < 1:
        raise InvalidInputError("window and stride must be >= 1")
    if window > xb.shape[2]:
        raise InvalidInputError(f"pool window {window} exceeds input length {xb.shape[2]}")
    win = sliding_window_view(xb, window, axis=2)[:, :, ::stride, :]
    local = win.argmax(axis=3)
    out = np.take_along_axis(win, local[..., np.newaxis], axis=3)[..., 0]
    argmax = local + stride * np.arange(win.shape[2])
    if squeeze:
        return out[0], argmax[0]
    return np.ascontiguousarray(out), argmax


def maxpool1d_backward(dout, argmax, input_length, window=2, stride=2):
    b, c, _ = dout.shape
    dx = np.zeros((b, c, input_length))
    if window <= stride:
        # windows do not overlap, so each input position wins at most once
        np.put_along_axis(dx, argmax, dout, axis=2)
    else:
        bi, ci, _ = np.indices(argmax.shape)
        np.add.at(dx, (bi, ci, argmax), dout)
    return dx


# ----------------------------------------------------------------------------
# fully connected
# ----------------------------------------------------------------------------


def fc_forward(x, weight, bias):
    """Affine map ``weight @ x + bias`` with ``weight`` shaped ``[d_out, d_in]``."""
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    xb, squeeze = _as_batch(x, 2)
    if weight.ndim != 2 or xb.shape[1] != weight.shape[1]:
        raise ConfigurationError(f"input dim {xb.shape[1]} does not match weight shape {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ConfigurationError(f"bias shape {bias.shape} does not match weight shape {weight.shape}")
    out = xb @ weight.T + bias
    return out[0] if squeeze else out


def fc_backward(dout, x, weight):
    return dout @ weight, dout.T @ x, dout.sum(axis=0)


# ----------------------------------------------------------------------------
# activations and losses
# ----------------------------------------------------------------------------


def relu(x):
    return np.maximum(x, 0.0)


def softmax(logits):
    """Numerically stable softmax along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0:
        raise InvalidInputError("softmax needs at least one logit")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("softmax input contains NaN or Inf")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_loss(probs, label):
    """``-log(probs[label])`` with probabilities floored at ``PROB_FLOOR``."""
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < probs.shape[-1]:
        raise InvalidInputError(f"label {label} outside [0, {probs.shape[-1]})")
    return float(-np.log(max(probs[label], PROB_FLOOR)))


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over a batch and its gradient w.r.t. the logits."""
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.shape != (n,):
        raise InvalidInputError(f"{labels.shape[0]} labels for {n} samples")
    if labels.min() < 0 or labels.max() >= c:
        raise InvalidInputError(f"labels must lie in [0, {c})")
    probs = softmax(logits)
    rows = np.arange(n)
    loss = -np.log(np.maximum(probs[rows, labels], PROB_FLOOR)).mean()
    grad = probs
    grad[rows, labels] -= 1.0
    return float(loss), grad / n
