"""Array kernels for 1-D convolution, transposed convolution and pooling.

All kernels work on batched arrays laid out as ``(batch, channels, length)``.
They are dtype-preserving, so the same code runs the float32 training path
and the float64 gradient checks.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from caerom.errors import ConfigurationError, DimensionError, StateError


def conv1d_output_length(in_len, kernel_len, stride=1, padding=0):
    return (in_len + 2 * padding - kernel_len) // stride + 1


def deconv1d_output_length(in_len, kernel_len, stride=1, output_crop=0):
    return (in_len - 1) * stride + kernel_len - output_crop


def _as_batch(x):
    x = np.asarray(x)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise DimensionError(f"expected (channels, length) or (batch, channels, length), got {x.shape}")
    return x, False


def _im2col(x, k, stride, out_len):
    """``(B, C, L)`` -> ``(B * out_len, C * k)`` window matrix (copies)."""
    windows = sliding_window_view(x, k, axis=2)[:, :, : stride * (out_len - 1) + 1 : stride, :]
    return windows.transpose(0, 2, 1, 3).reshape(x.shape[0] * out_len, x.shape[1] * k)


def _col2im(cols, stride, length):
    """Adjoint of the window extraction: ``(B, C, k, n)`` scattered into ``(B, C, length)``."""
    b, c, k, n = cols.shape
    out = np.zeros((b, c, length), dtype=cols.dtype)
    span = stride * (n - 1) + 1
    for u in range(k):
        out[:, :, u : u + span : stride] += cols[:, :, u, :]
    return out


def conv1d(x, weight, bias=None, stride=1, padding=0, return_cols=False):
    """Strided 1-D cross-correlation summed over input channels.

    ``weight`` has shape ``(n_filters, in_channels, kernel_len)``. Output
    element ``(f, j)`` is ``sum_c sum_u x[c, j*stride + u - padding] * weight[f, c, u]``
    with zeros outside the input. With ``return_cols`` the im2col matrix is
    returned as well so the backward pass can reuse it.
    """
    x, squeeze = _as_batch(x)
    n_filters, in_ch, k = weight.shape
    if x.shape[1] != in_ch:
        raise DimensionError(f"input has {x.shape[1]} channels, filters expect {in_ch}")
    if stride < 1 or k < 1 or padding < 0:
        raise ConfigurationError("kernel_len and stride must be >= 1, padding >= 0")
    out_len = conv1d_output_length(x.shape[2], k, stride, padding)
    if out_len < 1:
        raise ConfigurationError(
            f"conv1d output length {out_len} < 1 (in_len={x.shape[2]}, kernel={k}, "
            f"stride={stride}, padding={padding})"
        )
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    cols = _im2col(x, k, stride, out_len)
    y = (cols @ weight.reshape(n_filters, in_ch * k).T).reshape(x.shape[0], out_len, n_filters)
    y = np.ascontiguousarray(y.transpose(0, 2, 1))
    if bias is not None:
        y += bias[None, :, None]
    y = y[0] if squeeze else y
    return (y, cols) if return_cols else y


def conv1d_grads(x, weight, grad_out, stride=1, padding=0, cols=None):
    """Adjoint of :func:`conv1d` returning ``(grad_x, grad_weight, grad_bias)``."""
    x, squeeze = _as_batch(x)
    grad_out, _ = _as_batch(grad_out)
    n_filters, in_ch, k = weight.shape
    batch, _, in_len = x.shape
    out_len = grad_out.shape[2]
    if cols is None:
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
        cols = _im2col(xp, k, stride, out_len)
    g2 = grad_out.transpose(0, 2, 1).reshape(batch * out_len, n_filters)
    grad_w = (g2.T @ cols).reshape(weight.shape)
    grad_b = grad_out.sum(axis=(0, 2))
    # (C*K, F) @ (B, F, L_out) -> (B, C, K, L_out)
    gcols = np.matmul(weight.reshape(n_filters, in_ch * k).T, grad_out).reshape(batch, in_ch, k, out_len)
    gxp = _col2im(gcols, stride, in_len + 2 * padding)
    grad_x = np.ascontiguousarray(gxp[:, :, padding : padding + in_len]) if padding else gxp
    return (grad_x[0] if squeeze else grad_x), grad_w, grad_b


def deconv1d(x, weight, bias=None, stride=1, output_crop=0):
    """Transposed 1-D convolution.

    ``weight`` has shape ``(in_channels, out_channels, kernel_len)``, which is
    the layout of a :func:`conv1d` filter bank read the other way round: with
    shared weights and ``padding=0`` this is the exact linear adjoint of
    :func:`conv1d`. Each input value scatters ``value * weight[c_in, :, :]``
    into the output at offset ``j * stride``; overlaps sum. ``output_crop``
    trailing samples are removed before the bias is added.
    """
    x, squeeze = _as_batch(x)
    in_ch, out_ch, k = weight.shape
    if x.shape[1] != in_ch:
        raise DimensionError(f"input has {x.shape[1]} channels, filters expect {in_ch}")
    if stride < 1 or k < 1 or output_crop < 0:
        raise ConfigurationError("kernel_len and stride must be >= 1, output_crop >= 0")
    batch, _, in_len = x.shape
    natural = (in_len - 1) * stride + k
    if output_crop >= natural:
        raise ConfigurationError(f"output_crop={output_crop} >= natural output length {natural}")
    # (C_out*K, C_in) @ (B, C_in, L) -> (B, C_out, K, L)
    cols = np.matmul(weight.reshape(in_ch, out_ch * k).T, x).reshape(batch, out_ch, k, in_len)
    y = _col2im(cols, stride, natural)
    if output_crop:
        y = np.ascontiguousarray(y[:, :, : natural - output_crop])
    if bias is not None:
        y += bias[None, :, None]
    return y[0] if squeeze else y


def deconv1d_grads(x, weight, grad_out, stride=1, output_crop=0):
    x, squeeze = _as_batch(x)
    grad_out, _ = _as_batch(grad_out)
    in_ch, out_ch, k = weight.shape
    batch, _, in_len = x.shape
    if output_crop:
        grad_out = np.pad(grad_out, ((0, 0), (0, 0), (0, output_crop)))
    # the input gradient is a plain conv1d of grad_out with the same filter bank
    cols = _im2col(grad_out, k, stride, in_len)  # (B*L_in, C_out*K)
    grad_x = (cols @ weight.reshape(in_ch, out_ch * k).T).reshape(batch, in_len, in_ch)
    grad_x = np.ascontiguousarray(grad_x.transpose(0, 2, 1))
    x2 = x.transpose(0, 2, 1).reshape(batch * in_len, in_ch)
    grad_w = (x2.T @ cols).reshape(weight.shape)
    grad_b = grad_out.sum(axis=(0, 2))
    return (grad_x[0] if squeeze else grad_x), grad_w, grad_b


def avg_pool1d(x, window):
    """Non-overlapping average pooling; trailing samples that do not fill a window are dropped."""
    x, squeeze = _as_batch(x)
    if window < 2:
        raise ConfigurationError("pooling window must be >= 2")
    in_len = x.shape[2]
    if in_len < window:
        raise ConfigurationError(f"input length {in_len} shorter than pooling window {window}")
    n = in_len // window
    y = x[:, :, : n * window].reshape(x.shape[0], x.shape[1], n, window).mean(axis=3)
    return y[0] if squeeze else y


def avg_pool1d_grad(grad_out, window, in_len):
    grad_out, squeeze = _as_batch(grad_out)
    b, c, n = grad_out.shape
    g = np.zeros((b, c, in_len), dtype=grad_out.dtype)
    g[:, :, : n * window] = np.repeat(grad_out / window, window, axis=2)
    return g[0] if squeeze else g


def avg_unpool1d(x, window):
    """Replicate each value ``window`` times."""
    x, squeeze = _as_batch(x)
    if window < 2:
        raise ConfigurationError("pooling window must be >= 2")
    y = np.repeat(x, window, axis=2)
    return y[0] if squeeze else y


def avg_unpool1d_grad(grad_out, window):
    grad_out, squeeze = _as_batch(grad_out)
    b, c, length = grad_out.shape
    g = grad_out.reshape(b, c, length // window, window).sum(axis=3)
    return g[0] if squeeze else g


def max_pool1d(x, window):
    """Non-overlapping max pooling.

    Returns ``(pooled, argmax)`` where ``argmax`` holds the absolute input
    index of each selected maximum. Ties resolve to the lowest index.
    """
    x, squeeze = _as_batch(x)
    if window < 2:
        raise ConfigurationError("pooling window must be >= 2")
    in_len = x.shape[2]
    if in_len < window:
        raise ConfigurationError(f"input length {in_len} shorter than pooling window {window}")
    n = in_len // window
    blocks = x[:, :, : n * window].reshape(x.shape[0], x.shape[1], n, window)
    local = blocks.argmax(axis=3)  # argmax returns the first occurrence
    pooled = np.take_along_axis(blocks, local[..., None], axis=3)[..., 0]
    argmax = local + window * np.arange(n)
    if squeeze:
        return pooled[0], argmax[0]
    return pooled, argmax


def max_unpool1d(x, argmax, window, out_len=None):
    """Scatter each value to its recorded argmax position; zeros elsewhere."""
    x, squeeze = _as_batch(x)
    argmax, _ = _as_batch(argmax)
    if argmax.shape != x.shape:
        raise StateError(f"argmax cache shape {argmax.shape} does not match input {x.shape}")
    n = x.shape[2]
    if np.any(argmax // window != np.arange(n)):
        raise StateError("argmax cache was recorded with a different pooling window")
    out_len = n * window if out_len is None else out_len
    y = np.zeros((x.shape[0], x.shape[1], out_len), dtype=x.dtype)
    np.put_along_axis(y, argmax, x, axis=2)
    return y[0] if squeeze else y
