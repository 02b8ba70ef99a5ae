"""Independent oracles shared by the test modules."""

import numpy as np


def central_diff_grad(f, x, h=1e-5):
    """Gradient of scalar ``f`` at ``x`` by central differences (``x`` is perturbed in place and restored)."""
    g = np.zeros_like(x, dtype=float)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def max_rel_error(a, b, floor=1e-8):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), floor)
    return float(np.max(np.abs(a - b)) / scale)


def conv1d_loop(x, w, b, stride, padding):
    """Direct evaluation of the multi-channel strided 1-D convolution sum."""
    c_in, length = x.shape
    n_f, _, k = w.shape
    out_len = (length + 2 * padding - k) // stride + 1
    y = np.zeros((n_f, out_len))
    for f in range(n_f):
        for j in range(out_len):
            acc = 0.0 if b is None else b[f]
            for u in range(k):
                src = j * stride + u - padding
                if 0 <= src < length:
                    for c in range(c_in):
                        acc += x[c, src] * w[f, c, u]
            y[f, j] = acc
    return y


def deconv1d_loop(x, w, b, stride, crop):
    """Scatter-add evaluation of the transposed convolution."""
    c_in, length = x.shape
    _, c_out, k = w.shape
    natural = (length - 1) * stride + k
    y = np.zeros((c_out, natural))
    for ci in range(c_in):
        for j in range(length):
            for co in range(c_out):
                for u in range(k):
                    y[co, j * stride + u] += x[ci, j] * w[ci, co, u]
    y = y[:, : natural - crop]
    if b is not None:
        y += b[:, None]
    return y


def dense_loop(x, W, b, act):
    out = np.zeros(W.shape[0])
    for i in range(W.shape[0]):
        s = b[i]
        for j in range(W.shape[1]):
            s += W[i, j] * x[j]
        out[i] = {"linear": lambda v: v, "relu": lambda v: max(v, 0.0), "tanh": np.tanh}[act](s)
    return out
