import numpy as np

from caerom.errors import DimensionError


def mse_loss(pred, target):
    """Batch-averaged squared L2 reconstruction error.

    The first axis is the batch axis; every other axis is summed, so for a
    batch of matrices this is ``(1/N) * sum_i ||M_i - M~_i||_F^2``.
    Returns ``(loss, grad_pred)``.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} != target shape {target.shape}")
    n = pred.shape[0] if pred.ndim > 1 else 1
    diff = pred - target
    loss = float(np.sum(diff.astype(np.float64) ** 2)) / n
    grad = (2.0 / n) * diff
    return loss, grad.astype(pred.dtype, copy=False)
