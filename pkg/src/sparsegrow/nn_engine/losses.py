import numpy as np


def log_softmax(logits):
    """Column-wise log-softmax of a ``classes x batch`` matrix."""
    shifted = logits - logits.max(axis=0, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=0, keepdims=True))


def smoothed_targets(labels, num_classes, smoothing, dtype=np.float64):
    labels = np.asarray(labels)
    targets = np.full((num_classes, labels.size), smoothing / num_classes, dtype=dtype)
    targets[labels, np.arange(labels.size)] += 1.0 - smoothing
    return targets


def cross_entropy(logits, labels, smoothing=0.0):
    """Label-smoothed cross-entropy averaged over the batch.

    ``logits`` is ``classes x batch``.  Returns ``(loss, dloss/dlogits)``.
    """
    num_classes, batch = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (batch,):
        raise ValueError(f"expected {batch} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError("label out of range")
    if not 0.0 <= smoothing < 1.0:
        raise ValueError("smoothing must lie in [0, 1)")
    logp = log_softmax(logits)
    targets = smoothed_targets(labels, num_classes, smoothing, logits.dtype)
    loss = -(targets * logp).sum() / batch
    grad = (np.exp(logp) - targets) / batch
    return float(loss), grad
