"""Shared test utilities."""

import numpy as np

from evt import nn


def kink_safe(model, x, margin=0.02):
    """Shift relu biases until no preactivation sits within ``margin`` of zero.

    Central finite differences are only trustworthy where the network is
    locally smooth; a relu unit whose preactivation straddles the probe step
    produces a one-sided derivative and a spurious mismatch.  Returns the
    model for chaining.
    """
    h = np.asarray(x, dtype=np.float64)
    for layer in model.layers:
        pre = h @ layer.weights.astype(np.float64) + layer.biases.astype(np.float64)
        if layer.activation == "relu":
            for j in range(pre.shape[1]):
                for _ in range(100):
                    if np.abs(pre[:, j]).min() >= margin:
                        break
                    layer.biases[j] += np.float32(2 * margin)
                    pre[:, j] += 2 * margin
            h = np.maximum(pre, 0.0)
        elif layer.activation == "softmax":
            h = nn.softmax(pre)
        else:
            h = pre
    return model
