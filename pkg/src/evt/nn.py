"""Minimal dense-network engine.

Plain numpy forward/backward passes for stacks of fully connected layers,
the two losses used across the package (summed-feature MSE and asymmetric
cross-entropy), SGD/Adam optimizers, and a finite-difference gradient
checker.  Parameters default to float32; losses accumulate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("linear", "relu", "softmax")

LOG_EPS = 1e-12  # floor inside log(), keeps one-hot predictions finite
ROW_SUM_TOL = 1e-4


class ShapeError(ValueError):
    """Array dimensions inconsistent with the model or between operands."""


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction so large logits cannot overflow."""
    z = np.asarray(z)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def entropy(p: np.ndarray) -> np.ndarray:
    """Shannon entropy (nats) of each row of a stochastic matrix."""
    p = np.asarray(p, dtype=np.float64)
    plogp = np.where(p > 0, p * np.log(np.maximum(p, LOG_EPS)), 0.0)
    return -plogp.sum(axis=-1)


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "relu":
        return relu(z)
    if name == "softmax":
        return softmax(z)
    raise ValueError(f"unknown activation {name!r}")


def _activation_backward(name: str, out: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Multiply an upstream gradient by the activation Jacobian.

    Only needs the post-activation output: relu's mask is out > 0 and the
    softmax Jacobian-vector product is expressible in its own output.
    """
    if name == "linear":
        return grad
    if name == "relu":
        return grad * (out > 0)
    if name == "softmax":
        inner = (grad * out).sum(axis=-1, keepdims=True)
        return out * (grad - inner)
    raise ValueError(f"unknown activation {name!r}")


class DenseLayer:
    """Fully connected layer: out = activation(x @ weights + biases)."""

    def __init__(self, weights: np.ndarray, biases: np.ndarray, activation: str):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        weights = np.asarray(weights)
        biases = np.asarray(biases)
        if weights.ndim != 2 or biases.shape != (weights.shape[1],):
            raise ShapeError(
                f"weights {weights.shape} and biases {biases.shape} inconsistent"
            )
        self.weights = weights
        self.biases = biases
        self.activation = activation

    @classmethod
    def create(cls, n_in: int, n_out: int, activation: str,
               rng: np.random.Generator, dtype=np.float32) -> "DenseLayer":
        """Glorot-uniform initialised layer, seeded through ``rng``."""
        limit = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, size=(n_in, n_out)).astype(dtype)
        b = np.zeros(n_out, dtype=dtype)
        return cls(w, b, activation)

    @property
    def in_size(self) -> int:
        return self.weights.shape[0]

    @property
    def out_size(self) -> int:
        return self.weights.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return _apply_activation(self.activation, x @ self.weights + self.biases)

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.biases.copy(), self.activation)

    def astype(self, dtype) -> "DenseLayer":
        return DenseLayer(self.weights.astype(dtype), self.biases.astype(dtype),
                          self.activation)


class Network:
    """Ordered dense-layer stack with a designated encoding (bottleneck) layer."""

    def __init__(self, layers: list[DenseLayer], bottleneck_index: int):
        if not layers:
            raise ValueError("network needs at least one layer")
        if not 0 <= bottleneck_index < len(layers):
            raise ValueError(f"bottleneck index {bottleneck_index} out of range")
        for i in range(1, len(layers)):
            if layers[i].in_size != layers[i - 1].out_size:
                raise ShapeError(
                    f"layer {i} expects {layers[i].in_size} inputs but layer "
                    f"{i - 1} produces {layers[i - 1].out_size}"
                )
        self.layers = layers
        self.bottleneck_index = bottleneck_index

    @property
    def in_size(self) -> int:
        return self.layers[0].in_size

    @property
    def out_size(self) -> int:
        return self.layers[-1].out_size

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list [w0, b0, w1, b1, ...]; order is the update order."""
        params = []
        for layer in self.layers:
            params.append(layer.weights)
            params.append(layer.biases)
        return params

    def forward(self, x: np.ndarray) -> list[np.ndarray]:
        """Post-activation outputs of every layer, input first excluded."""
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.in_size:
            raise ShapeError(
                f"input shape {x.shape} incompatible with layer 0 "
                f"(expects {self.in_size} features)"
            )
        acts = []
        out = x
        for layer in self.layers:
            out = layer(out)
            acts.append(out)
        return acts

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[-1]

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Activation of the bottleneck layer."""
        return self.forward(x)[self.bottleneck_index]

    def copy(self) -> "Network":
        return Network([l.copy() for l in self.layers], self.bottleneck_index)

    def astype(self, dtype) -> "Network":
        return Network([l.astype(dtype) for l in self.layers], self.bottleneck_index)

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.parameters())


# ---------------------------------------------------------------------------
# Losses.  Convention for MSE: squared error summed over features, then
# averaged over samples, so the loss of a batch is (1/N) sum_i ||x_i - y_i||^2.
# Cross-entropy is asymmetric: the first argument is the "true" distribution.
# ---------------------------------------------------------------------------

def mse_loss(x: np.ndarray, x_recon: np.ndarray) -> float:
    x = np.asarray(x)
    x_recon = np.asarray(x_recon)
    if x.shape != x_recon.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {x_recon.shape}")
    diff = x.astype(np.float64) - x_recon.astype(np.float64)
    n = max(x.shape[0], 1)
    return float(np.sum(diff * diff) / n)


def mse_grad(x: np.ndarray, x_recon: np.ndarray) -> np.ndarray:
    """d mse_loss / d x_recon."""
    if x.shape != x_recon.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {x_recon.shape}")
    n = max(x.shape[0], 1)
    return (2.0 / n) * (x_recon - x)


def _check_stochastic(m: np.ndarray, name: str) -> None:
    sums = m.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL) or np.any(m < -ROW_SUM_TOL):
        raise ValueError(f"{name} rows are not stochastic")


def cross_entropy(target: np.ndarray, predicted: np.ndarray) -> float:
    """Mean over rows of -sum_j target_ij * log(predicted_ij + eps).

    ``target`` plays the role of the true distribution; the computation is
    deliberately asymmetric in its arguments.
    """
    target = np.asarray(target)
    predicted = np.asarray(predicted)
    if target.shape != predicted.shape:
        raise ShapeError(f"shape mismatch {target.shape} vs {predicted.shape}")
    _check_stochastic(target, "target")
    _check_stochastic(predicted, "predicted")
    logp = np.log(predicted.astype(np.float64) + LOG_EPS)
    n = max(target.shape[0], 1)
    return float(-np.sum(target.astype(np.float64) * logp) / n)


def cross_entropy_grad(target: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """d cross_entropy / d predicted (per element, before any activation)."""
    if target.shape != predicted.shape:
        raise ShapeError(f"shape mismatch {target.shape} vs {predicted.shape}")
    n = max(target.shape[0], 1)
    return -(target / (predicted + LOG_EPS)) / n


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------

def backprop(layers: list[DenseLayer], x0: np.ndarray, acts: list[np.ndarray],
             out_grad: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Backpropagate through a layer stack.

    ``acts`` must be the post-activation outputs of exactly these layers on
    input ``x0`` and ``out_grad`` the loss gradient w.r.t. acts[-1].  Returns
    (param_grads aligned with [w0, b0, w1, b1, ...], gradient w.r.t. x0).
    """
    if len(acts) != len(layers):
        raise ShapeError("activation list does not match layer stack")
    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(layers))
    g = out_grad
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        g_pre = _activation_backward(layer.activation, acts[i], g)
        inp = acts[i - 1] if i > 0 else x0
        grads[2 * i] = inp.T @ g_pre
        grads[2 * i + 1] = g_pre.sum(axis=0)
        g = g_pre @ layer.weights.T
    return grads, g


def loss_and_gradients(model: Network, x: np.ndarray, loss: tuple
                       ) -> tuple[float, list[np.ndarray]]:
    """Scalar loss and its gradient w.r.t. every weight and bias.

    ``loss`` is ("mse", target) or ("cross_entropy", target); the target is
    compared against the network output.  For denoising setups pass the
    corrupted batch as ``x`` and the clean batch inside the loss spec.
    """
    kind, target = loss
    acts = model.forward(x)
    out = acts[-1]
    if kind == "mse":
        value = mse_loss(target, out)
        g = mse_grad(target, out)
    elif kind == "cross_entropy":
        value = cross_entropy(target, out)
        g = cross_entropy_grad(target, out)
    else:
        raise ValueError(f"unknown loss {kind!r}")
    grads, _ = backprop(model.layers, np.asarray(x), acts, g.astype(out.dtype))
    return value, grads


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

class SGD:
    """Plain gradient descent: p <- p - lr * g."""

    def __init__(self, learning_rate: float):
        if learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        self.learning_rate = learning_rate
        self.step_count = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ShapeError("gradient list does not match parameter list")
        self.step_count += 1
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter {p.shape}")
            p -= (self.learning_rate * g).astype(p.dtype)


class Adam:
    """Adam with bias-corrected first and second moments."""

    def __init__(self, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ShapeError("gradient list does not match parameter list")
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        if len(self._m) != len(params):
            raise ShapeError("parameter list changed between steps")
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(params, grads)):
            if p.shape != g.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter {p.shape}")
            g = g.astype(p.dtype, copy=False)
            self._m[i] = b1 * self._m[i] + (1 - b1) * g
            self._v[i] = b2 * self._v[i] + (1 - b2) * g * g
            m_hat = self._m[i] / (1 - b1 ** t)
            v_hat = self._v[i] / (1 - b2 ** t)
            p -= (self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


def make_optimizer(kind: str, learning_rate: float):
    if kind == "adam":
        return Adam(learning_rate)
    if kind == "sgd":
        return SGD(learning_rate)
    raise ValueError(f"unknown optimizer {kind!r}")


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradientCheckReport:
    """Outcome of an analytic-vs-finite-difference comparison."""

    max_rel_error: float
    per_param_max: list[float]
    flagged: list[int] = field(default_factory=list)
    tol: float = 1e-4

    @property
    def passed(self) -> bool:
        return not self.flagged


def finite_difference_gradients(loss_fn, params: list[np.ndarray],
                                h: float = 1e-4) -> list[np.ndarray]:
    """Central differences of ``loss_fn()`` w.r.t. each entry of ``params``.

    ``loss_fn`` must read the current (mutated in place) parameter values.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p, dtype=np.float64)
        flat_p = p.ravel()
        flat_g = g.ravel()
        for j in range(flat_p.size):
            orig = flat_p[j]
            flat_p[j] = orig + h
            up = loss_fn()
            flat_p[j] = orig - h
            down = loss_fn()
            flat_p[j] = orig
            flat_g[j] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def compare_gradients(analytic: list[np.ndarray], numeric: list[np.ndarray],
                      tol: float = 1e-4, min_denom: float = 1e-4
                      ) -> GradientCheckReport:
    """Elementwise relative error |a - n| / max(|a|, |n|, min_denom).

    The denominator floor keeps near-zero gradients from turning
    finite-difference noise into spurious ratios.
    """
    per_param = []
    flagged = []
    for i, (a, n) in enumerate(zip(analytic, numeric)):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), min_denom)
        rel = np.abs(np.asarray(a, dtype=np.float64) - n) / denom
        worst = float(rel.max()) if rel.size else 0.0
        per_param.append(worst)
        if worst > tol:
            flagged.append(i)
    overall = max(per_param) if per_param else 0.0
    return GradientCheckReport(overall, per_param, flagged, tol)


def gradient_check(model: Network, x: np.ndarray, loss: tuple,
                   h: float = 1e-4, tol: float = 1e-4) -> GradientCheckReport:
    """Check analytic gradients of a model/loss pair against central differences.

    Runs on a float64 copy of the model; at h=1e-4 a float32 evaluation would
    drown the comparison in rounding noise.
    """
    m64 = model.astype(np.float64)
    x64 = np.asarray(x, dtype=np.float64)
    kind, target = loss
    target64 = np.asarray(target, dtype=np.float64)
    _, analytic = loss_and_gradients(m64, x64, (kind, target64))
    loss_of = mse_loss if kind == "mse" else cross_entropy

    def f() -> float:
        return loss_of(target64, m64.reconstruct(x64))

    numeric = finite_difference_gradients(f, m64.parameters(), h)
    return compare_gradients(analytic, numeric, tol)
