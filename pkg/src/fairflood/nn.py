"""Differentiable building blocks for the debiasing network.

Dense, batch-norm and dropout layers, ReLU/softplus activations, MSE and
cross-entropy losses, gradient reversal, Adam, and a reduce-on-plateau LR
scheduler. Everything is float64 numpy with hand-derived backward passes;
the test suite cross-checks every backward pass against central finite
differences. Stochastic pieces (weight init, dropout masks, shuffling) draw
from named :class:`RngStreams` so runs are bit-reproducible per seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError

__all__ = [
    "RngStreams",
    "as_matrix",
    "Dense",
    "BatchNorm",
    "Dropout",
    "Relu",
    "Softplus",
    "Sequential",
    "grl_backward",
    "softmax",
    "mse_loss",
    "cross_entropy_loss",
    "Adam",
    "PlateauScheduler",
    "FiniteDiffReport",
    "finite_diff_check",
]


def as_matrix(x, name="x"):
    """Coerce to a finite, 2-D float64 array or raise ValueError."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


class RngStreams:
    """Named, independently seeded deterministic generators.

    The same (seed, name) pair always yields the same sequence, and distinct
    names give independent streams, so e.g. dropout draws never perturb
    weight initialization. Repeated ``stream(name)`` calls return the same
    generator object (the stream continues rather than restarting).
    """

    def __init__(self, seed):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = seed
        self._streams = {}

    def stream(self, name: str) -> np.random.Generator:
        if name not in self._streams:
            digest = hashlib.sha256(name.encode("utf-8")).digest()
            key = int.from_bytes(digest[:8], "little")
            seq = np.random.SeedSequence([self.seed, key])
            self._streams[name] = np.random.default_rng(seq)
        return self._streams[name]


class Dense:
    """Affine layer ``y = x @ W + b`` with the input cached for backward."""

    def __init__(self, in_dim, out_dim):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be positive")
        self.weight = np.zeros((self.in_dim, self.out_dim))
        self.bias = np.zeros(self.out_dim)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._x = None

    def init_he_uniform(self, rng):
        """He-uniform weights, zero biases (fan-in scaled, for ReLU stacks)."""
        limit = np.sqrt(6.0 / self.in_dim)
        self.weight[...] = rng.uniform(-limit, limit, self.weight.shape)
        self.bias[...] = 0.0

    def forward(self, x, train=False):
        if x.shape[1] != self.in_dim:
            raise ValueError(
                f"expected {self.in_dim} input columns, got {x.shape[1]}")
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, grad_out):
        if self._x is None:
            raise RuntimeError("backward called before forward")
        if grad_out.shape != (self._x.shape[0], self.out_dim):
            raise ValueError("grad_out shape does not match forward output")
        self.grad_weight[...] = self._x.T @ grad_out
        self.grad_bias[...] = grad_out.sum(axis=0)
        return grad_out @ self.weight.T

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}

    def state(self):
        return {}


class BatchNorm:
    """Batch normalization over a 2-D (batch, features) input.

    Train mode normalizes by batch statistics (population variance) and
    updates running statistics with momentum; inference mode normalizes by
    the running statistics. ``freeze_stats`` suppresses the running-stat
    update so a train-mode forward becomes a pure function of its inputs,
    which the finite-difference checks rely on.
    """

    def __init__(self, dim, momentum=0.1, epsilon=1e-5):
        if not 0.0 <= momentum <= 1.0:
            raise ValueError("momentum must be in [0, 1]")
        if epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        self.dim = int(dim)
        self.momentum = float(momentum)
        self.epsilon = float(epsilon)
        self.scale = np.ones(self.dim)
        self.shift = np.zeros(self.dim)
        self.running_mean = np.zeros(self.dim)
        self.running_var = np.ones(self.dim)
        self.grad_scale = np.zeros_like(self.scale)
        self.grad_shift = np.zeros_like(self.shift)
        self.freeze_stats = False
        self._xhat = None
        self._var = None
        self._train_mode = False

    def forward(self, x, train=False):
        if x.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} columns, got {x.shape[1]}")
        if train:
            if x.shape[0] < 2:
                raise ValueError("batchnorm requires batch size >= 2 in train mode")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            if not self.freeze_stats:
                m = self.momentum
                self.running_mean[...] = (1.0 - m) * self.running_mean + m * mean
                self.running_var[...] = (1.0 - m) * self.running_var + m * var
            self._xhat = (x - mean) / np.sqrt(var + self.epsilon)
            self._var = var
            self._train_mode = True
        else:
            self._xhat = (x - self.running_mean) / np.sqrt(
                self.running_var + self.epsilon)
            self._train_mode = False
        return self.scale * self._xhat + self.shift

    def backward(self, grad_out):
        if self._xhat is None:
            raise RuntimeError("backward called before forward")
        xhat = self._xhat
        self.grad_scale[...] = (grad_out * xhat).sum(axis=0)
        self.grad_shift[...] = grad_out.sum(axis=0)
        if not self._train_mode:
            return grad_out * self.scale / np.sqrt(self.running_var + self.epsilon)
        n = grad_out.shape[0]
        dxhat = grad_out * self.scale
        return (
            n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        ) / (n * np.sqrt(self._var + self.epsilon))

    def params(self):
        return {"scale": self.scale, "shift": self.shift}

    def grads(self):
        return {"scale": self.grad_scale, "shift": self.grad_shift}

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class Dropout:
    """Inverted dropout: masks scale by 1/(1-p) at train time, inference is
    the identity. ``freeze_mask`` reuses the last drawn mask so a forward
    pass can be made deterministic for gradient checking."""

    def __init__(self, p, rng=None):
        if not 0.0 <= p < 1.0:
            raise ValueError("drop probability must be in [0, 1)")
        self.p = float(p)
        self.rng = rng
        self.mask = None
        self.freeze_mask = False
        self._mask_used = None

    def forward(self, x, train=False):
        if not train or self.p == 0.0:
            self._mask_used = None
            return x
        if self.freeze_mask and self.mask is not None and self.mask.shape == x.shape:
            mask = self.mask
        else:
            if self.rng is None:
                raise RuntimeError("train-mode dropout requires an rng stream")
            mask = (self.rng.random(x.shape) >= self.p) / (1.0 - self.p)
            self.mask = mask
        self._mask_used = mask
        return x * mask

    def backward(self, grad_out):
        if self._mask_used is None:
            return grad_out
        return grad_out * self._mask_used

    def params(self):
        return {}

    def grads(self):
        return {}

    def state(self):
        return {}


class Relu:
    def __init__(self):
        self._active = None

    def forward(self, x, train=False):
        self._active = x > 0.0
        return np.where(self._active, x, 0.0)

    def backward(self, grad_out):
        if self._active is None:
            raise RuntimeError("backward called before forward")
        return grad_out * self._active

    def params(self):
        return {}

    def grads(self):
        return {}

    def state(self):
        return {}


def _sigmoid(x):
    # evaluated via exp(-|x|) to stay finite for large |x|
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


class Softplus:
    """Smooth positivity constraint ``log(1 + exp(x))`` for the output head."""

    def __init__(self):
        self._x = None

    def forward(self, x, train=False):
        self._x = x
        return np.logaddexp(0.0, x)

    def backward(self, grad_out):
        if self._x is None:
            raise RuntimeError("backward called before forward")
        return grad_out * _sigmoid(self._x)

    def params(self):
        return {}

    def grads(self):
        return {}

    def state(self):
        return {}


class Sequential:
    """A simple layer chain with prefixed parameter names."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def _collect(self, getter):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in getter(layer).items():
                out[f"{i}.{name}"] = arr
        return out

    def params(self):
        return self._collect(lambda l: l.params())

    def grads(self):
        return self._collect(lambda l: l.grads())

    def state(self):
        return self._collect(lambda l: l.state())


def grl_backward(grad_out, lam):
    """Gradient reversal: the forward pass is the identity (no op needed);
    the backward pass multiplies the upstream gradient by ``-lam``."""
    if lam < 0.0:
        raise ValueError("lambda must be non-negative")
    return -lam * grad_out


def softmax(logits):
    """Row-wise softmax, stabilized by max subtraction."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mse_loss(pred, target):
    """Mean squared error and its gradient with respect to ``pred``.

    Both arguments are single-column matrices; returns
    ``loss = mean((y - yhat)^2)`` and ``grad = (2/N)(yhat - y)``.
    """
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.ndim != 2 or pred.shape[1] != 1:
        raise ValueError("mse_loss expects single-column matrices")
    n = pred.shape[0]
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = (2.0 / n) * diff
    return loss, grad


def cross_entropy_loss(logits, labels):
    """Softmax cross-entropy averaged over the batch.

    ``labels`` are integer class indices in [0, K). Returns the loss in nats
    and ``grad = (softmax(logits) - onehot) / N``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError("logits must be 2-D")
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError("labels must be a vector matching the batch size")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(logsumexp - shifted[np.arange(n), labels]))
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad


class Adam:
    """Classic Adam with bias correction; weight decay is coupled into the
    gradient as an L2 term. Parameter arrays are updated in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 weight_decay=0.0, lr_scales=None):
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        # per-parameter-group learning-rate multipliers, keyed by name prefix
        self.lr_scales = dict(lr_scales or {})
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in self.params.items()}

    def _lr_for(self, key):
        for prefix, scale in self.lr_scales.items():
            if key.startswith(prefix):
                return self.lr * scale
        return self.lr

    def step(self, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for key, p in self.params.items():
            g = grads[key]
            if g.shape != p.shape:
                raise ValueError(f"gradient shape mismatch for {key!r}")
            if self.weight_decay != 0.0:
                g = g + self.weight_decay * p
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self._lr_for(key) * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


class PlateauScheduler:
    """Halve the learning rate when the monitored value stops improving.

    An improvement means dropping below ``best * (1 - threshold)``. After
    ``patience`` consecutive non-improving steps the rate is multiplied by
    ``factor`` (floored at ``min_lr``) and the counter resets, so e.g. 11
    equal values trigger exactly one reduction with patience 10.
    """

    def __init__(self, lr, factor=0.5, patience=10, threshold=1e-4, min_lr=0.0):
        if not 0.0 < factor < 1.0:
            raise ValueError("factor must be in (0, 1)")
        self.lr = float(lr)
        self.factor = float(factor)
        self.patience = int(patience)
        self.threshold = float(threshold)
        self.min_lr = float(min_lr)
        self.best = None
        self.bad_steps = 0

    def step(self, monitored):
        monitored = float(monitored)
        if not np.isfinite(monitored):
            raise NumericError("scheduler monitored value is not finite")
        if self.best is None or monitored < self.best * (1.0 - self.threshold):
            self.best = monitored
            self.bad_steps = 0
        else:
            self.bad_steps += 1
            if self.bad_steps >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.bad_steps = 0
        return self.lr


@dataclass
class FiniteDiffReport:
    """Per-parameter maximum relative errors from a gradient check."""

    rel_tol: float
    per_param: dict = field(default_factory=dict)

    @property
    def max_rel_error(self):
        return max(self.per_param.values()) if self.per_param else 0.0

    @property
    def worst_param(self):
        if not self.per_param:
            return None
        return max(self.per_param, key=self.per_param.get)

    @property
    def passed(self):
        return self.max_rel_error < self.rel_tol


def finite_diff_check(loss_and_grads, params, rel_tol=1e-4, step=1e-5,
                      max_coords_per_param=None, rng=None):
    """Compare analytic gradients against central finite differences.

    ``loss_and_grads`` is a zero-argument callable returning
    ``(loss, grads)`` where ``grads`` maps the same keys as ``params`` to
    arrays. It must be a pure function of the parameter values: dropout
    masks frozen, batchnorm running-stat updates frozen. Parameters are
    perturbed in place with ``h = step * (1 + |theta|)`` and restored.

    Raises :class:`NumericError` if two identical calls disagree (the
    forward pass is not deterministic).
    """
    loss_a, analytic = loss_and_grads()
    loss_b, _ = loss_and_grads()
    if loss_a != loss_b:
        raise NumericError(
            "forward pass is not deterministic: "
            f"{loss_a!r} != {loss_b!r} on identical calls")

    report = FiniteDiffReport(rel_tol=rel_tol)
    for name, arr in params.items():
        grad = analytic[name]
        if grad.shape != arr.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        size = arr.size
        if max_coords_per_param is not None and size > max_coords_per_param:
            if rng is None:
                raise ValueError("coordinate subsampling requires an rng")
            coords = rng.choice(size, size=max_coords_per_param, replace=False)
        else:
            coords = range(size)
        worst = 0.0
        flat = arr.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for i in coords:
            orig = flat[i]
            h = step * (1.0 + abs(orig))
            flat[i] = orig + h
            loss_plus, _ = loss_and_grads()
            flat[i] = orig - h
            loss_minus, _ = loss_and_grads()
            flat[i] = orig
            fd = (loss_plus - loss_minus) / (2.0 * h)
            denom = max(abs(gflat[i]), abs(fd), 1e-8)
            worst = max(worst, abs(gflat[i] - fd) / denom)
        report.per_param[name] = worst
    return report
