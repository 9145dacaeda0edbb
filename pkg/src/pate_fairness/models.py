"""Differentiable classifiers, losses, and the regularized-ERM trainer.

Two architectures are supported:

* ``logreg`` -- binary logistic regression with a single weight vector
  (sigmoid head) when there are two classes, multinomial softmax with a
  (C, d) weight matrix otherwise. No bias term: the pipeline standardizes
  inputs and the synthetic boundaries pass through the origin.
* ``mlp2`` -- two hidden ReLU layers followed by a softmax head.

All losses are cross-entropy computed from logits, so one-hot soft targets
reproduce the hard-label loss exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

ARCHS = ("logreg", "mlp2")


@dataclass(frozen=True)
class ModelParams:
    arch: str
    feature_dim: int
    num_classes: int
    shapes: tuple[tuple[int, ...], ...]
    values: np.ndarray  # flat float64 parameter vector

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        expected = sum(int(np.prod(s)) for s in self.shapes)
        if v.size != expected:
            raise ValueError(f"parameter count {v.size} != {expected} from shapes")
        if not np.all(np.isfinite(v)):
            raise ValueError("parameters contain NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "shapes", tuple(tuple(s) for s in self.shapes))

    def with_values(self, values: np.ndarray) -> "ModelParams":
        return ModelParams(self.arch, self.feature_dim, self.num_classes,
                           self.shapes, values)

    def layers(self) -> list[np.ndarray]:
        out, off = [], 0
        for s in self.shapes:
            size = int(np.prod(s))
            out.append(self.values[off:off + size].reshape(s))
            off += size
        return out


@dataclass(frozen=True)
class TrainConfig:
    lam: float
    optimizer: str = "gd"  # "gd" (full batch) or "sgd"
    lr: float | None = None  # None: auto step from curvature (gd only)
    batch_size: int = 32
    max_iter: int = 200_000
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.optimizer not in ("gd", "sgd"):
            raise ValueError("optimizer must be 'gd' or 'sgd'")
        if self.lr is not None and self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")


def init_params(arch: str, feature_dim: int, num_classes: int,
                hidden=(16, 16), rng=None) -> ModelParams:
    """Deterministic initial parameters: zeros for logreg, scaled-uniform for mlp2."""
    if arch == "logreg":
        if num_classes == 2:
            shapes = ((feature_dim,),)
        else:
            shapes = ((num_classes, feature_dim),)
        values = np.zeros(sum(int(np.prod(s)) for s in shapes))
        return ModelParams(arch, feature_dim, num_classes, shapes, values)
    if arch == "mlp2":
        h1, h2 = hidden
        shapes = ((h1, feature_dim), (h1,), (h2, h1), (h2,), (num_classes, h2),
                  (num_classes,))
        if rng is None:
            rng = np.random.default_rng(0)
        chunks = []
        for s in shapes:
            if len(s) == 2:
                bound = math.sqrt(6.0 / (s[1] + s[0]))
                chunks.append(rng.uniform(-bound, bound, size=int(np.prod(s))))
            else:
                chunks.append(np.zeros(int(np.prod(s))))
        return ModelParams(arch, feature_dim, num_classes, shapes,
                           np.concatenate(chunks))
    raise ValueError(f"unknown architecture {arch!r}")


def _as_batch(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X[None, :] if X.ndim == 1 else X


def logits(p: ModelParams, X) -> np.ndarray:
    """(n, C) logit matrix."""
    X = _as_batch(X)
    if X.shape[1] != p.feature_dim:
        raise ValueError(f"feature dim {X.shape[1]} != model dim {p.feature_dim}")
    if p.arch == "logreg":
        if p.num_classes == 2:
            (w,) = p.layers()
            z1 = X @ w
            return np.column_stack([np.zeros_like(z1), z1])
        (W,) = p.layers()
        return X @ W.T
    W1, b1, W2, b2, W3, b3 = p.layers()
    a1 = np.maximum(X @ W1.T + b1, 0.0)
    a2 = np.maximum(a1 @ W2.T + b2, 0.0)
    return a2 @ W3.T + b3


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(p: ModelParams, x) -> np.ndarray:
    """Class-probability vector(s) for one sample or a batch."""
    probs = _softmax(logits(p, x))
    return probs[0] if np.asarray(x).ndim == 1 else probs


def _target_matrix(targets, n: int, num_classes: int) -> np.ndarray:
    """Hard labels or soft probability rows as an (n, C) matrix."""
    t = np.asarray(targets)
    if t.ndim <= 1 and (t.size == 0 or np.issubdtype(t.dtype, np.integer)):
        onehot = np.zeros((n, num_classes))
        if t.size:
            onehot[np.arange(n), t] = 1.0
        return onehot
    t = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if t.shape != (n, num_classes):
        raise ValueError("soft targets must be (n, num_classes)")
    if (t < 0).any() or np.abs(t.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("soft targets must be probability vectors")
    return t


def loss(p: ModelParams, X, targets, lam: float = 0.0) -> float:
    """Mean cross-entropy against hard or soft targets, plus lam * ||theta||^2.

    A soft target weights the per-class losses by its entries, so a one-hot
    row is exactly the hard-label loss.
    """
    X = _as_batch(X)
    reg = lam * float(p.values @ p.values)
    if len(X) == 0:
        return reg
    z = logits(p, X)
    t = _target_matrix(targets, len(X), p.num_classes)
    lse = np.log(np.exp(z - z.max(axis=1, keepdims=True)).sum(axis=1)) \
        + z.max(axis=1)
    per_class = lse[:, None] - z  # -log softmax_c
    return float((t * per_class).sum(axis=1).mean()) + reg


def gradient(p: ModelParams, X, targets, lam: float = 0.0) -> np.ndarray:
    """Flat gradient of the regularized mean loss; empty batch gives 2*lam*theta."""
    X = _as_batch(X)
    reg = 2.0 * lam * p.values
    if len(X) == 0:
        return reg.copy()
    t = _target_matrix(targets, len(X), p.num_classes)
    if p.arch == "logreg":
        dz = _softmax(logits(p, X)) - t
        if p.num_classes == 2:
            g = dz[:, 1] @ X / len(X)
        else:
            g = (dz.T @ X / len(X)).ravel()
        return g + reg
    W1, b1, W2, b2, W3, b3 = p.layers()
    z1 = X @ W1.T + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ W2.T + b2
    a2 = np.maximum(z2, 0.0)
    dz3 = (_softmax(a2 @ W3.T + b3) - t) / len(X)
    gW3 = dz3.T @ a2
    gb3 = dz3.sum(axis=0)
    da2 = dz3 @ W3
    dz2 = da2 * (z2 > 0)
    gW2 = dz2.T @ a1
    gb2 = dz2.sum(axis=0)
    dz1 = (dz2 @ W2) * (z1 > 0)
    gW1 = dz1.T @ X
    gb1 = dz1.sum(axis=0)
    flat = np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2, gW3.ravel(), gb3])
    return flat + reg


def predict(p: ModelParams, X) -> np.ndarray:
    return np.argmax(logits(p, _as_batch(X)), axis=1)


def zero_one_loss(p: ModelParams, X, targets) -> float:
    """Misclassification rate against the target's argmax (evaluation only)."""
    X = _as_batch(X)
    t = np.asarray(targets)
    labels = t if t.ndim == 1 else np.argmax(t, axis=1)
    return float(np.mean(predict(p, X) != labels))


def _gd_step_size(p: ModelParams, X, lam: float) -> float:
    # Logistic curvature is at most 0.25 ||x||^2 per sample (0.5 for the
    # softmax head); the regularizer adds 2*lam. Step 2/(mu+beta) with
    # mu = 2*lam is the classic optimal fixed step.
    scale = 0.25 if p.num_classes == 2 else 0.5
    beta = scale * float((X * X).sum(axis=1).mean()) + 2.0 * lam if len(X) else 2.0 * lam
    mu = 2.0 * lam
    return 2.0 / (mu + beta)


def train_erm(X, targets, cfg: TrainConfig, init: ModelParams) -> ModelParams:
    """Minimize mean loss + lam * ||theta||^2.

    logreg + "gd": full-batch gradient descent to the gradient-norm
    tolerance (requires lam > 0 for strong convexity; the minimizer is
    unique). Otherwise SGD with a fixed epoch budget, deterministic given
    cfg.seed.
    """
    X = _as_batch(X)
    if cfg.optimizer == "gd":
        if init.arch == "logreg" and cfg.lam <= 0:
            raise ValueError("full-batch logreg training requires lam > 0")
        step = cfg.lr if cfg.lr is not None else _gd_step_size(init, X, cfg.lam)
        theta = init.values.copy()
        p = init
        for _ in range(cfg.max_iter):
            g = gradient(p, X, targets, cfg.lam)
            gnorm = float(np.linalg.norm(g))
            if gnorm <= cfg.tol:
                return p
            theta = theta - step * g
            p = init.with_values(theta)
        g = gradient(p, X, targets, cfg.lam)
        raise ConvergenceError(
            f"gradient norm {np.linalg.norm(g):.3e} > tol {cfg.tol:.1e} "
            f"after {cfg.max_iter} iterations", grad_norm=float(np.linalg.norm(g)))

    # SGD: fixed budget of max_iter epochs over shuffled minibatches.
    gen = np.random.default_rng(cfg.seed)
    t = _target_matrix(targets, len(X), init.num_classes)
    p = init
    for _ in range(cfg.max_iter):
        order = gen.permutation(len(X))
        for start in range(0, len(X), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            g = gradient(p, X[idx], t[idx], cfg.lam)
            p = p.with_values(p.values - (cfg.lr or 1e-4) * g)
    return p


@dataclass(frozen=True)
class DecomposableLoss:
    """Loss split as z(h_theta(x)) + c * y * h_theta(x)."""

    h: callable  # (theta, x) -> float
    c: float
    z: callable  # float -> float

    def reconstruct(self, theta: np.ndarray, x: np.ndarray, y: int) -> float:
        hv = self.h(theta, x)
        return self.z(hv) + self.c * y * hv


def logistic_decomposition() -> DecomposableLoss:
    """Binary logistic loss with h = -theta.x, c = 1, z(h) = log(1 + e^h) - h."""
    return DecomposableLoss(
        h=lambda theta, x: float(-np.dot(theta, x)),
        c=1.0,
        z=lambda h: float(np.logaddexp(0.0, h) - h),
    )


def to_json(p: ModelParams) -> str:
    return json.dumps({
        "arch": p.arch,
        "feature_dim": p.feature_dim,
        "num_classes": p.num_classes,
        "shapes": [list(s) for s in p.shapes],
        "values": p.values.tolist(),
    })


def from_json(text: str) -> ModelParams:
    obj = json.loads(text)
    return ModelParams(obj["arch"], obj["feature_dim"], obj["num_classes"],
                       tuple(tuple(s) for s in obj["shapes"]),
                       np.asarray(obj["values"], dtype=np.float64))
