"""Small feed-forward MLP engine in numpy: Xavier init, manual backprop,
MAE loss, Adam with a step learning-rate schedule, inverted dropout and a
finite-difference gradient check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "relu"
    dropout_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "activation", self.activation.lower())
        if self.input_dim < 1 or self.output_dim < 1 or not self.hidden or min(self.hidden) < 1:
            raise ValueError(f"invalid layer sizes in {self}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}, got {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def dims(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.output_dim]


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 8e-3
    epochs: int = 1000
    batch_size: int = 256
    scheduler_gamma: float = 0.975
    scheduler_step: int = 30
    seed: int = 0
    loss: str = "MAE"

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if not 0 < self.scheduler_gamma <= 1:
            raise ValueError("scheduler_gamma must lie in (0, 1]")
        if self.batch_size < 1 or self.scheduler_step < 1 or self.epochs < 0:
            raise ValueError("batch_size and scheduler_step must be >= 1, epochs >= 0")
        if self.loss.upper() != "MAE":
            raise ValueError("only the MAE loss is supported")


@dataclass
class LearningCurves:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)


@dataclass
class Mlp:
    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "Mlp":
        return Mlp(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)

    def to_dict(self) -> dict:
        """JSON-ready form; floats stored as hex strings so reloads are bit-exact."""
        spec = asdict(self.spec)
        spec["hidden"] = list(spec["hidden"])
        return {
            "spec": spec,
            "weights": [[[float(v).hex() for v in row] for row in w] for w in self.weights],
            "biases": [[float(v).hex() for v in b] for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        spec = MlpSpec(**d["spec"])
        weights = [np.array([[float.fromhex(v) for v in row] for row in w]) for w in d["weights"]]
        biases = [np.array([float.fromhex(v) for v in b]) for b in d["biases"]]
        return cls(spec, weights, biases)


def init_mlp(spec: MlpSpec, seed: int = 0) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    dims = spec.dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = xavier_limit(fan_in, fan_out)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(spec, weights, biases)


def xavier_limit(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(name, z):
    if name == "relu":
        return (z > 0).astype(z.dtype)
    t = np.tanh(z)
    return 1.0 - t * t


def _dropout_masks(mlp: Mlp, n_rows: int, rng: np.random.Generator) -> list[np.ndarray]:
    p = mlp.spec.dropout_rate
    keep = 1.0 - p
    return [(rng.random((n_rows, h)) >= p) / keep for h in mlp.spec.hidden]


def _forward_cache(mlp: Mlp, x: np.ndarray, masks=None):
    zs, acts = [], [x]
    a = x
    n_layers = len(mlp.weights)
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w + b
        if i == n_layers - 1:
            zs.append(z)
            acts.append(z)
            break
        a = _act(mlp.spec.activation, z)
        if masks is not None:
            a = a * masks[i]
        zs.append(z)
        acts.append(a)
    return zs, acts


def _check_batch(mlp: Mlp, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != mlp.spec.input_dim:
        raise ValueError(f"batch shape {x.shape} incompatible with input_dim {mlp.spec.input_dim}")
    return x


def forward(mlp: Mlp, batch, train_mode: bool = False, seed: int = 0) -> np.ndarray:
    x = _check_batch(mlp, batch)
    masks = None
    if train_mode and mlp.spec.dropout_rate > 0:
        masks = _dropout_masks(mlp, x.shape[0], np.random.default_rng(seed))
    return _forward_cache(mlp, x, masks)[1][-1]


def mae_loss(pred, target) -> float:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    return float(np.mean(np.abs(p - t)))


def _mae_grad(pred, target):
    # sign(0) == 0 is the chosen subgradient
    return np.sign(pred - target) / pred.size


def _backward(mlp: Mlp, zs, acts, masks, grad_out):
    n_layers = len(mlp.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    delta = grad_out
    for i in range(n_layers - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i == 0:
            break
        da = delta @ mlp.weights[i].T
        if masks is not None:
            da = da * masks[i - 1]
        delta = da * _act_grad(mlp.spec.activation, zs[i - 1])
    return gw, gb


def loss_and_grads(mlp: Mlp, x, y, masks=None):
    """MAE loss on (x, y) and its gradients w.r.t. every weight and bias."""
    zs, acts = _forward_cache(mlp, x, masks)
    pred = acts[-1]
    gw, gb = _backward(mlp, zs, acts, masks, _mae_grad(pred, y))
    return mae_loss(pred, y), gw, gb


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return config.lr0 * config.scheduler_gamma ** (epoch // config.scheduler_step)


def train(mlp: Mlp, train_xy, val_xy, config: TrainConfig) -> tuple[Mlp, LearningCurves]:
    """Mini-batch Adam on the MAE loss; returns the final-epoch network.

    ``train_xy`` and ``val_xy`` are ``(X, Y)`` pairs, already scaled.
    ``val_xy`` may be None, in which case validation losses are NaN.
    """
    x, y = (np.asarray(a, dtype=np.float64) for a in train_xy)
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    x = _check_batch(mlp, x)
    if y.ndim == 1:
        y = y[:, None]
    if val_xy is not None and len(val_xy[0]):
        xv = _check_batch(mlp, val_xy[0])
        yv = np.asarray(val_xy[1], dtype=np.float64).reshape(xv.shape[0], -1)
    else:
        xv = yv = None

    net = mlp.copy()
    curves = LearningCurves()
    m_w = [np.zeros_like(w) for w in net.weights]
    v_w = [np.zeros_like(w) for w in net.weights]
    m_b = [np.zeros_like(b) for b in net.biases]
    v_b = [np.zeros_like(b) for b in net.biases]
    n = x.shape[0]
    bs = config.batch_size
    use_dropout = net.spec.dropout_rate > 0
    t = 0
    for epoch in range(config.epochs):
        lr = lr_at_epoch(config, epoch)
        perm = np.random.default_rng([config.seed, epoch]).permutation(n)
        drop_rng = np.random.default_rng([config.seed, epoch, 1]) if use_dropout else None
        for start in range(0, n, bs):
            idx = perm[start:start + bs]
            xb, yb = x[idx], y[idx]
            masks = _dropout_masks(net, len(idx), drop_rng) if use_dropout else None
            _, gw, gb = loss_and_grads(net, xb, yb, masks)
            t += 1
            c1 = 1.0 - ADAM_BETA1 ** t
            c2 = 1.0 - ADAM_BETA2 ** t
            for params, grads, ms, vs in ((net.weights, gw, m_w, v_w), (net.biases, gb, m_b, v_b)):
                for k in range(len(params)):
                    g = grads[k]
                    ms[k] *= ADAM_BETA1
                    ms[k] += (1.0 - ADAM_BETA1) * g
                    vs[k] *= ADAM_BETA2
                    vs[k] += (1.0 - ADAM_BETA2) * g * g
                    params[k] -= lr * (ms[k] / c1) / (np.sqrt(vs[k] / c2) + ADAM_EPS)
        curves.train_loss.append(mae_loss(_forward_cache(net, x)[1][-1], y))
        curves.val_loss.append(
            mae_loss(_forward_cache(net, xv)[1][-1], yv) if xv is not None else float("nan")
        )
    return net, curves


def gradient_check(mlp: Mlp, batch, eps: float = 1e-6) -> float:
    """Largest relative gap between backprop and central-difference gradients.

    ``batch`` is an ``(X, Y)`` pair; the network is evaluated without dropout.
    Each entry contributes ``|g_bp - g_fd| / max(1e-12, |g_bp| + |g_fd|)``.
    Entries where both gradients sit inside the finite-difference roundoff band
    (MAE sign terms cancelling to zero) count as agreeing.
    """
    x = _check_batch(mlp, batch[0])
    y = np.asarray(batch[1], dtype=np.float64).reshape(x.shape[0], -1)
    loss, gw, gb = loss_and_grads(mlp, x, y)
    roundoff = 8 * np.finfo(np.float64).eps * max(1.0, abs(loss)) / eps
    net = mlp.copy()
    worst = 0.0
    for params, grads in ((net.weights, gw), (net.biases, gb)):
        for p, g in zip(params, grads):
            flat = p.reshape(-1)
            gflat = g.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + eps
                up = mae_loss(_forward_cache(net, x)[1][-1], y)
                flat[j] = orig - eps
                down = mae_loss(_forward_cache(net, x)[1][-1], y)
                flat[j] = orig
                fd = (up - down) / (2 * eps)
                if abs(gflat[j]) <= roundoff and abs(fd) <= roundoff:
                    continue
                dev = abs(gflat[j] - fd) / max(1e-12, abs(gflat[j]) + abs(fd))
                worst = max(worst, dev)
    return worst
