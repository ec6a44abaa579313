"""Feed-forward policy trained by behavior cloning.

Everything here is float64 numpy: forward pass, softmax cross-entropy,
hand-written backward pass and an AdamW optimizer.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .representation import ChannelSet

log = logging.getLogger(__name__)

N_ACTIONS = 3


class NonFiniteLoss(FloatingPointError):
    def __init__(self, msg: str, epoch: int | None = None, batch: int | None = None):
        super().__init__(msg)
        self.epoch = epoch
        self.batch = batch


@dataclass
class PolicyNet:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        _check_dims(self.layer_dims)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_dims[k], self.layer_dims[k + 1]) or b.shape != (self.layer_dims[k + 1],):
                raise ValueError(f"layer {k} parameter shapes do not match layer_dims")

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def copy(self) -> "PolicyNet":
        return PolicyNet(list(self.layer_dims), [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    @classmethod
    def from_flat(cls, layer_dims: Sequence[int], flat: np.ndarray) -> "PolicyNet":
        flat = np.asarray(flat, dtype=np.float64)
        ws, bs, k = [], [], 0
        for a, b in zip(layer_dims[:-1], layer_dims[1:]):
            ws.append(flat[k:k + a * b].reshape(a, b))
            k += a * b
            bs.append(flat[k:k + b].copy())
            k += b
        if k != flat.size:
            raise ValueError("flat parameter vector has the wrong length")
        return cls(list(layer_dims), ws, bs)


def _check_dims(dims: Sequence[int]) -> None:
    if len(dims) < 2 or any(int(d) < 1 for d in dims):
        raise ValueError(f"invalid layer dims {dims}")
    if dims[-1] != N_ACTIONS:
        raise ValueError(f"output dimension must be {N_ACTIONS}, got {dims[-1]}")


def init(layer_dims: Sequence[int], seed: int) -> PolicyNet:
    """Uniform(+-sqrt(6 / fan_in)) weights, zero biases."""
    dims = [int(d) for d in layer_dims]
    _check_dims(dims)
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / fan_in)
        ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return PolicyNet(dims, ws, bs)


def _forward_cache(net: PolicyNet, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if k == last else np.maximum(z, 0.0)
        acts.append(h)
    return pre, acts


def forward(net: PolicyNet, x: np.ndarray) -> np.ndarray:
    """Logits for one feature vector (shape (3,)) or a batch (shape (n, 3))."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.layer_dims[0]:
        raise ValueError(f"expected {net.layer_dims[0]} features, got {x.shape[-1]}")
    single = x.ndim == 1
    _, acts = _forward_cache(net, x[None] if single else x)
    return acts[-1][0] if single else acts[-1]


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    s = z - m
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def loss_and_grad(net: PolicyNet, x: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy over the batch and its gradient, ordered like ``net.params``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or len(x) == 0 or len(x) != len(y):
        raise ValueError("need a non-empty batch with one label per row")
    if x.shape[1] != net.layer_dims[0]:
        raise ValueError(f"expected {net.layer_dims[0]} features, got {x.shape[1]}")
    n = len(x)
    pre, acts = _forward_cache(net, x)
    logp = log_softmax(acts[-1])
    loss = float(-logp[np.arange(n), y].mean())
    if not np.isfinite(loss):
        raise NonFiniteLoss("loss is not finite")
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.weights)
    for k in range(len(net.weights) - 1, -1, -1):
        grads_w[k] = acts[k].T @ delta
        grads_b[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ net.weights[k].T) * (pre[k - 1] > 0)
    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads += [gw, gb]
    return loss, grads


@dataclass
class OptimizerState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4

    @classmethod
    def for_net(cls, net: PolicyNet, **hyper) -> "OptimizerState":
        return cls([np.zeros_like(p) for p in net.params], [np.zeros_like(p) for p in net.params], **hyper)


def adamw_step(net: PolicyNet, grads: Sequence[np.ndarray], state: OptimizerState) -> None:
    """One in-place AdamW update; decay acts on the parameter, not the gradient."""
    params = net.params
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ValueError("gradient shapes do not match parameters")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        if state.weight_decay:
            p -= state.lr * state.weight_decay * p
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def predict_action(net: PolicyNet, features: np.ndarray) -> int | np.ndarray:
    """Argmax action; ``np.argmax`` already resolves ties to the lowest index."""
    logits = forward(net, features)
    return int(np.argmax(logits)) if logits.ndim == 1 else np.argmax(logits, axis=1)


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 200
    lr: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 0
    val_fraction: float = 0.1
    hidden: tuple[int, ...] = (128, 64)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_accuracy: float | None = None
    wall_clock: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([seed, 1])
    perm = rng.permutation(n)
    n_val = int(round(val_fraction * n)) if n > 1 else 0
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train_arrays(x: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> tuple[PolicyNet, TrainReport]:
    """Minibatch AdamW on a feature matrix; deterministic for a fixed ``cfg.seed``."""
    if len(x) == 0:
        raise ValueError("cannot train on an empty dataset")
    t0 = time.perf_counter()
    tr, va = split_indices(len(x), cfg.val_fraction, cfg.seed)
    net = init([x.shape[1], *cfg.hidden, N_ACTIONS], cfg.seed)
    opt = OptimizerState.for_net(net, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps,
                                 weight_decay=cfg.weight_decay)
    rng = np.random.default_rng([cfg.seed, 2])
    report = TrainReport(seed=cfg.seed)
    for epoch in range(cfg.epochs):
        order = tr[rng.permutation(len(tr))]
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            try:
                loss, grads = loss_and_grad(net, x[idx], y[idx])
            except NonFiniteLoss:
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch} batch {b}", epoch, b) from None
            adamw_step(net, grads, opt)
        # epoch metrics after the last update
        logits = forward(net, x[tr])
        pred = np.argmax(logits, axis=1)
        correct = int((pred == y[tr]).sum())
        ep_loss = float(-log_softmax(logits)[np.arange(len(tr)), y[tr]].mean())
        report.train_loss.append(ep_loss)
        report.train_accuracy.append(correct / len(tr))
        log.debug("epoch %d loss %.4f acc %.4f", epoch, ep_loss, correct / len(tr))
    if len(va):
        report.val_accuracy = float((predict_action(net, x[va]) == y[va]).mean())
    report.wall_clock = time.perf_counter() - t0
    return net, report


def train(dataset, channels: ChannelSet, cfg: TrainConfig, max_range: float = 5.0) -> tuple[PolicyNet, TrainReport]:
    """Behavior cloning on a ``DemoDataset`` under the given channel set."""
    from .representation import dataset_features

    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    x = dataset_features(dataset, channels, max_range)
    return train_arrays(x, dataset.action, cfg)


def checkpoint_dict(net: PolicyNet, channels: ChannelSet, cfg: TrainConfig, seed: int | None = None) -> dict:
    return {
        "layer_dims": list(net.layer_dims),
        "channels": channels.to_dict(),
        "params": [repr(float(v)) for v in net.flat()],
        "seed": cfg.seed if seed is None else seed,
        "config": cfg.to_dict(),
    }


def save_checkpoint(path, net: PolicyNet, channels: ChannelSet, cfg: TrainConfig) -> None:
    with open(path, "w") as f:
        json.dump(checkpoint_dict(net, channels, cfg), f)


def load_checkpoint(path) -> tuple[PolicyNet, ChannelSet, TrainConfig]:
    with open(path) as f:
        d = json.load(f)
    net = PolicyNet.from_flat(d["layer_dims"], np.array([float(v) for v in d["params"]]))
    return net, ChannelSet(**d["channels"]), TrainConfig.from_dict(d["config"])
