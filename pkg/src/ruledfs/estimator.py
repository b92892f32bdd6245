"""Feed-forward value network that replaces the oracle scoring loop.

The network maps an encoded partial observation to per-feature estimates of
the uncertainty that would remain after acquiring each feature. Inputs are
the z-scored feature values with unobserved entries zeroed, the observation
mask, and the sub-model's current prediction (width 2M + C). Two hidden
ReLU layers feed two linear heads of width M: one for aleatoric, one for
epistemic uncertainty. A single-head variant regresses the combined
quality directly.

Targets come from the exact uncertainty calculus evaluated at the training
samples' true values: for a drawn observation mask S and every unobserved
feature i, the target pair is (u, e) at S plus i's true value. Squared
error is accumulated only at unobserved positions, so observed entries
provably contribute no gradient. Training is plain minibatch
backpropagation with an adaptive-moment optimizer, deterministic per seed,
and a finite-difference gradient checker guards the backward pass.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, PartialObservation
from .dfs_engine import ModelAdapter
from .uncertainty import aleatoric_u


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    hidden: int = 128
    single_head: bool = False
    lam: float = 0.1  # combined-quality weight, used by the single-head variant
    full_batch: bool = False
    optimizer: str = "adam"  # "adam" | "sgd"

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.hidden < 1:
            raise ValueError("epochs >= 0, batch_size >= 1, hidden >= 1 required")
        if self.learning_rate <= 0 or self.lam < 0:
            raise ValueError("learning_rate > 0 and lam >= 0 required")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")


@dataclass(frozen=True, eq=False)
class TrainingBatch:
    """Encoded inputs with per-feature targets; targets are defined only
    where valid is True (the unobserved positions of each row)."""

    inputs: np.ndarray      # (n, 2M + C)
    u_targets: np.ndarray   # (n, M)
    e_targets: np.ndarray   # (n, M)
    valid: np.ndarray       # (n, M) bool

    def __post_init__(self):
        n = self.inputs.shape[0]
        if not (self.u_targets.shape[0] == self.e_targets.shape[0] == self.valid.shape[0] == n):
            raise ValueError("batch arrays disagree on row count")
        if self.valid.dtype != np.bool_:
            raise ValueError("valid must be boolean")
        for name in ("u_targets", "e_targets"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr[self.valid])):
                raise ValueError(f"{name} contains non-finite values at valid positions")
        if np.any(self.valid & self._observed_from_inputs()):
            raise ValueError("valid mask overlaps observed positions")

    def _observed_from_inputs(self) -> np.ndarray:
        m = self.valid.shape[1]
        return self.inputs[:, m : 2 * m] > 0.5

    @property
    def n(self) -> int:
        return int(self.inputs.shape[0])


@dataclass(eq=False)
class ValueNet:
    n_features: int
    n_classes: int
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    config: TrainConfig
    weights: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.weights:
            self.weights = _init_weights(
                self.input_width, self.config.hidden, self.head_count * self.n_features,
                self.config.seed,
            )

    @property
    def input_width(self) -> int:
        return 2 * self.n_features + self.n_classes

    @property
    def head_count(self) -> int:
        return 1 if self.config.single_head else 2

    def encode(self, obs: PartialObservation, sub_pred: np.ndarray) -> np.ndarray:
        z = (obs.values - self.scaler_mean) / self.scaler_std
        z = np.where(obs.observed, z, 0.0)
        return np.concatenate([z, obs.observed.astype(np.float64), sub_pred])

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "scaler_mean": _b64(self.scaler_mean),
            "scaler_std": _b64(self.scaler_std),
            "config": {
                "epochs": self.config.epochs,
                "batch_size": self.config.batch_size,
                "learning_rate": self.config.learning_rate,
                "seed": self.config.seed,
                "hidden": self.config.hidden,
                "single_head": self.config.single_head,
                "lam": self.config.lam,
                "full_batch": self.config.full_batch,
                "optimizer": self.config.optimizer,
            },
            "weights": {
                name: {"shape": list(w.shape), "data": _b64(w)}
                for name, w in sorted(self.weights.items())
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ValueNet":
        cfg = TrainConfig(**d["config"])
        weights = {
            name: _unb64(spec["data"]).reshape(spec["shape"])
            for name, spec in d["weights"].items()
        }
        return cls(
            n_features=d["n_features"],
            n_classes=d["n_classes"],
            scaler_mean=_unb64(d["scaler_mean"]),
            scaler_std=_unb64(d["scaler_std"]),
            config=cfg,
            weights=weights,
        )

    def predict_values(
        self, obs: PartialObservation, sub_pred: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Per-feature (u, e) estimates; observed positions come back NaN.
        The single-head variant returns its combined-quality estimate in the
        first array and zeros in the second."""
        x = self.encode(obs, np.asarray(sub_pred, np.float64))[None, :]
        out, _ = _forward(self.weights, x)
        m = self.n_features
        if self.config.single_head:
            u_hat = out[0, :m].copy()
            e_hat = np.zeros(m)
        else:
            u_hat = out[0, :m].copy()
            e_hat = out[0, m:].copy()
        u_hat[obs.observed] = np.nan
        e_hat[obs.observed] = np.nan
        return u_hat, e_hat


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, np.float64).tobytes()).decode("ascii")


def _unb64(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s.encode("ascii")), np.float64).copy()


def _init_weights(n_in: int, hidden: int, n_out: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    def glorot(a, b):
        bound = np.sqrt(6.0 / (a + b))
        return rng.uniform(-bound, bound, (a, b))
    return {
        "W1": glorot(n_in, hidden), "b1": np.zeros(hidden),
        "W2": glorot(hidden, hidden), "b2": np.zeros(hidden),
        "W3": glorot(hidden, n_out), "b3": np.zeros(n_out),
    }


def _forward(w: dict, x: np.ndarray):
    z1 = x @ w["W1"] + w["b1"]
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ w["W2"] + w["b2"]
    h2 = np.maximum(z2, 0.0)
    out = h2 @ w["W3"] + w["b3"]
    return out, (x, z1, h1, z2, h2)


def _loss_and_grads(w: dict, x, targets, valid2, want_grads=True):
    """Masked mean squared error over valid target positions (both heads
    stacked along the output axis); returns (loss, grads or None)."""
    out, (x, z1, h1, z2, h2) = _forward(w, x)
    diff = np.where(valid2, out - targets, 0.0)
    n_valid = max(int(valid2.sum()), 1)
    loss = float((diff * diff).sum() / n_valid)
    if not want_grads:
        return loss, None
    g_out = 2.0 * diff / n_valid
    grads = {}
    grads["W3"] = h2.T @ g_out
    grads["b3"] = g_out.sum(axis=0)
    g_h2 = (g_out @ w["W3"].T) * (z2 > 0.0)
    grads["W2"] = h1.T @ g_h2
    grads["b2"] = g_h2.sum(axis=0)
    g_h1 = (g_h2 @ w["W2"].T) * (z1 > 0.0)
    grads["W1"] = x.T @ g_h1
    grads["b1"] = g_h1.sum(axis=0)
    return loss, grads


def _stack_targets(net: ValueNet, batch: TrainingBatch):
    if net.config.single_head:
        targets = batch.u_targets + net.config.lam * batch.e_targets
        return np.where(batch.valid, targets, 0.0), batch.valid
    targets = np.concatenate([batch.u_targets, batch.e_targets], axis=1)
    valid2 = np.concatenate([batch.valid, batch.valid], axis=1)
    return np.where(valid2, targets, 0.0), valid2


def build_targets(
    ds: Dataset,
    adapter: ModelAdapter,
    ec,
    masks_per_sample: int = 1,
    seed: int = 0,
) -> TrainingBatch:
    """Draw observation masks (size uniform over {0..M-1}, then a uniform
    subset of that size) and compute exact per-feature uncertainty targets
    at each sample's true values."""
    if masks_per_sample < 1:
        raise ValueError("masks_per_sample must be >= 1")
    rng = np.random.default_rng(seed)
    m = ds.n_features
    mean = ds.samples.mean(axis=0)
    std = ds.samples.std(axis=0)
    std = np.where(std > 0, std, 1.0)

    inputs, u_rows, e_rows, valid_rows = [], [], [], []
    scratch_net = ValueNet(m, ds.n_classes, mean, std, TrainConfig())
    for row in range(ds.n_samples):
        sample = ds.samples[row]
        global_ref = adapter.predict_full(sample)
        for _ in range(masks_per_sample):
            size = int(rng.integers(0, m))  # full mask excluded by design
            observed_idx = rng.permutation(m)[:size]
            obs = PartialObservation.empty(m)
            for f in observed_idx:
                obs = obs.with_feature(int(f), float(sample[f]))
            sub_pred = adapter.predict_partial(obs)
            inputs.append(scratch_net.encode(obs, sub_pred))
            u_t = np.zeros(m)
            e_t = np.zeros(m)
            valid = ~obs.observed
            for i in range(m):
                if obs.observed[i]:
                    continue
                completed = obs.with_feature(i, float(sample[i]))
                u_t[i] = aleatoric_u(global_ref, adapter.predict_partial(completed))
                e_t[i] = adapter.epistemic(completed)
            u_rows.append(u_t)
            e_rows.append(e_t)
            valid_rows.append(valid)
    return TrainingBatch(
        inputs=np.array(inputs),
        u_targets=np.array(u_rows),
        e_targets=np.array(e_rows),
        valid=np.array(valid_rows),
    )


def make_net(ds: Dataset, config: TrainConfig) -> ValueNet:
    mean = ds.samples.mean(axis=0)
    std = ds.samples.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return ValueNet(ds.n_features, ds.n_classes, mean, std, config)


def train(net: ValueNet, batch: TrainingBatch, log_path: str | None = None) -> ValueNet:
    """Optimize the network in place on the batch; returns the same object.

    Deterministic given the config seed. Aborts with diagnostics if the
    loss or any weight stops being finite. Full-batch mode processes the
    whole batch as one step per epoch. When log_path is given, per-epoch
    losses are appended as CSV rows (epoch, loss)."""
    cfg = net.config
    targets, valid2 = _stack_targets(net, batch)
    x = batch.inputs
    rng = np.random.default_rng(cfg.seed + 1)
    adam_m = {k: np.zeros_like(v) for k, v in net.weights.items()}
    adam_v = {k: np.zeros_like(v) for k, v in net.weights.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = 0
    log_rows = []
    for epoch in range(cfg.epochs):
        if cfg.full_batch:
            order = np.arange(batch.n)
            step = batch.n
        else:
            order = rng.permutation(batch.n)
            step = cfg.batch_size
        for start in range(0, batch.n, step):
            idx = order[start : start + step]
            loss, grads = _loss_and_grads(net.weights, x[idx], targets[idx], valid2[idx])
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch offset {start}"
                )
            t += 1
            for k in net.weights:
                if cfg.optimizer == "sgd":
                    net.weights[k] -= cfg.learning_rate * grads[k]
                else:
                    adam_m[k] = beta1 * adam_m[k] + (1 - beta1) * grads[k]
                    adam_v[k] = beta2 * adam_v[k] + (1 - beta2) * grads[k] ** 2
                    m_hat = adam_m[k] / (1 - beta1 ** t)
                    v_hat = adam_v[k] / (1 - beta2 ** t)
                    net.weights[k] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        for k, w in net.weights.items():
            if not np.all(np.isfinite(w)):
                raise RuntimeError(
                    f"training diverged: non-finite weights in {k} after epoch {epoch}"
                )
        epoch_loss, _ = _loss_and_grads(net.weights, x, targets, valid2, want_grads=False)
        log_rows.append(f"{epoch},{epoch_loss!r}\n")
    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss\n")
            fh.writelines(log_rows)
    return net


def epoch_losses(net: ValueNet, batch: TrainingBatch) -> list[float]:
    """Train a copy of the net and return the post-epoch loss trajectory."""
    probe = ValueNet(
        net.n_features, net.n_classes, net.scaler_mean, net.scaler_std,
        net.config, {k: v.copy() for k, v in net.weights.items()},
    )
    targets, valid2 = _stack_targets(probe, batch)
    losses = []
    cfg = probe.config
    rng = np.random.default_rng(cfg.seed + 1)
    adam_m = {k: np.zeros_like(v) for k, v in probe.weights.items()}
    adam_v = {k: np.zeros_like(v) for k, v in probe.weights.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = 0
    for _epoch in range(cfg.epochs):
        order = np.arange(batch.n) if cfg.full_batch else rng.permutation(batch.n)
        step = batch.n if cfg.full_batch else cfg.batch_size
        for start in range(0, batch.n, step):
            idx = order[start : start + step]
            _, grads = _loss_and_grads(probe.weights, batch.inputs[idx], targets[idx], valid2[idx])
            t += 1
            for k in probe.weights:
                if cfg.optimizer == "sgd":
                    probe.weights[k] -= cfg.learning_rate * grads[k]
                else:
                    adam_m[k] = beta1 * adam_m[k] + (1 - beta1) * grads[k]
                    adam_v[k] = beta2 * adam_v[k] + (1 - beta2) * grads[k] ** 2
                    m_hat = adam_m[k] / (1 - beta1 ** t)
                    v_hat = adam_v[k] / (1 - beta2 ** t)
                    probe.weights[k] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        loss, _ = _loss_and_grads(probe.weights, batch.inputs, targets, valid2, want_grads=False)
        losses.append(loss)
    return losses


def _probe_loss(w: dict, x, targets, valid2):
    out, (_, z1, _, z2, _) = _forward(w, x)
    diff = np.where(valid2, out - targets, 0.0)
    n_valid = max(int(valid2.sum()), 1)
    return float((diff * diff).sum() / n_valid), z1 > 0, z2 > 0


def gradient_check(net: ValueNet, batch: TrainingBatch, h: float = 1e-5) -> float:
    """Max relative error between analytic and central finite-difference
    gradients on at least 100 randomly chosen weights.

    Probes whose perturbation flips a rectifier's activation sign are
    replaced by fresh draws: the loss is not differentiable there, so the
    central difference says nothing about the backward pass."""
    if not 1e-6 <= h <= 1e-3:
        raise ValueError("h must lie in [1e-6, 1e-3]")
    targets, valid2 = _stack_targets(net, batch)
    x = batch.inputs
    _, grads = _loss_and_grads(net.weights, x, targets, valid2)
    rng = np.random.default_rng(net.config.seed + 2)
    names = sorted(net.weights)
    sizes = np.array([net.weights[k].size for k in names])
    total = int(sizes.sum())
    n_probe = min(100, total)
    offsets = np.cumsum(sizes) - sizes
    order = rng.permutation(total)
    max_rel = 0.0
    checked = 0
    for flat in order:
        if checked >= n_probe:
            break
        layer = int(np.searchsorted(offsets, flat, side="right") - 1)
        k = names[layer]
        pos = int(flat - offsets[layer])
        w = net.weights[k]
        orig = w.flat[pos]
        w.flat[pos] = orig + h
        lp, z1p, z2p = _probe_loss(net.weights, x, targets, valid2)
        w.flat[pos] = orig - h
        lm, z1m, z2m = _probe_loss(net.weights, x, targets, valid2)
        w.flat[pos] = orig
        if np.any(z1p != z1m) or np.any(z2p != z2m):
            continue  # kink crossing: nondifferentiable point, not a probe
        numeric = (lp - lm) / (2.0 * h)
        analytic = grads[k].flat[pos]
        rel = abs(analytic - numeric) / (abs(analytic) + abs(numeric) + 1e-12)
        max_rel = max(max_rel, float(rel))
        checked += 1
    return max_rel
