"""Trainable parameters, exact reverse-mode gradients, and the AdamW loop.

The model is: per-view feature reweighting -> scattering features -> one
hidden-layer MLP. The scattering stage is a fixed chain of linear maps
plus absolute values, so gradients are hand-rolled over a small tape
rather than routed through an autodiff framework; complex structure is
treated as constant (straight-through). Decoupled weight decay applies to
the MLP weight matrices only, not to biases or the view weights.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .data import (
    HPMX_MAGIC,
    Cohort,
    RunConfig,
    TASK_CLASSIFICATION,
    hpmx_bytes,
)
from .errors import LoadError, TrainingDiverged
from .scattering import cloud_features, cloud_features_backward, feature_length
from .views import init_view_weights

HPCK_MAGIC = b"HPCK"

DECAYED_TENSORS = ("w1", "w2")  # decoupled weight decay hits MLP weights only


@dataclass
class ModelParams:
    alpha: np.ndarray       # (V, d) view weights
    w1: np.ndarray          # (F, H)
    b1: np.ndarray          # (H,)
    w2: np.ndarray          # (H, C)
    b2: np.ndarray          # (C,)
    feat_mean: np.ndarray   # (F,) fixed standardization buffers, not trained
    feat_scale: np.ndarray  # (F,)

    def tensors(self) -> dict:
        """Trainable tensors only (standardization buffers are frozen)."""
        return {"alpha": self.alpha, "w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def all_arrays(self) -> dict:
        return {**self.tensors(), "feat_mean": self.feat_mean, "feat_scale": self.feat_scale}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.all_arrays().items()})


def init_params(config: RunConfig, d: int, out_dim: int) -> ModelParams:
    rng = np.random.default_rng(config.seed)
    f = feature_length(config, d)
    h = config.hidden_dim
    return ModelParams(
        alpha=init_view_weights(config.num_views, d, config.seed),
        w1=rng.normal(0.0, np.sqrt(2.0 / f), size=(f, h)),
        b1=np.zeros(h),
        w2=rng.normal(0.0, np.sqrt(1.0 / h), size=(h, out_dim)),
        b2=np.zeros(out_dim),
        feat_mean=np.zeros(f),
        feat_scale=np.ones(f),
    )


def mlp_forward(phi: np.ndarray, params: ModelParams):
    pre = phi @ params.w1 + params.b1
    hidden = np.maximum(pre, 0.0)
    out = hidden @ params.w2 + params.b2
    return out, (phi, pre > 0, hidden)


def mlp_backward(cache, dout: np.ndarray, params: ModelParams):
    phi, relu_mask, hidden = cache
    dw2 = hidden.T @ dout
    db2 = dout.sum(axis=0)
    dhidden = (dout @ params.w2.T) * relu_mask
    dw1 = phi.T @ dhidden
    db1 = dhidden.sum(axis=0)
    dphi = dhidden @ params.w1.T
    return dphi, {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_loss(logits: np.ndarray, y: np.ndarray):
    n = logits.shape[0]
    p = softmax(logits)
    loss = -np.log(np.maximum(p[np.arange(n), y], 1e-300)).mean()
    dlogits = p.copy()
    dlogits[np.arange(n), y] -= 1.0
    return loss, dlogits / n


def mse_loss(pred: np.ndarray, y: np.ndarray):
    diff = pred - y
    loss = np.mean(diff * diff)
    return loss, 2.0 * diff / diff.size


@dataclass
class Tape:
    """Everything the backward pass needs for one forward batch."""

    clouds: list
    view_caches: list
    mlp_cache: tuple
    phi: np.ndarray


def forward(clouds, params: ModelParams, config: RunConfig, structures=None):
    """Predictions plus tape for a batch of clouds.

    `structures` is an optional per-cloud list of frozen per-view
    structures; when absent, complexes are rebuilt from the current view
    weights (the default straight-through behavior).
    """
    phis, caches = [], []
    for i, cloud in enumerate(clouds):
        s = structures[i] if structures is not None else None
        phi, vcaches, _ = cloud_features(cloud.points, params.alpha, config, structures=s)
        phis.append(phi)
        caches.append(vcaches)
    phi_mat = np.vstack(phis)
    out, mlp_cache = mlp_forward(phi_mat, params)
    return out, Tape(clouds=list(clouds), view_caches=caches, mlp_cache=mlp_cache, phi=phi_mat)


def backward(tape: Tape, dout: np.ndarray, params: ModelParams, config: RunConfig) -> dict:
    """Exact gradients for alpha and the MLP; complex structure held constant."""
    dphi, grads = mlp_backward(tape.mlp_cache, dout, params)
    dalpha = np.zeros_like(params.alpha)
    for i, cloud in enumerate(tape.clouds):
        dalpha += cloud_features_backward(tape.view_caches[i], dphi[i], cloud.points, config)
    grads["alpha"] = dalpha
    return grads


class AdamW:
    """Standard AdamW (beta1 0.9, beta2 0.999, eps 1e-8, decoupled decay)."""

    def __init__(self, lr: float, weight_decay: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params: ModelParams, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in params.tensors().items():
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
            if name in DECAYED_TENSORS and self.weight_decay:
                p -= self.lr * self.weight_decay * p


@dataclass
class TrainState:
    params: ModelParams
    best_epoch: int
    best_metric: float
    history: list = field(default_factory=list)


def _batch_loss(clouds, labels, params, config, structures, task):
    out, tape = forward(clouds, params, config, structures)
    if task == TASK_CLASSIFICATION:
        loss, dout = cross_entropy_loss(out, labels)
    else:
        loss, dout = mse_loss(out, labels)
    return out, tape, loss, dout


def _metric(cohort: Cohort, preds: np.ndarray) -> float:
    if cohort.task == TASK_CLASSIFICATION:
        return float((preds.argmax(axis=1) == cohort.labels).mean())
    return float(np.mean((preds - cohort.labels) ** 2))


def _structures_for(cohort: Cohort, params: ModelParams, config: RunConfig):
    if not config.freeze_structure:
        return None
    out = []
    for cloud in cohort.clouds:
        _, _, structs = cloud_features(cloud.points, params.alpha, config)
        out.append(structs)
    return out


def train(train_cohort: Cohort, val_cohort: Cohort, config: RunConfig) -> TrainState:
    """AdamW over the full pipeline; returns the best-validation parameters.

    One optimizer step per (seeded, shuffled) mini-batch; gradients within
    a batch accumulate in cloud order, so runs are bitwise reproducible.
    Raises TrainingDiverged when the loss stops being finite.
    """
    task = train_cohort.task
    if task == TASK_CLASSIFICATION:
        out_dim = max(train_cohort.num_classes, val_cohort.num_classes)
        higher_better = True
    else:
        out_dim = train_cohort.labels.shape[1]
        higher_better = False
    params = init_params(config, train_cohort.d, out_dim)
    opt = AdamW(config.learning_rate, config.weight_decay)
    train_structs = _structures_for(train_cohort, params, config)
    val_structs = _structures_for(val_cohort, params, config)

    best = TrainState(params=params.copy(), best_epoch=-1,
                      best_metric=-np.inf if higher_better else np.inf)
    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train_cohort))
        total, count = 0.0, 0
        for lo in range(0, order.size, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            clouds = [train_cohort.clouds[i] for i in idx]
            labels = train_cohort.labels[idx]
            structs = [train_structs[i] for i in idx] if train_structs is not None else None
            _, tape, loss, dout = _batch_loss(clouds, labels, params, config, structs, task)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            grads = backward(tape, dout, params, config)
            opt.step(params, grads)
            total += loss * idx.size
            count += idx.size
        val_out, _ = forward(val_cohort.clouds, params, config, val_structs)
        if task == TASK_CLASSIFICATION:
            val_loss, _ = cross_entropy_loss(val_out, val_cohort.labels)
        else:
            val_loss, _ = mse_loss(val_out, val_cohort.labels)
        if not np.isfinite(val_loss):
            raise TrainingDiverged(epoch)
        val_metric = _metric(val_cohort, val_out)
        row = {
            "epoch": epoch,
            "train_loss": total / max(count, 1),
            "val_loss": float(val_loss),
            "val_metric": val_metric,
        }
        best.history.append(row)
        improved = val_metric > best.best_metric if higher_better else val_metric < best.best_metric
        if improved:
            best.best_metric = val_metric
            best.best_epoch = epoch
            best.params = params.copy()
    return best


def evaluate(cohort: Cohort, params: ModelParams, config: RunConfig) -> dict:
    """Accuracy / per-class counts / AUC for classification, MSE / R^2 for regression."""
    out, _ = forward(cohort.clouds, params, config)
    if cohort.task == TASK_CLASSIFICATION:
        pred = out.argmax(axis=1)
        y = cohort.labels
        per_class = {}
        for cls in np.unique(y):
            sel = y == cls
            per_class[int(cls)] = {
                "total": int(sel.sum()),
                "correct": int((pred[sel] == cls).sum()),
            }
        result = {
            "accuracy": float((pred == y).mean()),
            "per_class": per_class,
            "auc": None,
        }
        if out.shape[1] == 2:
            result["auc"] = binary_auc(softmax(out)[:, 1], y)
        return result
    mse = float(np.mean((out - cohort.labels) ** 2))
    yvar = np.sum((cohort.labels - cohort.labels.mean(axis=0)) ** 2)
    r2 = float(1.0 - np.sum((out - cohort.labels) ** 2) / yvar) if yvar > 0 else None
    return {"mse": mse, "r2": r2}


def binary_auc(scores: np.ndarray, y: np.ndarray):
    """AUC-ROC via the rank statistic, ties handled by midranks."""
    n1 = int((y == 1).sum())
    n0 = int((y == 0).sum())
    if n1 == 0 or n0 == 0:
        warnings.warn("AUC undefined: one class is absent")
        return None
    r = rankdata(scores)
    return float((r[y == 1].sum() - n1 * (n1 + 1) / 2.0) / (n0 * n1))


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path, params: ModelParams, config: RunConfig, epoch: int, metrics: dict) -> None:
    """JSON header plus one HPMX block per tensor."""
    tensors = params.tensors()
    header = {
        "config": config.to_dict(),
        "epoch": epoch,
        "metrics": metrics,
        "tensors": [
            {"name": k, "rows": int(np.atleast_2d(v).shape[0]), "cols": int(np.atleast_2d(v).shape[1])}
            for k, v in tensors.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    parts = [HPCK_MAGIC, struct.pack("<I", len(blob)), blob]
    for v in tensors.values():
        parts.append(hpmx_bytes(np.atleast_2d(v)))
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path):
    raw = Path(path).read_bytes()
    if raw[:4] != HPCK_MAGIC:
        raise LoadError(f"{path}: not a checkpoint file (bad magic)")
    (hlen,) = struct.unpack("<I", raw[4:8])
    header = json.loads(raw[8 : 8 + hlen].decode())
    pos = 8 + hlen
    arrays = {}
    for spec in header["tensors"]:
        rows, cols = spec["rows"], spec["cols"]
        size = 12 + 8 * rows * cols
        chunk = raw[pos : pos + size]
        if len(chunk) != size or chunk[:4] != HPMX_MAGIC:
            raise LoadError(f"{path}: corrupt tensor block '{spec['name']}'")
        arrays[spec["name"]] = (
            np.frombuffer(chunk[12:], dtype="<f8").reshape(rows, cols).astype(np.float64)
        )
        pos += size
    params = ModelParams(
        alpha=arrays["alpha"],
        w1=arrays["w1"],
        b1=arrays["b1"].ravel(),
        w2=arrays["w2"],
        b2=arrays["b2"].ravel(),
    )
    config = RunConfig(**header["config"])
    return params, config, {"epoch": header["epoch"], "metrics": header["metrics"]}
