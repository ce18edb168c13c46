"""Feature-fusion regression head.

The head linearly transforms the additional per-pair feature vector,
concatenates it with the scorer's feature vector, and regresses to a
relevance score:

    f_a   = v_a @ W1 + b1
    score = [f_a ; f_bert] @ W2 + b2

When no additional features exist the head degenerates to a plain linear
regression on f_bert (d = 0). Training minimizes mean squared error with
mini-batch adaptive-moment gradient descent under a linear warm-up/decay
learning-rate schedule, fully deterministic for a given seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_VERSION = 1


class FusionTrainingError(RuntimeError):
    """Raised when training produces a non-finite loss."""


@dataclass
class FusionHead:
    """Head parameters; ``d == 0`` marks the scorer-features-only variant."""

    d: int
    h: int
    w1: np.ndarray | None
    b1: np.ndarray | None
    w2: np.ndarray
    b2: float

    def __post_init__(self):
        if self.h < 1 or self.d < 0:
            raise ValueError("h must be positive and d non-negative")
        if self.d == 0:
            if self.w1 is not None or self.b1 is not None:
                raise ValueError("d=0 head must not carry W1/b1")
            expected = (self.h,)
        else:
            if self.w1 is None or self.b1 is None:
                raise ValueError("d>0 head requires W1 and b1")
            if self.w1.shape != (self.d, self.d) or self.b1.shape != (self.d,):
                raise ValueError("W1 must be (d, d) and b1 (d,)")
            expected = (self.d + self.h,)
        if self.w2.shape != expected:
            raise ValueError(f"W2 must have shape {expected}, got {self.w2.shape}")
        for arr in (self.w1, self.b1, self.w2):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise ValueError("head parameters must be finite")
        if not math.isfinite(self.b2):
            raise ValueError("b2 must be finite")

    def copy(self) -> "FusionHead":
        return FusionHead(
            d=self.d,
            h=self.h,
            w1=None if self.w1 is None else self.w1.copy(),
            b1=None if self.b1 is None else self.b1.copy(),
            w2=self.w2.copy(),
            b2=self.b2,
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 16
    learning_rate: float = 1e-5
    warmup: float = 0.1
    linear_decay: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.warmup < 1.0:
            raise ValueError("warmup must lie in [0, 1)")


def fuse_score(f_bert: np.ndarray, v_a: np.ndarray | None, head: FusionHead) -> float:
    """Score one pair; ``v_a=None`` selects the scorer-features-only path."""
    f_bert = np.asarray(f_bert, dtype=float)
    if f_bert.shape != (head.h,):
        raise ValueError(f"f_bert must have shape ({head.h},), got {f_bert.shape}")
    if v_a is None:
        if head.d != 0:
            raise ValueError("head was trained with additional features; v_a is required")
        return float(f_bert @ head.w2 + head.b2)
    v_a = np.asarray(v_a, dtype=float)
    if head.d == 0:
        raise ValueError("head has no feature transform; v_a must be None")
    if v_a.shape != (head.d,):
        raise ValueError(f"v_a must have shape ({head.d},), got {v_a.shape}")
    f_a = v_a @ head.w1 + head.b1
    fused = np.concatenate([f_a, f_bert])
    return float(fused @ head.w2 + head.b2)


def predict(head: FusionHead, f_bert: np.ndarray, v_a: np.ndarray | None = None) -> np.ndarray:
    """Vectorized scores for stacked inputs (n, h) and optional (n, d)."""
    f_bert = np.asarray(f_bert, dtype=float)
    if v_a is None:
        return f_bert @ head.w2 + head.b2
    v_a = np.asarray(v_a, dtype=float)
    f_a = v_a @ head.w1 + head.b1
    fused = np.hstack([f_a, f_bert])
    return fused @ head.w2 + head.b2


def head_gradient(
    f_bert: np.ndarray, v_a: np.ndarray | None, grade: float, head: FusionHead
) -> dict[str, np.ndarray | float]:
    """Analytic gradients of the squared error for a single sample."""
    f_bert = np.asarray(f_bert, dtype=float)
    residual = fuse_score(f_bert, v_a, head) - float(grade)
    if v_a is None:
        return {"w2": 2.0 * residual * f_bert, "b2": 2.0 * residual}
    v_a = np.asarray(v_a, dtype=float)
    f_a = v_a @ head.w1 + head.b1
    fused = np.concatenate([f_a, f_bert])
    g_fa = 2.0 * residual * head.w2[: head.d]
    return {
        "w1": np.outer(v_a, g_fa),
        "b1": g_fa,
        "w2": 2.0 * residual * fused,
        "b2": 2.0 * residual,
    }


def init_head(d: int, h: int, seed: int = 0) -> FusionHead:
    """Uniform init in [-r, r] with r = 1/sqrt(fan-in) per parameter block."""
    rng = np.random.default_rng(seed)
    if d > 0:
        r1 = 1.0 / math.sqrt(d)
        w1 = rng.uniform(-r1, r1, size=(d, d))
        b1 = rng.uniform(-r1, r1, size=d)
    else:
        w1 = b1 = None
    r2 = 1.0 / math.sqrt(d + h)
    w2 = rng.uniform(-r2, r2, size=d + h)
    b2 = float(rng.uniform(-r2, r2))
    return FusionHead(d=d, h=h, w1=w1, b1=b1, w2=w2, b2=b2)


def _schedule(step: int, total: int, config: TrainConfig) -> float:
    warmup_steps = int(config.warmup * total)
    if warmup_steps > 0 and step < warmup_steps:
        return config.learning_rate * (step + 1) / warmup_steps
    if not config.linear_decay:
        return config.learning_rate
    remaining = max(total - warmup_steps, 1)
    return config.learning_rate * (total - step) / remaining


def _stack_samples(samples):
    if not samples:
        raise ValueError("need at least one training sample")
    f_bert = np.stack([np.asarray(s[0], dtype=float) for s in samples])
    grades = np.array([float(s[2]) for s in samples])
    has_va = [s[1] is not None for s in samples]
    if any(has_va) and not all(has_va):
        raise ValueError("samples must uniformly carry or omit additional features")
    v_a = np.stack([np.asarray(s[1], dtype=float) for s in samples]) if all(has_va) else None
    return f_bert, v_a, grades


def fit_head(samples, config: TrainConfig) -> tuple[FusionHead, list[float]]:
    """Train a head by mini-batch Adam on MSE; returns (head, per-step losses)."""
    f_bert, v_a, grades = _stack_samples(samples)
    n, h = f_bert.shape
    d = 0 if v_a is None else v_a.shape[1]
    head = init_head(d, h, seed=config.seed)

    params: dict[str, np.ndarray] = {"w2": head.w2, "b2": np.array(head.b2)}
    if d > 0:
        params["w1"] = head.w1
        params["b1"] = head.b1
    moment1 = {k: np.zeros_like(v) for k, v in params.items()}
    moment2 = {k: np.zeros_like(v) for k, v in params.items()}

    rng = np.random.default_rng(config.seed)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    losses: list[float] = []
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            fb = f_bert[idx]
            va = None if v_a is None else v_a[idx]
            y = grades[idx]
            if va is None:
                fused = fb
            else:
                f_a = va @ params["w1"] + params["b1"]
                fused = np.hstack([f_a, fb])
            pred = fused @ params["w2"] + float(params["b2"])
            residual = pred - y
            loss = float(np.mean(residual**2))
            if not math.isfinite(loss):
                raise FusionTrainingError(f"training diverged at step {step} with {config}")
            losses.append(loss)

            m = len(idx)
            grads: dict[str, np.ndarray] = {
                "w2": (2.0 / m) * fused.T @ residual,
                "b2": np.array(2.0 * np.mean(residual)),
            }
            if va is not None:
                g_fa = (2.0 / m) * residual[:, None] * params["w2"][None, :d]
                grads["w1"] = va.T @ g_fa
                grads["b1"] = g_fa.sum(axis=0)

            lr = _schedule(step, total_steps, config)
            step += 1
            for key, grad in grads.items():
                moment1[key] = ADAM_BETA1 * moment1[key] + (1 - ADAM_BETA1) * grad
                moment2[key] = ADAM_BETA2 * moment2[key] + (1 - ADAM_BETA2) * grad**2
                m_hat = moment1[key] / (1 - ADAM_BETA1**step)
                v_hat = moment2[key] / (1 - ADAM_BETA2**step)
                params[key] = params[key] - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    return (
        FusionHead(
            d=d,
            h=h,
            w1=params.get("w1"),
            b1=params.get("b1"),
            w2=params["w2"],
            b2=float(params["b2"]),
        ),
        losses,
    )


def train_head(samples, config: TrainConfig) -> FusionHead:
    """Train a fusion head on (f_bert, optional v_a, gold grade) samples."""
    head, _ = fit_head(samples, config)
    return head


def save_head(head: FusionHead, path: str | Path) -> None:
    """Write a versioned JSON checkpoint (floats round-trip exactly)."""
    record = {
        "version": CHECKPOINT_VERSION,
        "d": head.d,
        "h": head.h,
        "w1": None if head.w1 is None else head.w1.tolist(),
        "b1": None if head.b1 is None else head.b1.tolist(),
        "w2": head.w2.tolist(),
        "b2": head.b2,
    }
    Path(path).write_text(json.dumps(record), encoding="utf-8")


def load_head(path: str | Path) -> FusionHead:
    record = json.loads(Path(path).read_text(encoding="utf-8"))
    if record.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {record.get('version')!r}")
    return FusionHead(
        d=int(record["d"]),
        h=int(record["h"]),
        w1=None if record["w1"] is None else np.array(record["w1"], dtype=float),
        b1=None if record["b1"] is None else np.array(record["b1"], dtype=float),
        w2=np.array(record["w2"], dtype=float),
        b2=float(record["b2"]),
    )


class FusionRegressor(BaseEstimator, RegressorMixin):
    """Estimator-style wrapper around the fusion head.

    ``fit(X, y, extra=...)`` takes scorer features X of shape (n, h) and
    optional additional features of shape (n, d); ``normalize_extra``
    standardizes the additional features with train-set statistics.
    """

    def __init__(
        self,
        epochs: int = 5,
        batch_size: int = 16,
        learning_rate: float = 1e-5,
        warmup: float = 0.1,
        linear_decay: bool = True,
        seed: int = 0,
        normalize_extra: bool = False,
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.warmup = warmup
        self.linear_decay = linear_decay
        self.seed = seed
        self.normalize_extra = normalize_extra

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            warmup=self.warmup,
            linear_decay=self.linear_decay,
            seed=self.seed,
        )

    def _transform_extra(self, extra: np.ndarray | None) -> np.ndarray | None:
        if extra is None:
            return None
        extra = np.asarray(extra, dtype=float)
        if self.normalize_extra:
            return (extra - self.extra_mean_) / self.extra_scale_
        return extra

    def fit(self, X, y, extra=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if extra is not None:
            extra = np.asarray(extra, dtype=float)
            if self.normalize_extra:
                self.extra_mean_ = extra.mean(axis=0)
                scale = extra.std(axis=0)
                self.extra_scale_ = np.where(scale == 0, 1.0, scale)
            else:
                self.extra_mean_ = None
                self.extra_scale_ = None
            extra = self._transform_extra(extra)
        samples = [
            (X[i], None if extra is None else extra[i], y[i]) for i in range(len(X))
        ]
        self.head_, self.loss_curve_ = fit_head(samples, self._config())
        return self

    def predict(self, X, extra=None):
        return predict(self.head_, np.asarray(X, dtype=float), self._transform_extra(extra))
