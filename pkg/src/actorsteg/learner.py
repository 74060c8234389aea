"""Gradient-boosted decision stumps with a softmax objective.

One ensemble serves every classification role in the package: the binary
image-level models and the multiclass actor-level model. Training is exact
greedy search over all (feature, threshold) splits per round and per class
score, with deterministic tie-breaking (lowest feature index, then lowest
threshold), so two trainings on identical inputs produce identical model
files. A zero-stump model predicts uniform probabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

MODEL_FORMAT = "boosted-stumps"
MODEL_VERSION = 1


class ModelFileError(Exception):
    """Corrupt, truncated, or version-incompatible model file."""


@dataclass(frozen=True)
class LearnerConfig:
    n_rounds: int = 200
    learning_rate: float = 0.1
    max_stumps_per_round: int = 1

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_stumps_per_round < 1:
            raise ValueError("max_stumps_per_round must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n_rounds": self.n_rounds,
            "learning_rate": self.learning_rate,
            "max_stumps_per_round": self.max_stumps_per_round,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerConfig":
        return cls(
            n_rounds=int(d["n_rounds"]),
            learning_rate=float(d["learning_rate"]),
            max_stumps_per_round=int(d["max_stumps_per_round"]),
        )


@dataclass(frozen=True)
class Stump:
    """One depth-1 regression tree: value left/right of a feature threshold.

    A degenerate stump (threshold = +inf) is a plain intercept step; it is
    emitted when no column of the training matrix admits a split.
    """

    feature: int
    threshold: float
    left: float
    right: float


@dataclass
class BoostedModel:
    n_classes: int
    feature_dim: int
    learning_rate: float
    n_rounds: int
    stumps: list  # one list of Stump per class, in order of addition
    training_loss: Optional[list] = field(default=None, repr=False, compare=False)
    _packed: Optional[tuple] = field(default=None, repr=False, compare=False)

    def _pack(self):
        if self._packed is None:
            packed = []
            for per_class in self.stumps:
                if per_class:
                    f = np.array([s.feature for s in per_class], dtype=np.int64)
                    t = np.array([s.threshold for s in per_class], dtype=np.float64)
                    lv = np.array([s.left for s in per_class], dtype=np.float64)
                    rv = np.array([s.right for s in per_class], dtype=np.float64)
                else:
                    f = np.zeros(0, np.int64)
                    t = lv = rv = np.zeros(0, np.float64)
                packed.append((f, t, lv, rv))
            self._packed = tuple(packed)
        return self._packed

    def decision_scores(self, features: np.ndarray) -> np.ndarray:
        """Raw additive scores, shape (n_samples, n_classes)."""
        x = np.asarray(features, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.feature_dim:
            raise ValueError(
                f"feature dimension mismatch: model expects {self.feature_dim}, "
                f"got shape {x.shape}"
            )
        scores = np.zeros((x.shape[0], self.n_classes), dtype=np.float64)
        for c, (f, t, lv, rv) in enumerate(self._pack()):
            if f.size:
                scores[:, c] = self.learning_rate * np.where(x[:, f] <= t, lv, rv).sum(axis=1)
        return scores[0] if squeeze else scores

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        scores = self.decision_scores(features)
        return _softmax(scores)

    def predict(self, features: np.ndarray):
        """Class of highest probability; ties break toward the lowest index."""
        proba = self.predict_proba(features)
        if proba.ndim == 1:
            return int(np.argmax(proba))
        return np.argmax(proba, axis=1)

    def save(self, path) -> None:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "n_classes": self.n_classes,
            "feature_dim": self.feature_dim,
            "learning_rate": self.learning_rate,
            "n_rounds": self.n_rounds,
            "stumps": [
                [[s.feature, s.threshold, s.left, s.right] for s in per_class]
                for per_class in self.stumps
            ],
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="ascii")


def load_model(path) -> BoostedModel:
    """Load a saved model; raises ModelFileError on anything unusable."""
    try:
        doc = json.loads(Path(path).read_text(encoding="ascii"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"unreadable model file {path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFileError(f"{path} is not a {MODEL_FORMAT} model file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFileError(
            f"unsupported model version {doc.get('version')!r} (expected {MODEL_VERSION})"
        )
    try:
        stumps = [
            [Stump(int(f), float(t), float(l), float(r)) for f, t, l, r in per_class]
            for per_class in doc["stumps"]
        ]
        return BoostedModel(
            n_classes=int(doc["n_classes"]),
            feature_dim=int(doc["feature_dim"]),
            learning_rate=float(doc["learning_rate"]),
            n_rounds=int(doc["n_rounds"]),
            stumps=stumps,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file {path}: {exc}") from None


def _softmax(scores: np.ndarray) -> np.ndarray:
    s = scores - np.max(scores, axis=-1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=-1, keepdims=True)


def _fit_stump(x, order, valid, midpoints, g):
    """Exact greedy least-squares stump for gradient targets ``g``.

    Maximizes L^2/nL + R^2/nR over all splits; ties resolve to the lowest
    feature index, then the lowest threshold, via the scan order.
    """
    n = g.shape[0]
    gs = g[order]  # (n, d) gradient values in per-column sorted order
    left = np.cumsum(gs, axis=0)[:-1]  # (n-1, d)
    total = g.sum()
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    right = total - left
    gain = left * left / n_left + right * right / (n - n_left)
    gain[~valid] = -np.inf
    flat = gain.T.ravel()  # feature-major: lowest feature, then lowest threshold
    best = int(np.argmax(flat))
    if not np.isfinite(flat[best]):
        mean = total / n
        return Stump(0, np.inf, float(mean), 0.0), np.full(n, mean)
    j, i = divmod(best, n - 1)
    thr = float(midpoints[i, j])
    lv = float(left[i, j] / n_left[i, 0])
    rv = float(right[i, j] / (n - n_left[i, 0]))
    h = np.where(x[:, j] <= thr, lv, rv)
    return Stump(int(j), thr, lv, rv), h


def train(
    features: np.ndarray,
    labels: np.ndarray,
    config: LearnerConfig = LearnerConfig(),
    n_classes: Optional[int] = None,
) -> BoostedModel:
    """Train a boosted-stump classifier.

    Every class in [0, n_classes) must be present in ``labels``; features
    must be finite. One stump per class score is fitted per round from the
    softmax gradient, so the training loss is non-increasing for learning
    rates up to 0.5. The recorded per-round loss is kept on the returned
    model (not serialized).
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {x.shape}")
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ValueError("labels must be 1-D and match the number of feature rows")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 training samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    if not np.issubdtype(y.dtype, np.integer):
        y = y.astype(np.int64)
    present = np.unique(y)
    if n_classes is None:
        n_classes = int(present.max()) + 1
    if present.size < 2 or n_classes < 2:
        raise ValueError("training requires at least two classes present")
    expected = np.arange(n_classes)
    if not np.array_equal(present, expected):
        missing = sorted(set(expected.tolist()) - set(present.tolist()))
        if missing:
            raise ValueError(f"classes missing from training labels: {missing}")
        raise ValueError(f"labels outside [0, {n_classes}): {sorted(set(present) - set(expected))}")

    n, d = x.shape
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    valid = xs[1:] > xs[:-1]  # a split must separate distinct values
    midpoints = 0.5 * (xs[:-1] + xs[1:])

    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0
    scores = np.zeros((n, n_classes), dtype=np.float64)
    stumps = [[] for _ in range(n_classes)]
    losses = []

    for _ in range(config.n_rounds):
        for _ in range(config.max_stumps_per_round):
            proba = _softmax(scores)
            grad = onehot - proba
            updates = np.empty_like(scores)
            for c in range(n_classes):
                stump, h = _fit_stump(x, order, valid, midpoints, grad[:, c])
                stumps[c].append(stump)
                updates[:, c] = h
            scores += config.learning_rate * updates
        proba = _softmax(scores)
        losses.append(float(-np.mean(np.log(np.maximum(proba[np.arange(n), y], 1e-300)))))

    return BoostedModel(
        n_classes=n_classes,
        feature_dim=d,
        learning_rate=config.learning_rate,
        n_rounds=config.n_rounds,
        stumps=stumps,
        training_loss=losses,
    )
