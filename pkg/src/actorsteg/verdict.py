"""Final actor classification and evaluation.

The proposed method trains a multiclass boosted model over the 2N actor
features (N predicted-stego ratios plus N accuracy estimates) and applies a
reject rule: the accuracy estimate tied to the predicted class (the mean of
all N estimates when the prediction is innocent) must clear a threshold,
otherwise the actor is declared inconclusive due to cover-source mismatch.
The baseline trains on the N ratios alone and never rejects.

Evaluation treats guilty as the positive class. A guilty verdict with the
wrong system still counts as a true positive, since the object of the
exercise is detecting steganography use, not naming the tool. Accuracy is
computed over classified actors only; rejected actors are reported
separately as the NC fraction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .actors import ActorFeatures, features_matrix
from .learner import BoostedModel, LearnerConfig, train

DECISION_INNOCENT = "innocent"
DECISION_GUILTY = "guilty"
DECISION_INCONCLUSIVE = "inconclusive_csm"


@dataclass(frozen=True)
class ActorVerdict:
    actor_id: str
    decision: str
    predicted_class: int
    class_probabilities: tuple
    selected_acc: Optional[float]
    threshold: Optional[float]

    @property
    def guilty_system(self) -> Optional[int]:
        return self.predicted_class - 1 if self.predicted_class > 0 else None


def train_actor_classifier(
    train_features: Sequence[ActorFeatures],
    config: LearnerConfig = LearnerConfig(),
    baseline: bool = False,
) -> BoostedModel:
    """Train the final classifier over actor features.

    All N+1 classes (innocent plus one per system) must be present. With
    ``baseline=True`` the model sees only the N ratio features, which makes
    it structurally unable to read the accuracy estimates.
    """
    matrix, labels = features_matrix(train_features, baseline=baseline)
    n_feat = matrix.shape[1]
    n_systems = n_feat if baseline else n_feat // 2
    if not baseline and matrix.shape[1] != 2 * n_systems:
        raise ValueError(f"proposed feature vectors must have even length, got {n_feat}")
    return train(matrix, labels, config, n_classes=n_systems + 1)


def judge(
    actor_features: ActorFeatures, model_f: BoostedModel, threshold: float
) -> ActorVerdict:
    """Classify one actor with the reject option.

    The accuracy estimate of the predicted system (or the mean of all
    estimates for an innocent prediction) is compared against the threshold;
    below it, the verdict is inconclusive due to mismatch.
    """
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("threshold must lie in [0, 1]")
    vec = actor_features.proposed_vector()
    proba = model_f.predict_proba(vec)
    cls = int(np.argmax(proba))
    accs = np.asarray(actor_features.acc_estimates, dtype=np.float64)
    selected = float(accs.mean()) if cls == 0 else float(accs[cls - 1])
    if selected < threshold:
        decision = DECISION_INCONCLUSIVE
    else:
        decision = DECISION_INNOCENT if cls == 0 else DECISION_GUILTY
    return ActorVerdict(
        actor_id=actor_features.actor_id,
        decision=decision,
        predicted_class=cls,
        class_probabilities=tuple(float(p) for p in proba),
        selected_acc=selected,
        threshold=float(threshold),
    )


def judge_baseline(actor_features: ActorFeatures, model_baseline: BoostedModel) -> ActorVerdict:
    """Classify one actor from ratios alone; there is no reject path."""
    vec = actor_features.baseline_vector()
    proba = model_baseline.predict_proba(vec)
    cls = int(np.argmax(proba))
    return ActorVerdict(
        actor_id=actor_features.actor_id,
        decision=DECISION_INNOCENT if cls == 0 else DECISION_GUILTY,
        predicted_class=cls,
        class_probabilities=tuple(float(p) for p in proba),
        selected_acc=None,
        threshold=None,
    )


@dataclass(frozen=True)
class EvaluationSummary:
    n_total: int
    n_classified: int
    nc_fraction: float
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    accuracy_defined: bool

    def to_dict(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_classified": self.n_classified,
            "nc_fraction": self.nc_fraction,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "accuracy": None if not self.accuracy_defined else self.accuracy,
            "accuracy_defined": self.accuracy_defined,
        }


def evaluate(pairs: Sequence[tuple]) -> EvaluationSummary:
    """Reduce (verdict, ground-truth label) pairs to accuracy and NC fraction.

    Labels follow the actor convention: 0 innocent, k+1 guilty. Inconclusive
    verdicts are excluded from the confusion counts; if every verdict is
    inconclusive, accuracy is NaN with the defined flag cleared.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("nothing to evaluate")
    tp = fp = tn = fn = nc = 0
    for v, label in pairs:
        truth_guilty = label > 0
        if v.decision == DECISION_INCONCLUSIVE:
            nc += 1
        elif v.decision == DECISION_GUILTY:
            if truth_guilty:
                tp += 1
            else:
                fp += 1
        else:
            if truth_guilty:
                fn += 1
            else:
                tn += 1
    n_total = len(pairs)
    n_classified = n_total - nc
    if n_classified:
        accuracy = (tp + tn) / n_classified
        defined = True
    else:
        accuracy = math.nan
        defined = False
    return EvaluationSummary(
        n_total=n_total,
        n_classified=n_classified,
        nc_fraction=nc / n_total,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=accuracy,
        accuracy_defined=defined,
    )


_CSV_FIELDS = ("actor_id", "ground_truth", "decision", "predicted_class", "selected_acc")


def write_verdict_csv(path, rows: Sequence[tuple]) -> None:
    """Write (verdict, label) pairs as the per-actor report CSV."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for v, label in rows:
            writer.writerow(
                [
                    v.actor_id,
                    label,
                    v.decision,
                    v.predicted_class,
                    "" if v.selected_acc is None else f"{v.selected_acc:.6f}",
                ]
            )


def load_verdict_csv(path) -> list[tuple]:
    """Read a verdict CSV back into (verdict, label) pairs for re-evaluation."""
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            acc = row["selected_acc"]
            v = ActorVerdict(
                actor_id=row["actor_id"],
                decision=row["decision"],
                predicted_class=int(row["predicted_class"]),
                class_probabilities=(),
                selected_acc=float(acc) if acc else None,
                threshold=None,
            )
            out.append((v, int(row["ground_truth"])))
    return out
