"""Classifier-inconsistency detection over image pairs.

For every suspect image A' we form B' by re-embedding A' with fresh key
material and collect four binary classifications: the secondary model on A',
the primary model on B', the primary model on A', and the secondary model on
B'. Only two of the sixteen outcomes are self-consistent; the rest flag the
image as not classified (NC) through one of two filters:

* Type 1: the primary verdict on A' disagrees with the secondary verdict on
  B' (they should coincide, since B' is A' plus one embedding).
* Type 2: an impossible verdict regardless of the other bits: A' read as
  double stego by the secondary model, or B' read as cover by the primary.

The filters are mutually exclusive by construction (Type 1 applies only when
no Type 2 condition holds). The count of inconsistencies over an actor's
images yields an estimate of the primary classifier's accuracy on that actor
without ground-truth labels: 1 - INC / (2 * n_images), which degrades when
training and test image sources mismatch and the classifiers misbehave.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import DEFAULT_FEATURES, FeatureConfig, extract
from .imagery import Image
from .seeding import derive_seed
from .stego import StegoSpec, subsequent_embed_images

LABEL_COVER = "cover"
LABEL_STEGO = "stego"
LABEL_NC = "nc"


@dataclass(frozen=True)
class QuadOutcome:
    """The four binary verdicts for one image, in consistency-table order.

    cb_a: secondary model on A' (0 = stego, 1 = double stego)
    ca_b: primary model on B'   (0 = cover, 1 = stego)
    ca_a: primary model on A'   (0 = cover, 1 = stego)
    cb_b: secondary model on B' (0 = stego, 1 = double stego)
    """

    cb_a: int
    ca_b: int
    ca_a: int
    cb_b: int

    def __post_init__(self):
        for name in ("cb_a", "ca_b", "ca_a", "cb_b"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.cb_a, self.ca_b, self.ca_a, self.cb_b)


def table_lookup(outcome: QuadOutcome) -> tuple[str, bool, bool]:
    """Map a quad outcome to (label, type-1 flag, type-2 flag).

    Total over all 16 outcomes. Exactly two outcomes are consistent:
    (0,1,0,0) -> cover and (0,1,1,1) -> stego. Type 2 fires whenever
    cb_a = 1 or ca_b = 0; among the remaining outcomes, Type 1 fires when
    ca_a != cb_b.
    """
    if outcome.cb_a == 1 or outcome.ca_b == 0:
        return (LABEL_NC, False, True)
    if outcome.ca_a == 0 and outcome.cb_b == 0:
        return (LABEL_COVER, False, False)
    if outcome.ca_a == 1 and outcome.cb_b == 1:
        return (LABEL_STEGO, False, False)
    return (LABEL_NC, True, False)


@dataclass(frozen=True)
class ImageVerdict:
    outcome: QuadOutcome
    label: str
    nc_type1: bool
    nc_type2: bool

    @classmethod
    def from_outcome(cls, outcome: QuadOutcome) -> "ImageVerdict":
        label, t1, t2 = table_lookup(outcome)
        return cls(outcome=outcome, label=label, nc_type1=t1, nc_type2=t2)

    def to_dict(self) -> dict:
        return {
            "outcome": list(self.outcome.as_tuple()),
            "label": self.label,
            "nc_type1": self.nc_type1,
            "nc_type2": self.nc_type2,
        }


def accuracy_estimate(inc_count: int, n_images: int) -> float:
    """Estimated primary-classifier accuracy: 1 - INC / (2 * n_images)."""
    if n_images < 1:
        raise ValueError("n_images must be >= 1")
    if not (0 <= inc_count <= 2 * n_images):
        raise ValueError(f"inc_count {inc_count} outside [0, {2 * n_images}]")
    return 1.0 - inc_count / (2.0 * n_images)


@dataclass(frozen=True)
class DciReport:
    """Per-actor inconsistency summary for one embedding system."""

    verdicts: tuple
    inc_count: int
    estimated_accuracy: float
    predicted_stego_ratio: float

    @property
    def n_images(self) -> int:
        return len(self.verdicts)

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "inc_count": self.inc_count,
            "estimated_accuracy": self.estimated_accuracy,
            "predicted_stego_ratio": self.predicted_stego_ratio,
            "verdicts": [v.to_dict() for v in self.verdicts],
        }


def classify_quad(
    model_a,
    model_b,
    a_image: Image,
    spec: StegoSpec,
    fresh_seed: int,
    config: FeatureConfig = DEFAULT_FEATURES,
) -> QuadOutcome:
    """Run the four classifications for one image.

    ``model_a`` and ``model_b`` must be the primary/secondary pair trained
    for the same system as ``spec``. Features are extracted once per image.
    """
    b_image = subsequent_embed_images([a_image], spec, [fresh_seed])[0]
    fa = extract(a_image, config)
    fb = extract(b_image, config)
    return QuadOutcome(
        cb_a=int(model_b.predict(fa)),
        ca_b=int(model_a.predict(fb)),
        ca_a=int(model_a.predict(fa)),
        cb_b=int(model_b.predict(fb)),
    )


def dci_report(
    model_a,
    model_b,
    actor_images: Sequence[Image],
    spec: StegoSpec,
    seed_policy: int,
    config: FeatureConfig = DEFAULT_FEATURES,
) -> DciReport:
    """Inconsistency report over all images of one actor.

    ``seed_policy`` is a master seed; the fresh key for each image's
    subsequent embedding derives from it by image index, so reports are
    replayable. Each image contributes at most one inconsistency (the two
    filter types are mutually exclusive).
    """
    images = list(actor_images)
    if not images:
        raise ValueError("dci report needs at least one image")
    fresh = [derive_seed(seed_policy, "b-embed", i) for i in range(len(images))]
    b_images = subsequent_embed_images(images, spec, fresh)

    feats_a = np.stack([extract(img, config) for img in images])
    feats_b = np.stack([extract(img, config) for img in b_images])
    cb_a = np.asarray(model_b.predict(feats_a)).reshape(-1)
    ca_b = np.asarray(model_a.predict(feats_b)).reshape(-1)
    ca_a = np.asarray(model_a.predict(feats_a)).reshape(-1)
    cb_b = np.asarray(model_b.predict(feats_b)).reshape(-1)

    verdicts = []
    inc = 0
    for i in range(len(images)):
        outcome = QuadOutcome(int(cb_a[i]), int(ca_b[i]), int(ca_a[i]), int(cb_b[i]))
        v = ImageVerdict.from_outcome(outcome)
        inc += int(v.nc_type1) + int(v.nc_type2)
        verdicts.append(v)
    return DciReport(
        verdicts=tuple(verdicts),
        inc_count=inc,
        estimated_accuracy=accuracy_estimate(inc, len(images)),
        predicted_stego_ratio=float(np.mean(ca_a == 1)),
    )
