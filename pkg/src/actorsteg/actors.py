"""Actor simulation, per-actor features, and dataset generation.

An actor owns 10 to 50 images drawn from a single cover source. Innocent
actors embed nothing; a guilty actor embeds a random fraction (10% to 100%)
of its images with one embedding system, each image at an independent random
payload. Per actor and per system we compute two features: the ratio of
images the primary model predicts as stego, and the estimated accuracy from
the inconsistency report. The final classifiers consume either the full 2N
vector (proposed) or the N ratios alone (baseline).

Datasets are written as PGM files under a content-addressed tree plus
JSON-lines manifests, one actor per line:

    {"actor_id": ..., "source_id": ..., "ground_truth": "innocent"|"guilty",
     "stegosystem": ..., "stego_fraction": ...,
     "images": [{"path": ..., "embed_count": 0|1, "payload_bpp": ...}, ...]}

The stegosystem and stego_fraction keys appear only for guilty actors, and
payload_bpp only for embedded images.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dci import dci_report
from .features import DEFAULT_FEATURES, FeatureConfig
from .imagery import CoverSourceSpec, Image, generate_cover, read_image, write_image
from .seeding import derive_seed, rng_for
from .stego import EmbeddingRecord, StegoSpec, embed_images

GROUND_TRUTH_INNOCENT = "innocent"
GROUND_TRUTH_GUILTY = "guilty"


@dataclass(frozen=True)
class ActorSimConfig:
    """Everything generate_actor needs besides its seed."""

    source: CoverSourceSpec
    systems: tuple
    width: int
    height: int
    payload_range: tuple = (0.05, 0.40)
    image_count_range: tuple = (10, 50)
    stego_fraction_range: tuple = (0.1, 1.0)
    innocent_prior: float = 0.25
    is_csm: bool = False

    def __post_init__(self):
        if not self.systems:
            raise ValueError("at least one stego system is required")
        lo, hi = self.image_count_range
        if not (1 <= lo <= hi):
            raise ValueError("bad image_count_range")
        if not (0.0 <= self.innocent_prior <= 1.0):
            raise ValueError("innocent_prior must lie in [0, 1]")


@dataclass
class ActorRecord:
    """One simulated actor: images plus ground truth.

    ``label`` is 0 for innocent and k+1 for guilty with system index k.
    ``meta[i]`` records how images[i] was produced.
    """

    actor_id: str
    source: CoverSourceSpec
    images: list
    meta: list  # list[EmbeddingRecord]
    label: int
    stego_fraction: Optional[float]
    is_csm: bool

    @property
    def ground_truth(self) -> str:
        return GROUND_TRUTH_INNOCENT if self.label == 0 else GROUND_TRUTH_GUILTY

    @property
    def system_index(self) -> Optional[int]:
        return None if self.label == 0 else self.label - 1

    @property
    def n_images(self) -> int:
        return len(self.images)


def stego_image_count(stego_fraction: float, n_images: int) -> int:
    """Round half up, with a floor of one stego image for guilty actors."""
    return max(1, int(math.floor(stego_fraction * n_images + 0.5)))


def generate_actor(config: ActorSimConfig, rng_seed: int, actor_id: str) -> ActorRecord:
    """Simulate one actor deterministically from (config, rng_seed)."""
    rng = rng_for(rng_seed, "actor-draws")
    lo, hi = config.image_count_range
    n_images = int(rng.integers(lo, hi + 1))
    innocent = bool(rng.random() < config.innocent_prior)
    system_idx = int(rng.integers(len(config.systems)))
    frac = float(rng.uniform(*config.stego_fraction_range))

    covers = [
        generate_cover(
            config.source,
            config.width,
            config.height,
            derive_seed(rng_seed, "img", i),
        )
        for i in range(n_images)
    ]

    if innocent:
        meta = [EmbeddingRecord(spec=None, embed_count=0) for _ in range(n_images)]
        return ActorRecord(
            actor_id=actor_id,
            source=config.source,
            images=covers,
            meta=meta,
            label=0,
            stego_fraction=None,
            is_csm=config.is_csm,
        )

    n_stego = stego_image_count(frac, n_images)
    stego_positions = sorted(int(v) for v in rng.choice(n_images, size=n_stego, replace=False))
    payloads = [float(rng.uniform(*config.payload_range)) for _ in stego_positions]
    keys = [derive_seed(rng_seed, "key", i) for i in stego_positions]
    system = config.systems[system_idx]
    embedded = embed_images([covers[i] for i in stego_positions], system, payloads, keys)

    images = list(covers)
    meta = [EmbeddingRecord(spec=None, embed_count=0) for _ in range(n_images)]
    for pos, img, payload, key in zip(stego_positions, embedded, payloads, keys):
        images[pos] = img
        meta[pos] = EmbeddingRecord(
            spec=StegoSpec(system=system, payload_bpp=payload, key_seed=key),
            embed_count=1,
        )
    return ActorRecord(
        actor_id=actor_id,
        source=config.source,
        images=images,
        meta=meta,
        label=system_idx + 1,
        stego_fraction=frac,
        is_csm=config.is_csm,
    )


@dataclass(frozen=True)
class ActorFeatures:
    """The 2N per-actor features: N predicted-stego ratios, N accuracy estimates."""

    actor_id: str
    ratios: np.ndarray
    acc_estimates: np.ndarray
    label: int

    def proposed_vector(self) -> np.ndarray:
        return np.concatenate([self.ratios, self.acc_estimates])

    def baseline_vector(self) -> np.ndarray:
        return np.asarray(self.ratios, dtype=np.float64)


def build_features(
    actor: ActorRecord,
    model_pairs: Sequence[tuple],
    specs: Sequence[StegoSpec],
    master_seed: int,
    config: FeatureConfig = DEFAULT_FEATURES,
) -> ActorFeatures:
    """One inconsistency report per system; collect (ratio, estimated accuracy)."""
    if not actor.images:
        raise ValueError(f"actor {actor.actor_id} has no images")
    if len(model_pairs) != len(specs):
        raise ValueError("one (model_a, model_b) pair per stego spec is required")
    ratios = np.zeros(len(specs))
    accs = np.zeros(len(specs))
    for k, ((model_a, model_b), spec) in enumerate(zip(model_pairs, specs)):
        seed = derive_seed(master_seed, "dci", actor.actor_id, spec.system)
        report = dci_report(model_a, model_b, actor.images, spec, seed, config)
        ratios[k] = report.predicted_stego_ratio
        accs[k] = report.estimated_accuracy
    return ActorFeatures(
        actor_id=actor.actor_id, ratios=ratios, acc_estimates=accs, label=actor.label
    )


def features_matrix(features: Sequence[ActorFeatures], baseline: bool = False):
    """Stack per-actor features into (matrix, labels)."""
    if not features:
        raise ValueError("no actor features given")
    rows = [f.baseline_vector() if baseline else f.proposed_vector() for f in features]
    labels = np.array([f.label for f in features], dtype=np.int64)
    return np.stack(rows), labels


# ---------------------------------------------------------------------------
# Dataset generation and manifests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetPaths:
    root: Path
    images_dir: Path
    train_manifest: Path
    test_manifests: dict  # csm_percent -> Path

    @classmethod
    def from_dir(cls, root) -> "DatasetPaths":
        root = Path(root)
        meta_path = root / "dataset.json"
        if not meta_path.exists():
            raise FileNotFoundError(f"dataset metadata not found: {meta_path}")
        meta = json.loads(meta_path.read_text())
        return cls(
            root=root,
            images_dir=root / "images",
            train_manifest=root / meta["train_manifest"],
            test_manifests={int(k): root / v for k, v in meta["test_manifests"].items()},
        )


def _store_image(image: Image, images_dir: Path) -> str:
    digest = image.content_hash()
    rel = f"images/{digest[:2]}/{digest}.pgm"
    path = images_dir.parent / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    if not path.exists():
        write_image(image, path)
    return rel


def actor_to_manifest_row(record: ActorRecord, image_paths: Sequence[str], systems) -> dict:
    row = {
        "actor_id": record.actor_id,
        "source_id": record.source.source_id,
        "ground_truth": record.ground_truth,
        "images": [],
    }
    if record.label > 0:
        row["stegosystem"] = systems[record.label - 1]
        row["stego_fraction"] = record.stego_fraction
    for path, meta in zip(image_paths, record.meta):
        entry = {"path": path, "embed_count": meta.embed_count}
        if meta.embed_count > 0:
            entry["payload_bpp"] = meta.spec.payload_bpp
        row["images"].append(entry)
    return row


def write_manifest(path: Path, rows: Sequence[dict]) -> None:
    text = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    Path(path).write_text(text, encoding="ascii")


def load_manifest(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    rows = []
    with path.open(encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def manifest_label(row: dict, systems: Sequence[str]) -> int:
    if row["ground_truth"] == GROUND_TRUTH_INNOCENT:
        return 0
    return 1 + list(systems).index(row["stegosystem"])


def load_actor_images(row: dict, dataset_root) -> list[Image]:
    root = Path(dataset_root)
    return [read_image(root / entry["path"]) for entry in row["images"]]


def generate_dataset(config, out_dir) -> DatasetPaths:
    """Write a full dataset: train manifest plus one test manifest per sweep point.

    Training actors come from the training source only. Two equally sized test
    pools are generated (training-source and mismatch-source actors); the
    manifest at sweep point p mixes exactly round(p/100 * n_test) mismatch
    actors with the complement of training-source actors, taking prefixes of
    the pools so the selections are nested across sweep points.
    """
    root = Path(out_dir)
    images_dir = root / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    master = config.master_seed
    systems = tuple(config.systems)

    def sim_config(source, innocent_prior, is_csm):
        return ActorSimConfig(
            source=source,
            systems=systems,
            width=config.width,
            height=config.height,
            payload_range=tuple(config.payload_range),
            image_count_range=tuple(config.image_count_range),
            stego_fraction_range=tuple(config.stego_fraction_range),
            innocent_prior=innocent_prior,
            is_csm=is_csm,
        )

    def build_rows(prefix, count, stream, configs_for):
        rows = []
        for i in range(count):
            seed = derive_seed(master, stream, i)
            cfg = configs_for(i, seed)
            actor = generate_actor(cfg, seed, actor_id=f"{prefix}-{i:05d}")
            paths = [_store_image(img, images_dir) for img in actor.images]
            rows.append(actor_to_manifest_row(actor, paths, systems))
        return rows

    train_rows = build_rows(
        "train",
        config.n_train_actors_scaled,
        "actors/train",
        lambda i, seed: sim_config(config.train_source, config.train_innocent_prior, False),
    )

    n_test = config.n_test_actors_scaled
    nocsm_rows = build_rows(
        "test-base",
        n_test,
        "actors/test-base",
        lambda i, seed: sim_config(config.train_source, config.test_innocent_prior, False),
    )

    csm_sources = list(config.csm_sources)

    def csm_cfg(i, seed):
        pick = int(rng_for(seed, "csm-source").integers(len(csm_sources)))
        return sim_config(csm_sources[pick], config.test_innocent_prior, True)

    csm_rows = build_rows("test-csm", n_test, "actors/test-csm", csm_cfg)

    train_manifest = root / "train.jsonl"
    write_manifest(train_manifest, train_rows)

    test_manifests = {}
    for pct in config.csm_sweep:
        n_csm = int(round(pct / 100.0 * n_test))
        rows = nocsm_rows[: n_test - n_csm] + csm_rows[:n_csm]
        path = root / f"test_csm{pct:03d}.jsonl"
        write_manifest(path, rows)
        test_manifests[pct] = path

    meta = {
        "train_manifest": train_manifest.name,
        "test_manifests": {str(p): path.name for p, path in test_manifests.items()},
        "n_train_actors": len(train_rows),
        "n_test_actors": n_test,
        "systems": list(systems),
        "master_seed": master,
    }
    (root / "dataset.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return DatasetPaths(
        root=root,
        images_dir=images_dir,
        train_manifest=train_manifest,
        test_manifests=test_manifests,
    )


def generate_calibration_actors(config, n_actors: int, system_index: int, stream: str):
    """Guilty actors from the training source with a balanced stego fraction.

    Used to check the accuracy estimator against measured accuracy: each
    actor embeds exactly half (rounded) of its images with one system.
    """
    out = []
    systems = tuple(config.systems)
    for i in range(n_actors):
        seed = derive_seed(config.master_seed, stream, i)
        rng = rng_for(seed, "calib-draws")
        lo, hi = config.image_count_range
        n_images = int(rng.integers(lo, hi + 1))
        covers = [
            generate_cover(
                config.train_source, config.width, config.height, derive_seed(seed, "img", j)
            )
            for j in range(n_images)
        ]
        n_stego = stego_image_count(0.5, n_images)
        positions = sorted(int(v) for v in rng.choice(n_images, size=n_stego, replace=False))
        payloads = [float(rng.uniform(*config.payload_range)) for _ in positions]
        keys = [derive_seed(seed, "key", j) for j in positions]
        embedded = embed_images(
            [covers[j] for j in positions], systems[system_index], payloads, keys
        )
        images = list(covers)
        meta = [EmbeddingRecord(spec=None, embed_count=0) for _ in range(n_images)]
        for pos, img, payload, key in zip(positions, embedded, payloads, keys):
            images[pos] = img
            meta[pos] = EmbeddingRecord(
                spec=StegoSpec(systems[system_index], payload, key), embed_count=1
            )
        out.append(
            ActorRecord(
                actor_id=f"calib-{i:04d}",
                source=config.train_source,
                images=images,
                meta=meta,
                label=system_index + 1,
                stego_fraction=0.5,
                is_csm=False,
            )
        )
    return out
