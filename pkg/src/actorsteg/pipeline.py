"""End-to-end orchestration: dataset generation, training, evaluation, sweep.

Everything is seeded from the experiment config, so rerunning any stage with
the same config and seed reproduces its outputs byte for byte. The image
classifiers train on a dedicated pool of covers from the training source
(each cover gets an embedded counterpart per system, so the binary problems
are balanced by construction); the actor classifiers then train on the
features of the training actors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .actors import (
    ActorFeatures,
    DatasetPaths,
    generate_dataset,
    load_actor_images,
    load_manifest,
    manifest_label,
)
from .config import ExperimentConfig
from .dci import dci_report
from .features import directionality_audit, extract_many
from .imagery import generate_cover
from .learner import load_model, train
from .seeding import derive_seed, rng_for
from .stego import StegoSpec, embed_images
from .verdict import (
    evaluate,
    judge,
    judge_baseline,
    train_actor_classifier,
    write_verdict_csv,
)

MODEL_MANIFEST = "manifest.json"


@dataclass(frozen=True)
class ModelPaths:
    root: Path
    image_models: dict  # system -> (path_a, path_b)
    actor_final: Path
    actor_baseline: Path

    @classmethod
    def from_dir(cls, root) -> "ModelPaths":
        root = Path(root)
        manifest = root / MODEL_MANIFEST
        if not manifest.exists():
            raise FileNotFoundError(f"model manifest not found: {manifest}")
        meta = json.loads(manifest.read_text())
        return cls(
            root=root,
            image_models={
                sys_name: (root / pair[0], root / pair[1])
                for sys_name, pair in meta["image_models"].items()
            },
            actor_final=root / meta["actor_final"],
            actor_baseline=root / meta["actor_baseline"],
        )


def _pool_covers(config: ExperimentConfig):
    n = config.n_pool_images_scaled
    return [
        generate_cover(
            config.train_source,
            config.width,
            config.height,
            derive_seed(config.master_seed, "imagepool", i),
        )
        for i in range(n)
    ]


def _train_image_pair(config: ExperimentConfig, system: str, covers, cover_feats):
    """Train the cover/stego and stego/double-stego models for one system."""
    master = config.master_seed
    n = len(covers)
    rng = rng_for(master, "imagepool-payloads", system)
    payloads = rng.uniform(*config.payload_range, size=n)
    keys = [derive_seed(master, "imagepool-key", system, i) for i in range(n)]
    stegos = embed_images(covers, system, payloads, keys)
    stego_feats = extract_many(stegos, config.features)

    # Primary problem: covers (0) vs stegos (1), balanced by construction.
    xa = np.vstack([cover_feats, stego_feats])
    ya = np.concatenate([np.zeros(n, np.int64), np.ones(n, np.int64)])
    model_a = train(xa, ya, config.image_learner, n_classes=2)

    # Secondary problem: everything re-embedded once more; covers became
    # stegos (0) and stegos became double stegos (1).
    rng2 = rng_for(master, "imagepool-payloads2", system)
    payloads2 = rng2.uniform(*config.payload_range, size=2 * n)
    keys2 = [derive_seed(master, "imagepool-key2", system, i) for i in range(2 * n)]
    b_images = embed_images(covers + stegos, system, payloads2, keys2)
    xb = extract_many(b_images, config.features)
    yb = ya.copy()
    model_b = train(xb, yb, config.image_learner, n_classes=2)
    return model_a, model_b


def _actor_features_from_manifest(
    config: ExperimentConfig,
    rows,
    dataset_root,
    model_pairs,
    specs,
    cache: Optional[dict] = None,
) -> list[ActorFeatures]:
    feats = []
    for row in rows:
        actor_id = row["actor_id"]
        if cache is not None and actor_id in cache:
            feats.append(cache[actor_id])
            continue
        images = load_actor_images(row, dataset_root)
        label = manifest_label(row, config.systems)
        ratios = np.zeros(len(specs))
        accs = np.zeros(len(specs))
        for k, ((model_a, model_b), spec) in enumerate(zip(model_pairs, specs)):
            seed = derive_seed(config.master_seed, "dci", actor_id, spec.system)
            report = dci_report(model_a, model_b, images, spec, seed, config.features)
            ratios[k] = report.predicted_stego_ratio
            accs[k] = report.estimated_accuracy
        af = ActorFeatures(actor_id=actor_id, ratios=ratios, acc_estimates=accs, label=label)
        if cache is not None:
            cache[actor_id] = af
        feats.append(af)
    return feats


def _write_actor_features_csv(path, feats, systems):
    header = (
        ["actor_id"]
        + [f"ratio_{s}" for s in systems]
        + [f"acc_{s}" for s in systems]
        + ["label"]
    )
    lines = [",".join(header)]
    for f in feats:
        vals = [f.actor_id]
        vals += [f"{v:.10f}" for v in f.ratios]
        vals += [f"{v:.10f}" for v in f.acc_estimates]
        vals.append(str(f.label))
        lines.append(",".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")


def load_actor_features_csv(path) -> list[ActorFeatures]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    n = (len(header) - 2) // 2
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        out.append(
            ActorFeatures(
                actor_id=parts[0],
                ratios=np.array([float(v) for v in parts[1 : 1 + n]]),
                acc_estimates=np.array([float(v) for v in parts[1 + n : 1 + 2 * n]]),
                label=int(parts[-1]),
            )
        )
    return out


def _file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def train_models(config: ExperimentConfig, dataset: DatasetPaths, out_dir) -> ModelPaths:
    """Train the 2N image models and the two actor models; write 2N+2 files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not dataset.train_manifest.exists():
        raise FileNotFoundError(f"training manifest not found: {dataset.train_manifest}")

    covers = _pool_covers(config)
    cover_feats = extract_many(covers, config.features)

    image_models = {}
    pairs = []
    for system in config.systems:
        model_a, model_b = _train_image_pair(config, system, covers, cover_feats)
        pa, pb = out / f"image_a_{system}.json", out / f"image_b_{system}.json"
        model_a.save(pa)
        model_b.save(pb)
        image_models[system] = (pa, pb)
        pairs.append((model_a, model_b))

    specs = [config.stego_spec_for(k) for k in range(config.n_systems)]
    train_rows = load_manifest(dataset.train_manifest)
    feats = _actor_features_from_manifest(config, train_rows, dataset.root, pairs, specs)
    _write_actor_features_csv(out / "train_actor_features.csv", feats, config.systems)

    final = train_actor_classifier(feats, config.actor_learner, baseline=False)
    baseline = train_actor_classifier(feats, config.actor_learner, baseline=True)
    p_final = out / "actor_final.json"
    p_base = out / "actor_baseline.json"
    final.save(p_final)
    baseline.save(p_base)

    manifest = {
        "config_hash": config.config_hash(),
        "train_manifest": str(dataset.train_manifest),
        "train_manifest_sha256": _file_hash(dataset.train_manifest),
        "image_models": {s: [pa.name, pb.name] for s, (pa, pb) in image_models.items()},
        "actor_final": p_final.name,
        "actor_baseline": p_base.name,
        "model_sha256": {
            p.name: _file_hash(p)
            for p in [*[q for pair in image_models.values() for q in pair], p_final, p_base]
        },
    }
    (out / MODEL_MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ModelPaths(
        root=out,
        image_models=image_models,
        actor_final=p_final,
        actor_baseline=p_base,
    )


def _load_model_pairs(config: ExperimentConfig, models: ModelPaths):
    pairs = []
    for system in config.systems:
        if system not in models.image_models:
            raise FileNotFoundError(f"no trained image models for system {system!r}")
        pa, pb = models.image_models[system]
        pairs.append((load_model(pa), load_model(pb)))
    return pairs


def evaluate_models(
    config: ExperimentConfig,
    dataset: DatasetPaths,
    models: ModelPaths,
    out_dir,
    threshold: Optional[float] = None,
    csm_points=None,
) -> dict:
    """Judge every test actor at each sweep point and emit the report files.

    Writes, per sweep point, a per-actor verdict CSV and a JSON summary, plus
    the top-level report table (CSV and JSON) across sweep points. Actor
    features are computed once per unique actor and reused across points.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    thr = config.threshold if threshold is None else float(threshold)
    points = sorted(csm_points if csm_points is not None else dataset.test_manifests.keys())
    for pct in points:
        if pct not in dataset.test_manifests:
            raise FileNotFoundError(f"no test manifest for csm {pct}%")

    pairs = _load_model_pairs(config, models)
    specs = [config.stego_spec_for(k) for k in range(config.n_systems)]
    final = load_model(models.actor_final)
    baseline = load_model(models.actor_baseline)

    cache: dict = {}
    report_rows = []
    all_feats: dict = {}
    for pct in points:
        rows = load_manifest(dataset.test_manifests[pct])
        feats = _actor_features_from_manifest(
            config, rows, dataset.root, pairs, specs, cache=cache
        )
        for f in feats:
            all_feats[f.actor_id] = f

        proposed = [(judge(f, final, thr), f.label) for f in feats]
        base = [(judge_baseline(f, baseline), f.label) for f in feats]
        prop_summary = evaluate(proposed)
        base_summary = evaluate(base)

        write_verdict_csv(out / f"verdicts_proposed_csm{pct:03d}.csv", proposed)
        write_verdict_csv(out / f"verdicts_baseline_csm{pct:03d}.csv", base)
        point_summary = {
            "csm_percent": pct,
            "threshold": thr,
            "proposed": prop_summary.to_dict(),
            "baseline": base_summary.to_dict(),
        }
        (out / f"summary_csm{pct:03d}.json").write_text(
            json.dumps(point_summary, indent=2, sort_keys=True) + "\n"
        )
        report_rows.append(
            {
                "csm_percent": pct,
                "baseline_accuracy": base_summary.accuracy if base_summary.accuracy_defined else None,
                "proposed_accuracy": prop_summary.accuracy if prop_summary.accuracy_defined else None,
                "nc_fraction": prop_summary.nc_fraction,
            }
        )

    feats_sorted = [all_feats[k] for k in sorted(all_feats)]
    _write_actor_features_csv(out / "test_actor_features.csv", feats_sorted, config.systems)

    report = {"threshold": thr, "rows": report_rows}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    lines = ["csm_percent,baseline_accuracy,proposed_accuracy,nc_fraction"]
    for r in report_rows:
        ba = "" if r["baseline_accuracy"] is None else f"{r['baseline_accuracy']:.6f}"
        pa = "" if r["proposed_accuracy"] is None else f"{r['proposed_accuracy']:.6f}"
        lines.append(f"{r['csm_percent']},{ba},{pa},{r['nc_fraction']:.6f}")
    (out / "report.csv").write_text("\n".join(lines) + "\n")
    return report


def run_sweep(config: ExperimentConfig, out_root) -> dict:
    """Generate, train, and evaluate in one deterministic run."""
    root = Path(out_root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.json").write_text(config.to_json())
    dataset = generate_dataset(config, root / "dataset")
    models = train_models(config, dataset, root / "models")
    return evaluate_models(config, dataset, models, root / "eval")


def audit_directionality_run(
    config: ExperimentConfig,
    n_covers: int = 200,
    system: str = "lsb_matching",
    payload_bpp: float = 0.4,
) -> dict:
    """Standalone diagnostic: directionality of the feature set on fresh covers."""
    covers = [
        generate_cover(
            config.train_source,
            config.width,
            config.height,
            derive_seed(config.master_seed, "audit-covers", i),
        )
        for i in range(n_covers)
    ]
    spec = StegoSpec(
        system=system,
        payload_bpp=payload_bpp,
        key_seed=derive_seed(config.master_seed, "audit-key", system),
    )
    report = directionality_audit(covers, spec, config.features)
    return {
        "system": system,
        "payload_bpp": payload_bpp,
        "n_covers": n_covers,
        "overall_fraction": report.overall_fraction,
        "per_feature_fraction": report.to_dict()["per_feature_fraction"],
    }
