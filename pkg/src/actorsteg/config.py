"""Experiment configuration: one serializable object drives a whole run.

A run is reproducible from (config, code version): every random component
draws from a named substream of the master seed. The default experiment uses
three embedding systems, a training source, and two held-out mismatch
sources, at a desk scale that completes a full sweep in minutes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .features import FeatureConfig
from .imagery import CoverSourceSpec
from .learner import LearnerConfig
from .seeding import derive_seed
from .stego import SYSTEMS


class ConfigError(Exception):
    """Invalid experiment configuration."""


_SOURCE_SCHEMA = {
    "type": "object",
    "required": [
        "source_id",
        "base_noise_sigma",
        "smoothing_kernel_radius",
        "quantization_step",
        "resample_factor",
        "rng_seed",
    ],
    "properties": {
        "source_id": {"type": "string", "minLength": 1},
        "base_noise_sigma": {"type": "number", "minimum": 0},
        "smoothing_kernel_radius": {"type": "integer", "minimum": 0},
        "quantization_step": {"type": "integer", "minimum": 1},
        "resample_factor": {"type": "number", "exclusiveMinimum": 0.5, "maximum": 2.0},
        "rng_seed": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

_LEARNER_SCHEMA = {
    "type": "object",
    "required": ["n_rounds", "learning_rate", "max_stumps_per_round"],
    "properties": {
        "n_rounds": {"type": "integer", "minimum": 1},
        "learning_rate": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "max_stumps_per_round": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

_RANGE = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": [
        "width",
        "height",
        "train_source",
        "csm_sources",
        "systems",
        "master_seed",
    ],
    "properties": {
        "width": {"type": "integer", "minimum": 8},
        "height": {"type": "integer", "minimum": 8},
        "train_source": _SOURCE_SCHEMA,
        "csm_sources": {"type": "array", "items": _SOURCE_SCHEMA, "minItems": 1},
        "systems": {
            "type": "array",
            "items": {"type": "string", "enum": list(SYSTEMS)},
            "minItems": 1,
        },
        "payload_range": _RANGE,
        "dci_payload_bpp": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "n_train_actors": {"type": "integer", "minimum": 1},
        "n_test_actors": {"type": "integer", "minimum": 1},
        "n_pool_images": {"type": "integer", "minimum": 2},
        "image_count_range": _RANGE,
        "stego_fraction_range": _RANGE,
        "train_innocent_prior": {"type": "number", "minimum": 0, "maximum": 1},
        "test_innocent_prior": {"type": "number", "minimum": 0, "maximum": 1},
        "csm_sweep": {
            "type": "array",
            "items": {"type": "number", "minimum": 0, "maximum": 100},
            "minItems": 1,
        },
        "image_learner": _LEARNER_SCHEMA,
        "actor_learner": _LEARNER_SCHEMA,
        "features": {
            "type": "object",
            "required": ["truncation", "cooc_len"],
            "properties": {
                "truncation": {"type": "integer", "minimum": 1},
                "cooc_len": {"type": "integer", "enum": [2, 4]},
            },
            "additionalProperties": False,
        },
        "threshold": {"type": "number", "minimum": 0, "maximum": 1},
        "master_seed": {"type": "integer", "minimum": 0},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "out_dir": {"type": "string"},
    },
    "additionalProperties": False,
}


@dataclass(frozen=True)
class ExperimentConfig:
    train_source: CoverSourceSpec
    csm_sources: tuple
    width: int = 64
    height: int = 64
    systems: tuple = SYSTEMS
    payload_range: tuple = (0.05, 0.40)
    dci_payload_bpp: float = 0.13
    n_train_actors: int = 1000
    n_test_actors: int = 400
    n_pool_images: int = 400
    image_count_range: tuple = (10, 50)
    stego_fraction_range: tuple = (0.1, 1.0)
    train_innocent_prior: float = 0.25
    test_innocent_prior: float = 0.5
    csm_sweep: tuple = (0, 25, 50, 75, 100)
    image_learner: LearnerConfig = field(default_factory=LearnerConfig)
    actor_learner: LearnerConfig = field(default_factory=LearnerConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    threshold: float = 0.7
    master_seed: int = 271828
    scale: float = 1.0
    out_dir: str = "runs/experiment"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if min(self.width, self.height) < 8:
            raise ConfigError("geometry must be at least 8x8")
        for sys_name in self.systems:
            if sys_name not in SYSTEMS:
                raise ConfigError(f"unknown system {sys_name!r}")
        if len(set(self.systems)) != len(self.systems):
            raise ConfigError("duplicate stego systems")
        lo, hi = self.payload_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ConfigError("payload_range must satisfy 0 < lo <= hi <= 1")
        if not (0.0 < self.dci_payload_bpp <= 1.0):
            raise ConfigError("dci_payload_bpp must lie in (0, 1]")
        lo, hi = self.image_count_range
        if not (1 <= lo <= hi):
            raise ConfigError("bad image_count_range")
        lo, hi = self.stego_fraction_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ConfigError("stego_fraction_range must satisfy 0 < lo <= hi <= 1")
        for pct in self.csm_sweep:
            if not (0 <= pct <= 100):
                raise ConfigError(f"csm sweep point {pct} outside [0, 100]")
        if not (0.0 <= self.threshold <= 1.0):
            raise ConfigError("threshold must lie in [0, 1]")
        if self.scale <= 0:
            raise ConfigError("scale must be positive")
        all_sources = [self.train_source, *self.csm_sources]
        ids = [s.source_id for s in all_sources]
        if len(set(ids)) != len(ids):
            raise ConfigError("source ids must be distinct")
        params = [
            (s.base_noise_sigma, s.smoothing_kernel_radius, s.quantization_step, s.resample_factor)
            for s in all_sources
        ]
        if len(set(params)) != len(params):
            raise ConfigError("distinct sources must differ in at least one processing parameter")

    # Desk-scale knob: actor counts and the image pool scale together.
    def _scaled(self, n: int) -> int:
        return max(1, int(round(n * self.scale)))

    @property
    def n_train_actors_scaled(self) -> int:
        return self._scaled(self.n_train_actors)

    @property
    def n_test_actors_scaled(self) -> int:
        return self._scaled(self.n_test_actors)

    @property
    def n_pool_images_scaled(self) -> int:
        return max(2, int(round(self.n_pool_images * self.scale)))

    @property
    def n_systems(self) -> int:
        return len(self.systems)

    @classmethod
    def default(cls, master_seed: int = 271828) -> "ExperimentConfig":
        """Default experiment: one training source, four held-out mismatch sources.

        The mismatch pool has graded severity, mirroring what heterogeneous
        real-world sources produce: S1 (heavier smoothing plus downsampling)
        stays within the classifiers' generalization, so those actors remain
        classifiable; S2 through S4 are progressively rougher textures that
        collapse the classifiers and should be caught by the reject rule.
        """

        def src(source_id, sigma, smooth, quant, resample):
            return CoverSourceSpec(
                source_id=source_id,
                base_noise_sigma=sigma,
                smoothing_kernel_radius=smooth,
                quantization_step=quant,
                resample_factor=resample,
                rng_seed=derive_seed(master_seed, "source", source_id),
            )

        return cls(
            train_source=src("S0", 8.0, 4, 1, 1.0),
            csm_sources=(
                src("S1", 8.0, 5, 1, 0.75),
                src("S2", 8.0, 2, 1, 1.0),
                src("S3", 12.0, 3, 1, 1.0),
                src("S4", 16.0, 4, 1, 1.0),
            ),
            master_seed=master_seed,
        )

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "train_source": self.train_source.to_dict(),
            "csm_sources": [s.to_dict() for s in self.csm_sources],
            "systems": list(self.systems),
            "payload_range": list(self.payload_range),
            "dci_payload_bpp": self.dci_payload_bpp,
            "n_train_actors": self.n_train_actors,
            "n_test_actors": self.n_test_actors,
            "n_pool_images": self.n_pool_images,
            "image_count_range": list(self.image_count_range),
            "stego_fraction_range": list(self.stego_fraction_range),
            "train_innocent_prior": self.train_innocent_prior,
            "test_innocent_prior": self.test_innocent_prior,
            "csm_sweep": list(self.csm_sweep),
            "image_learner": self.image_learner.to_dict(),
            "actor_learner": self.actor_learner.to_dict(),
            "features": self.features.to_dict(),
            "threshold": self.threshold,
            "master_seed": self.master_seed,
            "scale": self.scale,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(d, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config schema violation: {exc.message}") from None
        base = cls.default(master_seed=int(d["master_seed"]))
        kwargs = {
            "train_source": CoverSourceSpec.from_dict(d["train_source"]),
            "csm_sources": tuple(CoverSourceSpec.from_dict(s) for s in d["csm_sources"]),
            "systems": tuple(d["systems"]),
            "master_seed": int(d["master_seed"]),
        }
        for key in ("width", "height", "n_train_actors", "n_test_actors", "n_pool_images"):
            if key in d:
                kwargs[key] = int(d[key])
        for key in (
            "dci_payload_bpp",
            "train_innocent_prior",
            "test_innocent_prior",
            "threshold",
            "scale",
        ):
            if key in d:
                kwargs[key] = float(d[key])
        for key in ("payload_range", "stego_fraction_range"):
            if key in d:
                kwargs[key] = tuple(float(v) for v in d[key])
        if "image_count_range" in d:
            kwargs["image_count_range"] = tuple(int(v) for v in d["image_count_range"])
        if "csm_sweep" in d:
            kwargs["csm_sweep"] = tuple(int(v) for v in d["csm_sweep"])
        if "image_learner" in d:
            kwargs["image_learner"] = LearnerConfig.from_dict(d["image_learner"])
        if "actor_learner" in d:
            kwargs["actor_learner"] = LearnerConfig.from_dict(d["actor_learner"])
        if "features" in d:
            kwargs["features"] = FeatureConfig.from_dict(d["features"])
        if "out_dir" in d:
            kwargs["out_dir"] = str(d["out_dir"])
        try:
            return replace(base, **kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except ValueError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        try:
            return replace(self, **{k: v for k, v in kwargs.items() if v is not None})
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def stego_spec_for(self, system_index: int):
        """The probe spec used for inconsistency reports on system k."""
        from .stego import StegoSpec

        name = self.systems[system_index]
        return StegoSpec(
            system=name,
            payload_bpp=self.dci_payload_bpp,
            key_seed=derive_seed(self.master_seed, "dci-probe", name),
        )

    def config_hash(self) -> str:
        import hashlib

        return hashlib.sha256(self.to_json().encode("ascii")).hexdigest()
