"""Actor-based image steganalysis with classifier-inconsistency detection.

The package detects actors who embed hidden payloads in batches of images,
and remains usable when the actors' images come from a different source than
the training data: per-system image classifiers feed an inconsistency-based
accuracy estimate, and a final actor classifier with a reject option either
names a verdict or declares the actor inconclusive due to source mismatch.
"""

from .actors import (
    ActorFeatures,
    ActorRecord,
    ActorSimConfig,
    DatasetPaths,
    build_features,
    generate_actor,
    generate_dataset,
)
from .config import ConfigError, ExperimentConfig
from .dci import (
    DciReport,
    ImageVerdict,
    QuadOutcome,
    accuracy_estimate,
    classify_quad,
    dci_report,
    table_lookup,
)
from .features import (
    DEFAULT_FEATURES,
    DirectionalityReport,
    FeatureConfig,
    directionality_audit,
    extract,
    extract_many,
)
from .imagery import (
    CoverSourceSpec,
    Image,
    MalformedHeaderError,
    PgmError,
    TruncatedDataError,
    UnsupportedDepthError,
    UnsupportedFormatError,
    generate_cover,
    read_image,
    write_image,
)
from .learner import BoostedModel, LearnerConfig, ModelFileError, Stump, load_model, train
from .stego import (
    SYSTEMS,
    EmbeddingRecord,
    StegoSpec,
    change_rates,
    cost_map,
    embed,
    embed_images,
    subsequent_embed,
    ternary_entropy,
)
from .verdict import (
    ActorVerdict,
    EvaluationSummary,
    evaluate,
    judge,
    judge_baseline,
    train_actor_classifier,
)

__version__ = "0.1.0"
