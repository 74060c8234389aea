import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from actorsteg.config import ExperimentConfig
from actorsteg.features import extract_many
from actorsteg.learner import LearnerConfig
from actorsteg.pipeline import _pool_covers, _train_image_pair

settings.register_profile(
    "ci",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

_ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        _ACCEPTANCE_RESULTS[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        outcome = _ACCEPTANCE_RESULTS[name].upper()
        terminalreporter.write_line(f"{name}: {'PASS' if outcome == 'PASSED' else outcome}")


@pytest.fixture(scope="session")
def tiny_config():
    """Small but honest experiment config: real sources and usable models."""
    return ExperimentConfig.default().with_overrides(
        n_pool_images=160,
        n_train_actors=64,
        n_test_actors=32,
        image_learner=LearnerConfig(n_rounds=120, learning_rate=0.1),
        actor_learner=LearnerConfig(n_rounds=120, learning_rate=0.1),
    )


@pytest.fixture(scope="session")
def trained_image_models(tiny_config):
    """One trained (primary, secondary) pair per system, on the tiny pool."""
    covers = _pool_covers(tiny_config)
    cover_feats = extract_many(covers, tiny_config.features)
    pairs = []
    for system in tiny_config.systems:
        pairs.append(_train_image_pair(tiny_config, system, covers, cover_feats))
    specs = [tiny_config.stego_spec_for(k) for k in range(tiny_config.n_systems)]
    return tiny_config, pairs, specs


@pytest.fixture(scope="session")
def micro_config():
    """Fast config for CLI plumbing tests; model quality is irrelevant there."""
    return ExperimentConfig.default(master_seed=902210).with_overrides(
        width=32,
        height=32,
        n_pool_images=24,
        n_train_actors=12,
        n_test_actors=8,
        image_count_range=(10, 14),
        image_learner=LearnerConfig(n_rounds=12, learning_rate=0.1),
        actor_learner=LearnerConfig(n_rounds=12, learning_rate=0.1),
    )


def _key(vec: np.ndarray) -> bytes:
    return np.ascontiguousarray(np.asarray(vec, dtype=np.float64)).tobytes()


class KeyedStub:
    """Test double for a classifier: answers by exact feature-vector content."""

    def __init__(self, mapping=None, default=0):
        self.mapping = dict(mapping or {})
        self.default = default

    def learn(self, vec, answer):
        self.mapping[_key(vec)] = int(answer)

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return self.mapping.get(_key(x), self.default)
        return np.array([self.mapping.get(_key(row), self.default) for row in x])


class ConstantStub:
    """Classifier double that always answers the same bit."""

    def __init__(self, value):
        self.value = int(value)

    def predict(self, x):
        x = np.asarray(x)
        if x.ndim == 1:
            return self.value
        return np.full(x.shape[0], self.value, dtype=np.int64)


@pytest.fixture
def keyed_stub_cls():
    return KeyedStub


@pytest.fixture
def constant_stub_cls():
    return ConstantStub
