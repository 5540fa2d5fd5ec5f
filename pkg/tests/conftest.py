import numpy as np
import pytest

from cefr_fcm import FcmConfig, SplitSpec, TABLE2_CENTROIDS, fit, order_clusters, stratified_split, synthesize

CORPUS_SEED = 42


@pytest.fixture(scope="session")
def corpus():
    """Reference-centroid generator, 2000 rows per level, sd 0.6."""
    return synthesize(TABLE2_CENTROIDS, per_cluster_n=2000, noise_sd=0.6, seed=CORPUS_SEED)


@pytest.fixture(scope="session")
def split(corpus):
    return stratified_split(corpus.data, SplitSpec(train_fraction=0.8, seed=CORPUS_SEED, strata_bins=5))


@pytest.fixture(scope="session")
def recovered(split):
    """Ordered model fitted on the training split with the default configuration."""
    train, _ = split
    return order_clusters(fit(train, FcmConfig(seed=CORPUS_SEED)))


@pytest.fixture(scope="session")
def small_corpus():
    return synthesize(TABLE2_CENTROIDS, per_cluster_n=150, noise_sd=0.6, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(name: str, passed: bool | None, detail: str) -> None:
    """Log one acceptance line; ``passed=None`` marks an informational entry."""
    status = "INFO" if passed is None else ("PASS" if passed else "FAIL")
    ACCEPTANCE_LINES.append(f"{status:4}  {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
