import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mcps_forge.data import CATEGORICAL, CONTINUOUS, ColumnSpec, Dataset, Table  # noqa: E402
from mcps_forge.synthetic import make_blobs  # noqa: E402


def make_table(X, y=None, n_classes=2, categorical=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    cat = tuple(categorical) if categorical is not None else (False,) * X.shape[1]
    return Table(X=X, categorical=cat, n_classes=n_classes, y=None if y is None else np.asarray(y, dtype=int))


def balanced(n=100, n_classes=2, d=3, seed=0, name="balanced"):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % n_classes
    X = rng.normal(size=(n, d)) + labels[:, None] * 3.0
    cols = tuple(ColumnSpec(f"x{j}", CONTINUOUS) for j in range(d))
    return Dataset(name, cols, X, labels, tuple(f"c{k}" for k in range(n_classes)))


def sixty_forty(n=100, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.array([0] * (6 * n // 10) + [1] * (n - 6 * n // 10))
    X = rng.normal(size=(n, 2))
    cols = (ColumnSpec("a", CONTINUOUS), ColumnSpec("b", CONTINUOUS))
    return Dataset("sixty-forty", cols, X, labels, ("maj", "min"))


@pytest.fixture
def blobs():
    return make_blobs(n_rows=90, n_features=3, n_classes=3, seed=1)


@pytest.fixture
def blobs_missing():
    return make_blobs(n_rows=90, n_features=3, n_classes=2, missing_fraction=0.1, seed=2)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one pass/fail line for an acceptance criterion.

    Call it with the criterion number, the outcome and a short detail; the
    line is printed immediately and repeated in the terminal summary.
    """
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


__all__ = ["CATEGORICAL", "CONTINUOUS", "balanced", "make_table", "sixty_forty"]
