import numpy as np
import pytest

from genattack.embedding import EmbeddingSpace
from genattack.language_model import train_from_sentences
from genattack.victim import Victim


class FunctionVictim(Victim):
    """Victim defined by a Python function of the token tuple."""

    def __init__(self, fn, num_classes=2, task="sentiment"):
        super().__init__()
        self.fn = fn
        self.num_classes = num_classes
        self.task = task

    def _predict(self, items):
        return np.array([self.fn(item) for item in items], dtype=float)


def constant_victim(label, num_classes=2, task="sentiment"):
    probs = np.full(num_classes, 0.1 / (num_classes - 1))
    probs[label] = 0.9
    return FunctionVictim(lambda _: probs, num_classes, task)


def stump_victim(word="great", target=1):
    """Predicts ``target`` with 0.9 iff ``word`` occurs."""

    def fn(tokens):
        p = 0.9 if word in tokens else 0.1
        return [1 - p, p] if target == 1 else [p, 1 - p]

    return FunctionVictim(fn)


@pytest.fixture
def toy_space():
    return EmbeddingSpace(["a", "b", "c", "d"], [[0, 0], [0.3, 0], [1, 0], [0, 2]])


@pytest.fixture
def movie_space():
    """good ~ great ~ fine; movie and plot far from everything."""
    return EmbeddingSpace(
        ["good", "great", "fine", "movie", "plot", "the"],
        [[0, 0, 0], [0.2, 0, 0], [0, 0.3, 0], [5, 5, 0], [-5, 5, 0], [0, -5, 5]],
    )


@pytest.fixture
def movie_lm():
    lines = ["the good movie", "a great plot", "a fine movie", "the movie was good"]
    return train_from_sentences([s.split() for s in lines], 3)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
