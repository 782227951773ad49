import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tensormemory import EpisodicModel, ModelConfig, SemanticModel, loss_and_gradients


def populate(model, n_entities, n_predicates, n_times=0):
    for i in range(n_entities):
        model.entities.register(f"e{i}")
    for i in range(n_predicates):
        model.predicates.register(f"p{i}")
    for i in range(n_times):
        model.times.register(f"t{i}")
    return model


def fd_errors(model, facts, labels, l2, h=1e-5, rtol=1e-4):
    """Per parameter class: (passes at rtol with atol 0, worst relative error)."""
    _, grads = loss_and_gradients(model, facts, labels, l2)

    def central(arr, idx):
        old = arr[idx]
        arr[idx] = old + h
        up = loss_and_gradients(model, facts, labels, l2)[0]
        arr[idx] = old - h
        down = loss_and_gradients(model, facts, labels, l2)[0]
        arr[idx] = old
        return (up - down) / (2 * h)

    def verdict(fd, g):
        return bool(np.allclose(fd, g, rtol=rtol, atol=0)), float(np.max(np.abs(fd - g) / np.abs(fd)))

    core = model.core.values
    fd = np.array([central(core, idx) for idx in np.ndindex(core.shape)]).reshape(core.shape)
    out = {"core": verdict(fd, grads.core)}
    for kind, (ids, g) in grads.rows.items():
        mat = model.table({"entity": "subject", "predicate": "predicate", "time": "time"}[kind]).matrix
        fd = np.array([[central(mat, (i, r)) for r in range(model.rank)] for i in ids])
        out[kind] = verdict(fd, g)
    return out


def fd_check(model, facts, labels, l2, h=1e-5, rtol=1e-4):
    errors = fd_errors(model, facts, labels, l2, h, rtol)
    for kind, (ok, worst) in errors.items():
        assert ok, (kind, worst)
    return errors


def fd_model(cls, seed, *counts):
    # O(1) parameters give O(1) loss and well-scaled gradients in every class,
    # so roundoff in the central difference stays far below the tolerance
    m = populate(cls(ModelConfig(rank=3, seed=seed, core_scale=0.5)), *counts)
    rng = np.random.default_rng(seed)
    for slot in m.slots:
        table = m.table(slot)
        table.set_matrix(rng.normal(scale=0.7, size=table.matrix.shape))
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def semantic_model():
    return populate(SemanticModel(ModelConfig(rank=3, seed=7)), 5, 3)


@pytest.fixture
def episodic_model():
    return populate(EpisodicModel(ModelConfig(rank=3, seed=7)), 5, 3, 4)


@pytest.fixture
def nonneg_episodic():
    return populate(EpisodicModel(ModelConfig(rank=3, seed=11, nonnegative=True)), 4, 3, 5)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda x: int(x.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
