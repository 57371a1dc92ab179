import numpy as np
import pytest

from phaseprune.data import split, synth_dataset
from phaseprune.network import TrainConfig, evaluate, init_network, train
from phaseprune.pruning import ItConfig, OsConfig, champ

ACCEPTANCE_LINES = []


def record(number, title, passed, detail=""):
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_data():
    data = synth_dataset(10, 60, 8, seed=3, noise=0.3)
    return split(data, 0.25, seed=1)


@pytest.fixture(scope="session")
def toy_trained(toy_data):
    train_data, test_data = toy_data
    net = init_network((8, 16, 10), 10, seed=0)
    net, history = train(net, train_data, TrainConfig(learning_rate=0.05, epochs=30, batch_size=16, seed=0))
    return net, evaluate(net, test_data)


@pytest.fixture(scope="session")
def toy_champ(toy_data, toy_trained):
    train_data, test_data = toy_data
    net, base = toy_trained
    ft = TrainConfig(learning_rate=0.05, epochs=5, batch_size=16, seed=1)
    floor = base - 0.05
    return champ(
        net,
        OsConfig((1.0, 1.5, 2.0), floor, ft),
        ItConfig(0.25, floor, ft, max_iters=40),
        train_data,
        test_data,
    )
