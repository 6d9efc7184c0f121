from pathlib import Path

import numpy as np
import pytest

from bninfer.bif import load_network
from bninfer.network import Network

REPO_ROOT = Path(__file__).resolve().parent.parent
NETWORKS = REPO_ROOT / "networks"


@pytest.fixture(scope="session")
def networks_dir():
    return NETWORKS


@pytest.fixture(scope="session")
def asia_net():
    return load_network(NETWORKS / "asia.bif")


@pytest.fixture(scope="session")
def survey_net():
    return load_network(NETWORKS / "survey.bif")


@pytest.fixture(scope="session")
def alarm_net():
    return load_network(NETWORKS / "alarm.bif")


@pytest.fixture(scope="session")
def insurance_net():
    return load_network(NETWORKS / "insurance.bif")


def single_node_net(probs=(0.7, 0.3), name="single"):
    labels = tuple(f"v{i}" for i in range(len(probs)))
    return Network.build(name, [("x", labels)], [()], [np.array([probs])])


def chain_net(p_a=0.5, copy=True):
    """A -> B, both binary. With copy=True, B deterministically equals A."""
    cpt_b = np.array([[1.0, 0.0], [0.0, 1.0]]) if copy else np.array([[0.8, 0.2], [0.3, 0.7]])
    return Network.build(
        "chain",
        [("a", ("0", "1")), ("b", ("0", "1"))],
        [(), (0,)],
        [np.array([[p_a, 1.0 - p_a]]), cpt_b],
    )


@pytest.fixture
def single_node():
    return single_node_net()


@pytest.fixture
def chain_copy():
    return chain_net()
