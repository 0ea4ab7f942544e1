import numpy as np
import pytest

from nettomo import build_routing_matrix, four_node_network, partition


# routing matrix of the four-node demonstration network, frozen cell by cell
FOUR_NODE_MATRIX = np.array(
    [
        [1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        [0, 1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 1, 0, 1, 1, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 1, 1, 0, 1, 1, 0],
        [0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1],
    ],
    dtype=np.int64,
)


@pytest.fixture(scope="session")
def net4():
    return four_node_network()


@pytest.fixture(scope="session")
def a4(net4):
    return build_routing_matrix(net4)


@pytest.fixture(scope="session")
def p4(a4):
    return partition(a4)
