import pytest

from causalsynth.io import load_network
from causalsynth.scm import Scm, Variable


def network_path(name: str) -> str:
    from importlib.resources import files
    return str(files("causalsynth.resources.networks") / name)


@pytest.fixture(scope="session")
def asia():
    return load_network(network_path("asia.bif")).scm


@pytest.fixture(scope="session")
def chain3():
    return load_network(network_path("chain3.json")).scm


@pytest.fixture(scope="session")
def diamond4():
    return load_network(network_path("diamond4.json")).scm


@pytest.fixture
def coin_pair():
    """Two independent binary variables."""
    return Scm((
        Variable("X", ("heads", "tails"), (), ((0.5, 0.5),)),
        Variable("Y", ("heads", "tails"), (), ((0.3, 0.7),)),
    ))


@pytest.fixture
def ternary_child():
    """A binary root with a ternary child, enough to exercise rows."""
    return Scm((
        Variable("A", ("yes", "no"), (), ((0.4, 0.6),)),
        Variable("B", ("a", "b", "c"), ("A",),
                 ((0.2, 0.5, 0.3), (0.1, 0.1, 0.8))),
    ))
