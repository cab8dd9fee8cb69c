import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shapcredit import bundled_network_path, load_network


@pytest.fixture(scope="session")
def fig4():
    return load_network(bundled_network_path("fig4"))


@pytest.fixture(scope="session")
def fig5():
    return load_network(bundled_network_path("fig5"))


@pytest.fixture(scope="session")
def smoking_point(fig4):
    from shapcredit import parse_assignment

    return parse_assignment(fig4, "Smoker=1,Cancer=1,XRay=1,Dyspnoea=0")


FEATURES = ["Smoker", "Cancer", "XRay"]
TARGET_Y = "Dyspnoea"


@pytest.fixture(scope="session")
def features():
    return list(FEATURES)
