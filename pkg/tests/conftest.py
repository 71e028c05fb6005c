import importlib.resources as ir

import numpy as np
import pytest

from geort.kinematics import CapsuleSet, load_capsules, load_chain

FIXTURES = ir.files("geort") / "fixtures"


@pytest.fixture(scope="session")
def robot_chain():
    return load_chain(FIXTURES / "robot_hand_a.urdf")


@pytest.fixture(scope="session")
def proxy_chain():
    return load_chain(FIXTURES / "proxy_hand_a.urdf")


@pytest.fixture(scope="session")
def robot_capsules(robot_chain) -> CapsuleSet:
    return load_capsules(FIXTURES / "robot_hand_a.capsules.json", robot_chain)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
