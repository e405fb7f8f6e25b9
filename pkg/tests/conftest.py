import math

import numpy as np
import pytest

from fabtune.config import data_path, load_robot, load_scenario
from fabtune.planner import build_planner
from fabtune.world import RobotModel, Scenario


@pytest.fixture(scope="session")
def robot3() -> RobotModel:
    return load_robot(data_path("robot_3link.json"))


@pytest.fixture(scope="session")
def robot2() -> RobotModel:
    return load_robot(data_path("robot_2link.json"))


@pytest.fixture(scope="session")
def ring(robot3) -> Scenario:
    return load_scenario(data_path("scenario_ring.json"), robot3)


@pytest.fixture(scope="session")
def ring2(robot2) -> Scenario:
    return load_scenario(data_path("scenario_ring_2link.json"), robot2)


@pytest.fixture(scope="session")
def empty3(robot3) -> Scenario:
    return load_scenario(data_path("scenario_empty.json"), robot3)


@pytest.fixture(scope="session")
def planner3(robot3):
    return build_planner(robot3, 5)


@pytest.fixture(scope="session")
def planner2(robot2):
    return build_planner(robot2, 5)


@pytest.fixture(scope="session")
def planner3_free(robot3):
    return build_planner(robot3, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class ZeroPlanner:
    """Stub policy that never accelerates."""

    obstacle_count = 8

    def __init__(self, robot):
        self.robot = robot

    def policy(self, scenario, theta):
        n = self.robot.n
        return lambda q, qd: np.zeros(n)


@pytest.fixture
def zero_planner_factory():
    return ZeroPlanner


@pytest.fixture
def unit_arm():
    """Factory for planar arms with unit links and loose limits."""

    def make(n: int = 2) -> RobotModel:
        return RobotModel("unit", (1.0,) * n, ((-math.pi, math.pi),) * n, (0.05,) * n, (), 100.0)

    return make
