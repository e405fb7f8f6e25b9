"""Planar serial robots, scenarios, kinematic rollouts and trajectory metrics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import symexpr as sx

#: distance at which unused obstacle slots of a planner are parked
DUMMY_DISTANCE = 1e3
DUMMY_RADIUS = 0.1
#: end-effector distance at which a trial counts as having reached the goal
REACHED_TOLERANCE = 0.05


class DegenerateScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class RobotModel:
    """A planar serial chain with revolute joints, based at the origin.

    Link ``i`` (1-based) carries a collision sphere centered at its distal
    joint; link ``n``'s sphere sits on the end effector.
    """

    name: str
    link_lengths: tuple[float, ...]
    joint_limits: tuple[tuple[float, float], ...]
    sphere_radii: tuple[float, ...]
    self_collision_pairs: tuple[tuple[int, int], ...] = ()
    velocity_limit: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "link_lengths", tuple(float(v) for v in self.link_lengths))
        object.__setattr__(self, "joint_limits",
                           tuple((float(lo), float(hi)) for lo, hi in self.joint_limits))
        object.__setattr__(self, "sphere_radii", tuple(float(r) for r in self.sphere_radii))
        object.__setattr__(self, "self_collision_pairs",
                           tuple((int(i), int(j)) for i, j in self.self_collision_pairs))
        n = len(self.link_lengths)
        if n < 1:
            raise ValueError("a robot needs at least one link")
        if len(self.joint_limits) != n or len(self.sphere_radii) != n:
            raise ValueError("link_lengths, joint_limits and sphere_radii must have equal length")
        if any(length <= 0 for length in self.link_lengths):
            raise ValueError("link lengths must be positive")
        for lo, hi in self.joint_limits:
            if not lo < hi:
                raise ValueError(f"joint limit ({lo}, {hi}) is not ordered")
        if any(r <= 0 for r in self.sphere_radii):
            raise ValueError("sphere radii must be positive")
        for i, j in self.self_collision_pairs:
            if not (1 <= i <= n and 1 <= j <= n) or abs(i - j) < 2:
                raise ValueError(f"self-collision pair ({i}, {j}) needs links 1..{n} at least 2 apart")
        if self.velocity_limit <= 0:
            raise ValueError("velocity limit must be positive")

    @property
    def n(self) -> int:
        return len(self.link_lengths)

    @property
    def reach(self) -> float:
        return sum(self.link_lengths)

    def within_limits(self, q) -> bool:
        return all(lo <= v <= hi for v, (lo, hi) in zip(q, self.joint_limits))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "link_lengths": list(self.link_lengths),
            "joint_limits": [list(p) for p in self.joint_limits],
            "sphere_radii": list(self.sphere_radii),
            "self_collision_pairs": [list(p) for p in self.self_collision_pairs],
            "velocity_limit": self.velocity_limit,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RobotModel":
        return cls(
            name=data["name"],
            link_lengths=data["link_lengths"],
            joint_limits=data["joint_limits"],
            sphere_radii=data["sphere_radii"],
            self_collision_pairs=data.get("self_collision_pairs", ()),
            velocity_limit=data.get("velocity_limit", 2.0),
        )


def fk(robot: RobotModel, q, link_index: int | None = None) -> np.ndarray:
    """Position of the distal joint of link ``link_index`` (1-based, default end effector)."""
    link_index = robot.n if link_index is None else link_index
    if not 1 <= link_index <= robot.n:
        raise IndexError(f"link index {link_index} outside 1..{robot.n}")
    x = y = angle = 0.0
    for i in range(link_index):
        angle += float(q[i])
        x += robot.link_lengths[i] * math.cos(angle)
        y += robot.link_lengths[i] * math.sin(angle)
    return np.array([x, y])


def fk_all(robot: RobotModel, q) -> np.ndarray:
    """Distal joint positions of every link, shape ``(n, 2)``."""
    out = np.empty((robot.n, 2))
    x = y = angle = 0.0
    for i in range(robot.n):
        angle += float(q[i])
        x += robot.link_lengths[i] * math.cos(angle)
        y += robot.link_lengths[i] * math.sin(angle)
        out[i] = x, y
    return out


def fk_expr(robot: RobotModel, q) -> list[np.ndarray]:
    """Symbolic distal joint positions for links 1..n over the input group ``q``."""
    out = []
    x = y = angle = None
    for i in range(robot.n):
        angle = q[i] if angle is None else angle + q[i]
        dx = robot.link_lengths[i] * sx.cos(angle)
        dy = robot.link_lengths[i] * sx.sin(angle)
        x = dx if x is None else x + dx
        y = dy if y is None else y + dy
        out.append(sx.to_array([x, y]))
    return out


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")


@dataclass(frozen=True)
class Scenario:
    robot: str
    q0: tuple[float, ...]
    goal: tuple[float, float]
    obstacles: tuple[Obstacle, ...] = ()
    T: int = 1000
    dt: float = 0.01
    seed: int = 0
    qd0: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "q0", tuple(float(v) for v in self.q0))
        object.__setattr__(self, "goal", tuple(float(v) for v in self.goal))
        object.__setattr__(self, "obstacles", tuple(
            o if isinstance(o, Obstacle) else Obstacle(o["center"], o["radius"]) if isinstance(o, dict)
            else Obstacle(*o) for o in self.obstacles))
        qd0 = (0.0,) * len(self.q0) if self.qd0 is None else tuple(float(v) for v in self.qd0)
        object.__setattr__(self, "qd0", qd0)
        if len(self.qd0) != len(self.q0):
            raise ValueError("q0 and qd0 differ in length")
        if not 0 < self.dt <= 0.05:
            raise ValueError(f"dt must lie in (0, 0.05], got {self.dt}")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        for o in self.obstacles:
            if math.dist(o.center, self.goal) <= o.radius:
                raise ValueError(f"obstacle at {o.center} contains the goal")

    @property
    def obstacle_centers(self) -> np.ndarray:
        return np.array([o.center for o in self.obstacles], dtype=float).reshape(-1, 2)

    @property
    def obstacle_radii(self) -> np.ndarray:
        return np.array([o.radius for o in self.obstacles], dtype=float)

    def check_robot(self, robot: RobotModel):
        if robot.n != len(self.q0):
            raise ValueError(f"scenario has {len(self.q0)} joints, robot {robot.name!r} has {robot.n}")
        if not robot.within_limits(self.q0):
            raise ValueError("q0 violates the joint limits")

    def to_dict(self) -> dict:
        return {
            "robot": self.robot,
            "q0": list(self.q0),
            "qd0": list(self.qd0),
            "obstacles": [{"center": list(o.center), "radius": o.radius} for o in self.obstacles],
            "goal": list(self.goal),
            "T": self.T,
            "dt": self.dt,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return cls(
            robot=data["robot"],
            q0=data["q0"],
            qd0=data.get("qd0"),
            goal=data["goal"],
            obstacles=tuple(Obstacle(o["center"], o["radius"]) for o in data.get("obstacles", ())),
            T=int(data.get("T", 1000)),
            dt=float(data.get("dt", 0.01)),
            seed=int(data.get("seed", 0)),
        )

    def translated(self, offset) -> "Scenario":
        """Scene shifted by ``offset`` (the robot base stays put)."""
        ox, oy = offset
        return Scenario(self.robot, self.q0, (self.goal[0] + ox, self.goal[1] + oy),
                        tuple(Obstacle((o.center[0] + ox, o.center[1] + oy), o.radius)
                              for o in self.obstacles),
                        self.T, self.dt, self.seed, self.qd0)


def sphere_gaps(robot: RobotModel, centers: np.ndarray, obstacles_xy: np.ndarray,
                obstacle_radii: np.ndarray) -> float:
    """Smallest surface gap over link/obstacle and declared self-collision sphere pairs."""
    gap = math.inf
    radii = robot.sphere_radii
    if len(obstacle_radii):
        d = np.linalg.norm(centers[:, None, :] - obstacles_xy[None, :, :], axis=2)
        gap = float(np.min(d - (np.asarray(radii)[:, None] + obstacle_radii[None, :])))
    for i, j in robot.self_collision_pairs:
        d = math.dist(centers[i - 1], centers[j - 1]) - (radii[i - 1] + radii[j - 1])
        gap = min(gap, d)
    return gap


@dataclass
class TrajectoryLog:
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    ee: np.ndarray
    min_dist: np.ndarray
    min_gap: np.ndarray
    termination: str = "completed"
    termination_step: int | None = None
    error: str | None = None

    def __len__(self):
        return len(self.q)

    def __eq__(self, other):
        if not isinstance(other, TrajectoryLog):
            return NotImplemented
        arrays = ("q", "qd", "qdd", "ee", "min_dist", "min_gap")
        return (self.termination == other.termination
                and self.termination_step == other.termination_step
                and all(np.array_equal(getattr(self, a), getattr(other, a), equal_nan=True)
                        for a in arrays))

    def to_csv(self, path):
        n = self.q.shape[1]
        header = (["step"] + [f"q{i}" for i in range(n)] + [f"qd{i}" for i in range(n)]
                  + ["ee_x", "ee_y", "min_dist"])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(len(self)):
                writer.writerow([t] + [repr(float(v)) for v in self.q[t]]
                                + [repr(float(v)) for v in self.qd[t]]
                                + [repr(float(self.ee[t, 0])), repr(float(self.ee[t, 1])),
                                   repr(float(self.min_dist[t]))])


def rollout(planner, scenario: Scenario, theta, robot: RobotModel | None = None) -> TrajectoryLog:
    """Integrate the planner's acceleration policy with semi-implicit Euler.

    Stops early on sphere penetration or when the planner fails to produce a
    finite acceleration; both are recorded as terminations, not raised.
    """
    robot = robot or planner.robot
    scenario.check_robot(robot)
    if len(scenario.obstacles) > planner.obstacle_count:
        raise ValueError(f"scenario has {len(scenario.obstacles)} obstacles, "
                         f"planner supports {planner.obstacle_count}")
    accel = planner.policy(scenario, theta)
    obst_xy = scenario.obstacle_centers
    obst_r = scenario.obstacle_radii
    vmax = robot.velocity_limit
    dt = scenario.dt
    q = np.array(scenario.q0, dtype=float)
    qd = np.array(scenario.qd0, dtype=float)
    qs, qds, qdds, ees, dists, gaps = [], [], [], [], [], []
    termination, term_step, error = "completed", None, None
    for step in range(scenario.T + 1):
        centers = fk_all(robot, q)
        ee = centers[-1]
        gap = sphere_gaps(robot, centers, obst_xy, obst_r)
        dist = float(np.min(np.linalg.norm(obst_xy - ee, axis=1))) if len(obst_r) else math.inf
        qs.append(q.copy())
        qds.append(qd.copy())
        ees.append(ee)
        dists.append(dist)
        gaps.append(gap)
        if gap <= 0.0:
            qdds.append(np.full(robot.n, np.nan))
            termination, term_step = "collided", step
            break
        try:
            qdd = accel(q, qd)
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            qdds.append(np.full(robot.n, np.nan))
            termination, term_step, error = "nonfinite", step, str(exc)
            break
        qdds.append(qdd)
        if step == scenario.T:
            break
        qd = np.clip(qd + dt * qdd, -vmax, vmax)
        q = q + dt * qd
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            termination, term_step, error = "nonfinite", step + 1, "state became non-finite"
            break
    return TrajectoryLog(np.array(qs), np.array(qds), np.array(qdds), np.array(ees),
                         np.array(dists), np.array(gaps), termination, term_step, error)


@dataclass(frozen=True)
class Weights:
    distance: float = 0.7
    path: float = 0.1
    clearance: float = 0.2

    def to_dict(self) -> dict:
        return {"distance": self.distance, "path": self.path, "clearance": self.clearance}


@dataclass(frozen=True)
class Metrics:
    cost_distance: float
    cost_path: float
    cost_clearance: float
    reached: bool

    def to_dict(self) -> dict:
        return {"cost_distance": self.cost_distance, "cost_path": self.cost_path,
                "cost_clearance": self.cost_clearance, "reached": self.reached}

    @classmethod
    def from_dict(cls, data: dict) -> "Metrics":
        return cls(float(data["cost_distance"]), float(data["cost_path"]),
                   float(data["cost_clearance"]), bool(data["reached"]))


def compute_metrics(log: TrajectoryLog, scenario: Scenario) -> Metrics:
    """Normalized distance, path length and average clearance of the end effector.

    A log that stopped at step ``t* < T`` is padded by repeating each
    summand's terminal value for the remaining steps.
    """
    if len(log) == 0:
        raise ValueError("empty trajectory log")
    T = scenario.T
    x = np.asarray(log.ee, dtype=float)
    last = len(x) - 1
    goal = np.asarray(scenario.goal, dtype=float)
    to_goal = np.linalg.norm(x - goal, axis=1)
    start = float(to_goal[0])
    if start == 0.0:
        raise DegenerateScenarioError("the end effector starts at the goal")
    pad = T - last

    distance = float(np.sum(to_goal)) + pad * float(to_goal[-1])

    steps = np.linalg.norm(np.diff(x, axis=0), axis=1)
    path = float(np.sum(steps)) + (pad * float(steps[-1]) if len(steps) else 0.0)

    obst = scenario.obstacle_centers
    if len(obst):
        clear = np.min(np.linalg.norm(x[:, None, :] - obst[None, :, :], axis=2), axis=1)
        clearance = (float(np.sum(clear[1:])) + pad * float(clear[-1])) / T
    else:
        clearance = 0.0

    return Metrics(distance / start, path / start, clearance,
                   bool(to_goal[-1] <= REACHED_TOLERANCE))


def objective(metrics: Metrics, weights: Weights = Weights()) -> float:
    return (weights.distance * metrics.cost_distance
            + weights.path * metrics.cost_path
            + weights.clearance * metrics.cost_clearance)


# randomized test scenarios --------------------------------------------------------

def start_is_clear(robot: RobotModel, scenario: Scenario) -> bool:
    centers = fk_all(robot, scenario.q0)
    return sphere_gaps(robot, centers, scenario.obstacle_centers, scenario.obstacle_radii) > 0


def perturb_scenario(base: Scenario, robot: RobotModel, rng: np.random.Generator,
                     obstacle_jitter: float = 0.1, goal_jitter: float = 0.1,
                     max_tries: int = 1000) -> Scenario:
    """Jitter obstacle centers and the goal uniformly, rejecting infeasible draws.

    A draw is kept when the goal lies inside 95% of the robot's reach and
    outside every obstacle, and the start configuration is collision free.
    """
    for _ in range(max_tries):
        goal = np.asarray(base.goal) + rng.uniform(-goal_jitter, goal_jitter, size=2)
        obstacles = tuple(
            Obstacle(tuple(np.asarray(o.center) + rng.uniform(-obstacle_jitter, obstacle_jitter, size=2)),
                     o.radius)
            for o in base.obstacles)
        if np.linalg.norm(goal) > 0.95 * robot.reach:
            continue
        if any(math.dist(o.center, goal) <= o.radius + 0.01 for o in obstacles):
            continue
        candidate = Scenario(base.robot, base.q0, tuple(goal), obstacles, base.T, base.dt,
                             base.seed, base.qd0)
        if not start_is_clear(robot, candidate):
            continue
        if np.linalg.norm(fk(robot, candidate.q0) - goal) == 0.0:
            continue
        return candidate
    raise RuntimeError("could not draw a feasible perturbed scenario")


def test_scenarios(base: Scenario, robot: RobotModel, count: int, seed: int,
                   obstacle_jitter: float = 0.1, goal_jitter: float = 0.1) -> list[Scenario]:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7E57]))
    return [perturb_scenario(base, robot, rng, obstacle_jitter, goal_jitter) for _ in range(count)]


test_scenarios.__test__ = False  # not a pytest test
