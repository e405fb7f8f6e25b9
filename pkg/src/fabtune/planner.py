"""Assemble the tree of fabrics for a robot and evaluate the damped policy.

The symbolic part (leaves energized, pulled into joint space and summed,
plus the pulled attractor gradient) is compiled once per robot and
obstacle count.  The speed-control law runs numerically on top of the
compiled outputs, including the dense solve with the root metric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from . import symexpr as sx
from .fabrics import EPS_EN, Lagrangian, Spec
from .leaves import (PARAMETER_NAMES, AttractorLeaf, LeafContext, LeafSpec, attractor_leaf,
                     base_inertia_energy, collision_leaf, limit_leaves, self_collision_leaf)
from .space import SearchSpace
from .world import DUMMY_DISTANCE, DUMMY_RADIUS, RobotModel, fk_expr


class NonFiniteAccelerationError(ArithmeticError):
    """The policy produced a non-finite acceleration; ``snapshot`` holds the inputs."""

    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


class Scene(NamedTuple):
    obstacle_centers: np.ndarray
    obstacle_radii: np.ndarray
    goal: np.ndarray


@dataclass(eq=False)
class PlannerBlueprint:
    robot: RobotModel
    obstacle_count: int
    ctx: LeafContext
    goal: np.ndarray
    leaves: list[LeafSpec]
    attractor: AttractorLeaf
    base: Lagrangian
    root_spec: Spec
    forcing: np.ndarray
    residual: np.ndarray

    @property
    def leaf_names(self) -> list[str]:
        return [leaf.name for leaf in self.leaves]

    def input_groups(self) -> list:
        groups = [self.ctx.q, self.ctx.qd]
        if self.obstacle_count:
            groups += [self.ctx.obstacle_centers, self.ctx.obstacle_radii]
        return groups + [self.goal, [self.ctx.params[n] for n in PARAMETER_NAMES]]


def assemble(robot: RobotModel, obstacle_count: int) -> PlannerBlueprint:
    """Build every leaf, energize it, pull it to joint space and sum into the root."""
    if obstacle_count < 0:
        raise ValueError("obstacle_count must be non-negative")
    ctx = LeafContext.create(robot.n, obstacle_count)
    goal = ctx.builder.input_group("goal", 2)
    fks = fk_expr(robot, ctx.q)

    leaves: list[LeafSpec] = []
    for link in range(1, robot.n + 1):
        for o in range(obstacle_count):
            leaves.append(collision_leaf(ctx, fks[link - 1], robot.sphere_radii[link - 1], o,
                                         name=f"col_l{link}_o{o}"))
    fk_by_link = {i + 1: fks[i] for i in range(robot.n)}
    radius_by_link = {i + 1: robot.sphere_radii[i] for i in range(robot.n)}
    for pair in robot.self_collision_pairs:
        leaves.append(self_collision_leaf(ctx, pair, fk_by_link, radius_by_link,
                                          robot.self_collision_pairs))
    leaves.extend(limit_leaves(ctx, robot.joint_limits))

    base = base_inertia_energy(ctx)
    root = base.spec
    for leaf in leaves:
        root = root + leaf.pulled()
    attractor = attractor_leaf(ctx, fks[-1], goal)
    return PlannerBlueprint(robot, obstacle_count, ctx, goal, leaves, attractor, base, root,
                            attractor.pulled_gradient(), attractor.map.phi)


def energization_coefficient(a_raw, qd, metric=None, force=None, eps: float = EPS_EN) -> float:
    """Coefficient ``alpha`` making ``qdd = a_raw + alpha qd`` conserve ``H_L``.

    ``metric`` and ``force`` are ``M_L`` and ``f_L`` of the energy evaluated
    at the current state; the defaults give ``L = 0.5 qd^T qd``.
    """
    a_raw = np.asarray(a_raw, dtype=float)
    qd = np.asarray(qd, dtype=float)
    Ma = a_raw if metric is None else np.asarray(metric) @ a_raw
    if force is not None:
        Ma = Ma + np.asarray(force)
    Mqd = qd if metric is None else np.asarray(metric) @ qd
    return -float(qd @ Ma) / (float(qd @ Mqd) + eps)


def switch_goal(distance: float, alpha_b: float, r_shift: float) -> float:
    """``s_beta``: near 1 inside ``r_shift`` of the goal, near 0 far away (for steep ``alpha_b``)."""
    return 0.5 * (math.tanh(-alpha_b * (distance - r_shift)) + 1.0)


def switch_energy(l_ex: float, ex_factor: float) -> float:
    """``s_eta``: blend weight of the unforced energization coefficient."""
    return 0.5 * (math.tanh(-0.5 * l_ex * (1.0 - ex_factor) - 0.5) + 1.0)


def speed_control(M, f, dpsi, residual, qd, p: Mapping[str, float], details: bool = False):
    """``qdd = -h2 - M^-1 dpsi + alpha_ex qd - beta qd`` from evaluated tree terms."""
    qd = np.asarray(qd, dtype=float)
    sol = np.linalg.solve(M, np.column_stack((f, dpsi)))
    h2 = sol[:, 0]
    a_free = -h2
    a_forced = -h2 - sol[:, 1]
    alpha_0 = energization_coefficient(a_free, qd)
    alpha_psi = energization_coefficient(a_forced, qd)
    m_base = p["m_base"]
    alpha_le = energization_coefficient(a_free, qd, metric=m_base * np.eye(len(qd)))
    l_ex = 0.5 * float(qd @ qd)
    s_eta = switch_energy(l_ex, p["ex_factor"])
    alpha_ex = s_eta * alpha_0 + (1.0 - s_eta) * alpha_psi
    dist = math.hypot(*residual)
    s_beta = switch_goal(dist, p["alpha_b"], p["r_shift"])
    beta = s_beta * p["b_max"] + p["b_min"] + max(0.0, alpha_ex - alpha_le)
    qdd = a_forced + (alpha_ex - beta) * qd
    if details:
        return qdd, {"h2": h2, "alpha_0": alpha_0, "alpha_psi": alpha_psi, "alpha_le": alpha_le,
                     "alpha_ex": alpha_ex, "s_eta": s_eta, "s_beta": s_beta, "beta": beta,
                     "l_ex": l_ex, "goal_distance": dist}
    return qdd


class CompiledPlanner:
    """Compiled tree of fabrics for one robot and a fixed number of obstacle slots."""

    def __init__(self, plan: sx.CompiledPlan, robot: RobotModel, obstacle_count: int,
                 leaf_names=(), space: SearchSpace | None = None):
        self.plan = plan
        self.robot = robot
        self.obstacle_count = obstacle_count
        self.leaf_names = list(leaf_names)
        self.parameter_names = PARAMETER_NAMES
        self.space = space or SearchSpace.default()
        if set(self.space.names) != set(PARAMETER_NAMES):
            raise ValueError("search space must declare exactly the planner parameters")
        n = robot.n
        self._slices = {"M": slice(0, n * n), "f": slice(n * n, n * n + n),
                        "dpsi": slice(n * n + n, n * n + 2 * n),
                        "residual": slice(n * n + 2 * n, n * n + 2 * n + 2)}

    @classmethod
    def build(cls, robot: RobotModel, obstacle_count: int, space: SearchSpace | None = None):
        bp = assemble(robot, obstacle_count)
        outputs = {"M": bp.root_spec.M, "f": bp.root_spec.f, "dpsi": bp.forcing,
                   "residual": bp.residual}
        plan = sx.compile_plan(outputs, bp.input_groups())
        return cls(plan, robot, obstacle_count, bp.leaf_names, space)

    def metadata(self) -> dict:
        return {
            "robot": self.robot.to_dict(),
            "obstacle_count": self.obstacle_count,
            "parameter_order": list(self.parameter_names),
            "input_layout": [[name, dim] for name, dim in self.plan.input_layout],
            "output_layout": [[name, list(shape)] for name, shape in self.plan.output_layout],
            "leaves": list(self.leaf_names),
            "tape_length": len(self.plan),
        }

    # input packing ---------------------------------------------------------
    def pack_scene(self, scene) -> list[float]:
        centers = np.asarray(scene.obstacle_centers, dtype=float).reshape(-1, 2)
        radii = np.asarray(scene.obstacle_radii, dtype=float).reshape(-1)
        if len(radii) > self.obstacle_count:
            raise ValueError(f"scene has {len(radii)} obstacles, planner supports {self.obstacle_count}")
        flat_c = centers.reshape(-1).tolist()
        flat_r = radii.tolist()
        for k in range(len(radii), self.obstacle_count):
            # parked far away, spread out so no two dummies coincide
            flat_c += [DUMMY_DISTANCE * (1.0 + k), DUMMY_DISTANCE]
            flat_r.append(DUMMY_RADIUS)
        goal = np.asarray(scene.goal, dtype=float).reshape(-1).tolist()
        if len(goal) != 2:
            raise ValueError("goal must be a 2-D point")
        return (flat_c + flat_r if self.obstacle_count else []) + goal

    def pack_params(self, theta: Mapping[str, float]) -> tuple[list[float], dict[str, float]]:
        clean = self.space.validate(theta)
        return [float(clean[n]) for n in self.parameter_names], {k: float(v) for k, v in clean.items()}

    def _evaluate(self, q, qd, static: list[float]) -> list[float]:
        return self.plan.run(np.asarray(q, dtype=float).tolist()
                             + np.asarray(qd, dtype=float).tolist() + static)

    def _split(self, out: list[float]):
        n = self.robot.n
        s = self._slices
        return (np.array(out[s["M"]]).reshape(n, n), np.array(out[s["f"]]),
                np.array(out[s["dpsi"]]), out[s["residual"]])

    # evaluation ------------------------------------------------------------
    def terms(self, q, qd, scene, theta) -> dict[str, np.ndarray]:
        """Root metric ``M``, summed pulled forces ``f``, pulled goal gradient and goal residual."""
        values, _ = self.pack_params(theta)
        M, f, dpsi, residual = self._split(self._evaluate(q, qd, self.pack_scene(scene) + values))
        return {"M": M, "f": f, "dpsi": dpsi, "residual": np.array(residual)}

    def policy(self, scene, theta):
        """Return ``accel(q, qd)`` with the scene and parameters bound (validated once)."""
        values, clean = self.pack_params(theta)
        static = self.pack_scene(scene) + values

        def accel(q, qd):
            out = self._evaluate(q, qd, static)
            M, f, dpsi, residual = self._split(out)
            qdd = speed_control(M, f, dpsi, residual, qd, clean)
            if not np.all(np.isfinite(qdd)):
                raise NonFiniteAccelerationError(
                    "policy produced a non-finite acceleration",
                    {"q": np.array(q, dtype=float).tolist(), "qd": np.array(qd, dtype=float).tolist(),
                     "scene": static[:len(static) - len(values)], "theta": clean})
            return qdd

        return accel

    def compute_acceleration(self, q, qd, scene, theta) -> np.ndarray:
        return self.policy(scene, theta)(q, qd)


def build_planner(robot: RobotModel, obstacle_count: int, space: SearchSpace | None = None) -> CompiledPlanner:
    return CompiledPlanner.build(robot, obstacle_count, space)
