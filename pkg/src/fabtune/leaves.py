"""Parameterized leaf components of the fabric tree.

Each barrier leaf is a 1-D task variable ``x = phi(q)`` with a geometry
``xdd + h(x, xd) = 0`` and a gated Finsler energy.  Tuning parameters and
scene quantities (obstacle centers and radii, the goal) enter as runtime
inputs, so one compiled planner serves every parameter set and scene.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import symexpr as sx
from .fabrics import DifferentialMap, Lagrangian, Spec, energize, make_map, pull

#: floor on leaf coordinates inside ``1 / x**beta``
EPS_LEAF = 1e-4
#: steepness of the soft-norm attractor potential
ALPHA_PSI = 10.0


@dataclass(frozen=True)
class ParameterDecl:
    name: str
    lower: float
    upper: float
    kind: str = "float"
    scale: str = "uniform"
    manual: float = 0.0

    def __post_init__(self):
        if not self.name.isidentifier():
            raise ValueError(f"parameter name {self.name!r} is not an identifier")
        if self.kind not in ("float", "int"):
            raise ValueError(f"{self.name}: kind must be 'float' or 'int'")
        if self.scale not in ("uniform", "log"):
            raise ValueError(f"{self.name}: scale must be 'uniform' or 'log'")
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower bound {self.lower} is not below {self.upper}")
        if self.scale == "log" and self.lower <= 0:
            raise ValueError(f"{self.name}: log scale needs a positive lower bound")
        if not self.lower <= self.manual <= self.upper:
            raise ValueError(f"{self.name}: manual value {self.manual} outside bounds")
        if self.kind == "int" and (self.lower != int(self.lower) or self.upper != int(self.upper)):
            raise ValueError(f"{self.name}: integer parameter needs integral bounds")


# Tunable planner parameters, plus the attractor gain.
PARAMETERS: tuple[ParameterDecl, ...] = (
    ParameterDecl("m_base", 0.0, 1.0, "float", "uniform", 0.2),
    ParameterDecl("k_geo_col", 0.01, 1.0, "float", "log", 0.03),
    ParameterDecl("k_geo_limit", 0.01, 1.0, "float", "log", 0.3),
    ParameterDecl("k_geo_self", 0.01, 1.0, "float", "log", 0.03),
    ParameterDecl("k_fin_col", 0.01, 1.0, "float", "log", 0.03),
    ParameterDecl("k_fin_limit", 0.01, 1.0, "float", "log", 0.05),
    ParameterDecl("k_fin_self", 0.01, 1.0, "float", "log", 0.03),
    ParameterDecl("exp_geo_col", 1, 5, "int", "uniform", 3),
    ParameterDecl("exp_geo_limit", 1, 5, "int", "uniform", 2),
    ParameterDecl("exp_geo_self", 1, 5, "int", "uniform", 3),
    ParameterDecl("exp_fin_col", 1, 5, "int", "uniform", 3),
    ParameterDecl("exp_fin_limit", 1, 5, "int", "uniform", 3),
    ParameterDecl("exp_fin_self", 1, 5, "int", "uniform", 3),
    ParameterDecl("alpha_b", 0.0, 1.0, "float", "uniform", 0.5),
    ParameterDecl("b_min", 0.0, 1.0, "float", "uniform", 0.01),
    ParameterDecl("b_max", 5.0, 20.0, "float", "uniform", 6.5),
    ParameterDecl("r_shift", 0.01, 0.1, "float", "uniform", 0.05),
    ParameterDecl("ex_factor", 1.0, 30.0, "float", "uniform", 15.0),
    ParameterDecl("k_attractor", 1.0, 10.0, "float", "uniform", 5.0),
)
PARAMETER_NAMES = tuple(p.name for p in PARAMETERS)


@dataclass(eq=False)
class LeafContext:
    """Symbols shared by all leaves of one planner build."""

    builder: sx.Builder
    q: np.ndarray
    qd: np.ndarray
    params: dict[str, sx.Expression]
    obstacle_centers: np.ndarray | None = None  # flat, 2 per obstacle
    obstacle_radii: np.ndarray | None = None

    @classmethod
    def create(cls, n: int, obstacle_count: int = 0, builder: sx.Builder | None = None,
               parameter_names: Sequence[str] = PARAMETER_NAMES):
        b = builder or sx.Builder()
        q = b.input_group("q", n)
        qd = b.input_group("qd", n)
        theta = b.input_group("theta", len(parameter_names))
        params = dict(zip(parameter_names, theta))
        centers = radii = None
        if obstacle_count:
            centers = b.input_group("obst_pos", 2 * obstacle_count)
            radii = b.input_group("obst_radius", obstacle_count)
        return cls(b, q, qd, params, centers, radii)

    @property
    def obstacle_count(self) -> int:
        return 0 if self.obstacle_radii is None else len(self.obstacle_radii)

    def obstacle(self, index: int):
        if not 0 <= index < self.obstacle_count:
            raise IndexError(f"obstacle index {index} out of range")
        return self.obstacle_centers[2 * index:2 * index + 2], self.obstacle_radii[index]


@dataclass(eq=False)
class LeafSpec:
    name: str
    map: DifferentialMap
    h: np.ndarray
    le: Lagrangian
    param_names: tuple[str, ...]
    scene_inputs: tuple[str, ...] = ()

    @property
    def x(self) -> np.ndarray:
        return self.le.x

    @property
    def xd(self) -> np.ndarray:
        return self.le.xd

    def energized(self, method: str = "expanded") -> Spec:
        return energize(self.h, self.le, method=method)

    def pulled(self, method: str = "expanded") -> Spec:
        return pull(self.map, self.energized(method))


def clamp_below(x, floor: float = EPS_LEAF):
    """``max(x, floor)`` written with ``abs`` so it stays differentiable."""
    return 0.5 * ((x + floor) + sx.abs_(x - floor))


def finsler_gate(xd):
    """1 when approaching (``xd < 0``), 0 when receding, 0.5 at rest."""
    return -0.5 * (sx.sign(xd) - 1.0)


def _barrier_leaf(ctx: LeafContext, name: str, phi, kind: str, scene=()) -> LeafSpec:
    k_geo = ctx.params[f"k_geo_{kind}"]
    exp_geo = ctx.params[f"exp_geo_{kind}"]
    k_fin = ctx.params[f"k_fin_{kind}"]
    exp_fin = ctx.params[f"exp_fin_{kind}"]
    x = ctx.builder.input_group(f"x_{name}", 1)
    xd = ctx.builder.input_group(f"xd_{name}", 1)
    xc = clamp_below(x[0])
    h = sx.to_array([-k_geo / xc ** exp_geo * xd[0] * xd[0]])
    energy = k_fin / xc ** exp_fin * finsler_gate(xd[0]) * xd[0] * xd[0]
    dmap = make_map([phi], ctx.q, ctx.qd)
    names = (f"k_geo_{kind}", f"exp_geo_{kind}", f"k_fin_{kind}", f"exp_fin_{kind}")
    return LeafSpec(name, dmap, h, Lagrangian(energy, x, xd), names, tuple(scene))


def collision_leaf(ctx: LeafContext, link_fk, link_radius: float, obstacle_index: int,
                   name: str | None = None) -> LeafSpec:
    """Sphere-sphere distance leaf between one link and one obstacle."""
    center, radius = ctx.obstacle(obstacle_index)
    diff = [link_fk[0] - center[0], link_fk[1] - center[1]]
    phi = sx.norm(diff) / (radius + float(link_radius)) - 1.0
    name = name or f"col_{obstacle_index}"
    return _barrier_leaf(ctx, name, phi, "col", scene=("obst_pos", "obst_radius"))


def self_collision_leaf(ctx: LeafContext, pair: tuple[int, int], fks: dict, radii: dict,
                        declared_pairs: Sequence[tuple[int, int]]) -> LeafSpec:
    """Distance leaf between the spheres of links ``pair[0]`` and ``pair[1]``."""
    i, j = pair
    declared = {tuple(sorted(p)) for p in declared_pairs}
    if i == j or tuple(sorted(pair)) not in declared:
        raise ValueError(f"self-collision pair {pair} is not declared for this robot")
    a, b = fks[i], fks[j]
    phi = sx.norm([a[0] - b[0], a[1] - b[1]]) / float(radii[i] + radii[j]) - 1.0
    return _barrier_leaf(ctx, f"self_{i}_{j}", phi, "self")


def limit_leaves(ctx: LeafContext, joint_limits: Sequence[tuple[float, float]]) -> list[LeafSpec]:
    """Lower and upper distance-to-limit leaves for every joint."""
    if len(joint_limits) != len(ctx.q):
        raise ValueError(f"{len(joint_limits)} joint limits for {len(ctx.q)} joints")
    leaves = []
    for i, (lo, hi) in enumerate(joint_limits):
        if not lo < hi:
            raise ValueError(f"joint {i}: lower limit {lo} is not below upper limit {hi}")
        leaves.append(_barrier_leaf(ctx, f"limit_{i}_lower", ctx.q[i] - float(lo), "limit"))
        leaves.append(_barrier_leaf(ctx, f"limit_{i}_upper", float(hi) - ctx.q[i], "limit"))
    return leaves


@dataclass(eq=False)
class AttractorLeaf:
    """Goal-reaching potential on ``x = fk_ee(q) - goal``."""

    map: DifferentialMap
    x: np.ndarray
    potential: sx.Expression
    gradient: np.ndarray
    param_names: tuple[str, ...] = ("k_attractor",)
    scene_inputs: tuple[str, ...] = ("goal",)

    def pulled_gradient(self) -> np.ndarray:
        """``J^T dpsi/dx`` expressed over ``q``."""
        mapping = {self.x[i]: self.map.phi[i] for i in range(len(self.x))}
        grad = sx.substitute(self.gradient, mapping)
        return self.map.J.T @ grad


def soft_norm_potential(x, gain, alpha: float = ALPHA_PSI):
    r = sx.norm(x)
    return gain * (r + (1.0 / alpha) * sx.log(1.0 + sx.exp(-2.0 * alpha * r)))


def attractor_leaf(ctx: LeafContext, ee_fk, goal) -> AttractorLeaf:
    x = ctx.builder.input_group("x_goal", len(goal))
    psi = soft_norm_potential(x, ctx.params["k_attractor"])
    grad = sx.to_array([sx.differentiate(psi, xi) for xi in x])
    phi = [ee_fk[i] - goal[i] for i in range(len(goal))]
    return AttractorLeaf(make_map(phi, ctx.q, ctx.qd), x, psi, grad)


def base_inertia_energy(ctx: LeafContext) -> Lagrangian:
    """``0.5 m_base qd^T qd`` over the configuration coordinates."""
    m_base = ctx.params["m_base"]
    energy = None
    for v in ctx.qd:
        term = v * v
        energy = term if energy is None else energy + term
    return Lagrangian(0.5 * m_base * energy, ctx.q, ctx.qd)
