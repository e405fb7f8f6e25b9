"""Spec algebra: differential maps, pullback, summation, Euler-Lagrange, energization.

A spec is the pair ``(M, f)`` of the second-order system ``M xdd + f = 0``
written over a pair of input groups ``(x, xd)``.  All operations here are
symbolic and return new specs; nothing is evaluated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import symexpr as sx

#: regularizer of the energization projector denominator
EPS_EN = 1e-9


def _symmetric(rows: int, entry) -> np.ndarray:
    """Build an ``rows x rows`` matrix from its upper triangle, sharing mirrored nodes."""
    out = sx.zeros((rows, rows))
    for i in range(rows):
        for j in range(i, rows):
            out[i, j] = entry(i, j)
            out[j, i] = out[i, j]
    return out


def _dot(a, b):
    total = None
    for x, y in zip(a, b):
        term = x * y
        total = term if total is None else total + term
    return sx.ZERO if total is None else total


@dataclass(frozen=True, eq=False)
class Spec:
    """``M xdd + f = 0`` over the coordinate groups ``x`` and ``xd``."""

    M: np.ndarray
    f: np.ndarray
    x: np.ndarray
    xd: np.ndarray

    def __post_init__(self):
        m = len(self.x)
        if len(self.xd) != m:
            raise sx.SymbolError("position and velocity groups differ in length")
        if self.M.shape != (m, m) or self.f.shape != (m,):
            raise sx.SymbolError(
                f"spec over {m} coordinates got M{self.M.shape} and f{self.f.shape}")

    @property
    def dim(self) -> int:
        return len(self.x)

    def __add__(self, other: "Spec") -> "Spec":
        return add_specs(self, other)


def zero_spec(x, xd) -> Spec:
    m = len(x)
    return Spec(sx.zeros((m, m)), sx.zeros(m), x, xd)


@dataclass(eq=False)
class DifferentialMap:
    """``x = phi(q)`` with its Jacobian and the time derivative terms."""

    phi: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    J: np.ndarray
    _Jdot: np.ndarray | None = field(default=None, repr=False)
    _Jdot_qd: np.ndarray | None = field(default=None, repr=False)

    @property
    def xdot(self) -> np.ndarray:
        """``J qd``."""
        return self.J @ self.qd

    @property
    def Jdot(self) -> np.ndarray:
        """``Jdot[i, j] = sum_k dJ[i, j]/dq_k qd_k``."""
        if self._Jdot is None:
            m, n = self.J.shape
            out = sx.zeros((m, n))
            for k in range(n):
                cache: dict = {}
                for i in range(m):
                    for j in range(n):
                        out[i, j] = out[i, j] + sx.differentiate(self.J[i, j], self.q[k], cache) * self.qd[k]
            self._Jdot = out
        return self._Jdot

    @property
    def Jdot_qd(self) -> np.ndarray:
        """``Jdot qd``, built as the directional derivative of ``J qd`` along ``qd``.

        Equal to ``self.Jdot @ self.qd`` but with n instead of n*n derivative passes.
        """
        if self._Jdot_qd is None:
            xdot = self.xdot
            out = sx.zeros(len(xdot))
            for k in range(len(self.q)):
                cache: dict = {}
                for i in range(len(xdot)):
                    out[i] = out[i] + sx.differentiate(xdot[i], self.q[k], cache) * self.qd[k]
            self._Jdot_qd = out
        return self._Jdot_qd


def make_map(phi, q, qd) -> DifferentialMap:
    """Differential map from configuration group ``q`` through ``phi``.

    ``phi`` may reference scene inputs (treated as constant in time) but not
    the velocity group.
    """
    phi = sx.to_array(phi).reshape(-1)
    q = np.asarray(q, dtype=object)
    qd = np.asarray(qd, dtype=object)
    vel_group = qd[0].name
    if vel_group in sx.free_groups(phi):
        raise sx.SymbolError(f"map depends on the velocity group {vel_group!r}")
    return DifferentialMap(phi=phi, q=q, qd=qd, J=sx.jacobian(phi, q))


def pull(dmap: DifferentialMap, spec: Spec) -> Spec:
    """Pull ``spec`` back through ``dmap``: ``(J^T M J, J^T (f + M Jdot qd))``."""
    m, n = dmap.J.shape
    if spec.dim != m:
        raise sx.SymbolError(f"map codomain has dimension {m}, spec has {spec.dim}")
    mapping = {}
    xdot = dmap.xdot
    for i in range(m):
        mapping[spec.x[i]] = dmap.phi[i]
        mapping[spec.xd[i]] = xdot[i]
    M = sx.substitute(spec.M, mapping)
    f = sx.substitute(spec.f, mapping)
    J = dmap.J
    MJ = M @ J
    pulled_M = _symmetric(n, lambda i, j: _dot(J[:, i], MJ[:, j]))
    inner = f + M @ dmap.Jdot_qd
    pulled_f = sx.to_array([_dot(J[:, i], inner) for i in range(n)])
    return Spec(pulled_M, pulled_f, dmap.q, dmap.qd)


def add_specs(s1: Spec, s2: Spec) -> Spec:
    if s1.dim != s2.dim:
        raise sx.SymbolError(f"cannot sum specs of dimension {s1.dim} and {s2.dim}")
    if any(a is not b for a, b in zip(s1.x, s2.x)) or any(a is not b for a, b in zip(s1.xd, s2.xd)):
        raise sx.SymbolError("cannot sum specs over different coordinates")
    M = _symmetric(s1.dim, lambda i, j: s1.M[i, j] + s2.M[i, j])
    return Spec(M, s1.f + s2.f, s1.x, s1.xd)


@dataclass(eq=False)
class Lagrangian:
    """A scalar energy ``L(x, xd)`` and its derived equations of motion."""

    L: sx.Expression
    x: np.ndarray
    xd: np.ndarray
    _spec: Spec | None = field(default=None, repr=False)

    @property
    def M(self) -> np.ndarray:
        return self.spec.M

    @property
    def f(self) -> np.ndarray:
        return self.spec.f

    @property
    def spec(self) -> Spec:
        if self._spec is None:
            self._spec = euler_lagrange(self)
        return self._spec


def euler_lagrange(lag: Lagrangian) -> Spec:
    """``M = d2L/dxd2`` and ``f = (d2L/dx dxd)^T xd - dL/dx``."""
    m = len(lag.x)
    grad_xd = []
    for i in range(m):
        grad_xd.append(sx.differentiate(lag.L, lag.xd[i]))
    hess = sx.zeros((m, m))
    mixed = sx.zeros((m, m))
    for j in range(m):
        cache_v: dict = {}
        cache_p: dict = {}
        for i in range(m):
            if j >= i:
                hess[i, j] = sx.differentiate(grad_xd[i], lag.xd[j], cache_v)
            mixed[i, j] = sx.differentiate(grad_xd[i], lag.x[j], cache_p)
    M = _symmetric(m, lambda i, j: hess[i, j])
    f = sx.to_array([
        _dot(mixed[i, :], lag.xd) - sx.differentiate(lag.L, lag.x[i]) for i in range(m)
    ])
    return Spec(M, f, lag.x, lag.xd)


def inverse(M: np.ndarray) -> np.ndarray:
    """Closed-form adjugate inverse for 1x1 to 3x3 symbolic matrices."""
    m = M.shape[0]
    if m == 1:
        return sx.to_array([[1.0 / M[0, 0]]])
    if m == 2:
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        return sx.to_array([[M[1, 1] / det, -M[0, 1] / det],
                            [-M[1, 0] / det, M[0, 0] / det]])
    if m == 3:
        cof = sx.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                r = [k for k in range(3) if k != i]
                c = [k for k in range(3) if k != j]
                minor = M[r[0], c[0]] * M[r[1], c[1]] - M[r[0], c[1]] * M[r[1], c[0]]
                cof[i, j] = minor if (i + j) % 2 == 0 else -minor
        det = M[0, 0] * cof[0, 0] + M[0, 1] * cof[0, 1] + M[0, 2] * cof[0, 2]
        return sx.to_array([[cof[j, i] / det for j in range(3)] for i in range(3)])
    raise sx.SymbolError(f"no closed-form inverse for {m}x{m} matrices")


def energize(h, le: Lagrangian, method: str = "auto") -> Spec:
    """Energize the geometry ``xdd + h = 0`` with the energy ``le``.

    Returns ``(M_L, f_L + P (M_L h - f_L))`` where
    ``P = M_L (M_L^-1 - xd xd^T / (xd^T M_L xd + EPS_EN))``.

    ``method="inverse"`` forms ``M_L^-1`` by adjugate (dimension <= 3) and
    fails at runtime where ``M_L`` is singular.  ``method="expanded"`` uses
    ``P v = v - M_L xd (xd^T v) / (xd^T M_L xd + EPS_EN)``, which needs no
    inverse.  ``"auto"`` picks the inverse up to dimension 3.
    """
    h = sx.to_array(h).reshape(-1)
    base = le.spec
    m = base.dim
    if h.shape != (m,):
        raise sx.SymbolError(f"geometry of length {len(h)} for a {m}-dimensional energy")
    if method == "auto":
        method = "inverse" if m <= 3 else "expanded"
    M, fL, xd = base.M, base.f, le.xd
    residual = M @ h - fL
    Mxd = M @ xd
    denom = _dot(xd, Mxd) + EPS_EN
    if method == "inverse":
        Minv = inverse(M)
        outer = sx.to_array([[xd[i] * xd[j] / denom for j in range(m)] for i in range(m)])
        P = M @ (Minv - outer)
        f = fL + P @ residual
    elif method == "expanded":
        along = _dot(xd, residual) / denom
        f = fL + residual - Mxd * along
    else:
        raise ValueError(f"unknown energization method {method!r}")
    return Spec(M, sx.to_array(f), le.x, le.xd)
