"""Symbolic scalar expressions over named input groups.

Expressions form a hash-consed DAG: building the same operation on the same
operands twice returns the same node, so common subexpressions are shared
from the start.  Vectors and matrices are plain numpy object arrays holding
:class:`Expression` entries, which keeps shape checking in numpy.

A set of output expressions compiles to a :class:`CompiledPlan`, a flat tape
of instructions in topological order.  The plan evaluates either through a
checked interpreter that writes into a caller-owned scratch buffer, or
through straight-line Python generated from the same tape.  Both paths apply
the same floating point operations in the same order as :func:`evaluate`.
"""
from __future__ import annotations

import itertools
import keyword
import math
import operator
import weakref
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "EPS_NORM",
    "Builder",
    "CompiledPlan",
    "EvaluationError",
    "Expression",
    "SymbolError",
    "UnboundInputError",
    "abs_",
    "compile_plan",
    "const",
    "cos",
    "differentiate",
    "evaluate",
    "evaluate_array",
    "exp",
    "free_groups",
    "jacobian",
    "log",
    "norm",
    "node_count",
    "sign",
    "sin",
    "sqrt",
    "substitute",
    "tanh",
]

#: regularizer inside Euclidean norms, keeps gradients finite at the origin
EPS_NORM = 1e-12

UNARY_OPS = ("neg", "tanh", "exp", "log", "sqrt", "sign", "abs", "sin", "cos")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")


class SymbolError(ValueError):
    """Raised when an expression or plan cannot be constructed."""


class UnboundInputError(LookupError):
    """Raised when evaluation needs an input group that was not bound."""


class EvaluationError(ArithmeticError):
    """A runtime domain error, carrying the node that failed."""

    def __init__(self, node: "Expression", operands: tuple):
        self.node = node
        self.operands = operands
        shown = ", ".join(repr(v) for v in operands)
        super().__init__(f"{node.op}({shown}) is outside its domain at node #{node.uid}")


def _sign(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    if x == 0.0:
        return 0.0
    return x  # nan propagates


def _log(x):
    if x > 0.0:
        return math.log(x)
    raise ValueError("log of non-positive value")


def _sqrt(x):
    if x > 0.0:
        return math.sqrt(x)
    raise ValueError("sqrt of non-positive value")


_UNARY_FN = {
    "neg": operator.neg,
    "tanh": math.tanh,
    "exp": math.exp,
    "log": _log,
    "sqrt": _sqrt,
    "sign": _sign,
    "abs": math.fabs,
    "sin": math.sin,
    "cos": math.cos,
}
_BINARY_FN = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "div": operator.truediv,
    "pow": math.pow,
}
_ARITH_ERRORS = (ValueError, ZeroDivisionError, OverflowError)

_TABLE: "weakref.WeakValueDictionary[tuple, Expression]" = weakref.WeakValueDictionary()
_UIDS = itertools.count()


class Expression:
    """One node of the expression DAG.

    ``op`` is ``"const"``, ``"input"`` or one of the unary/binary operator
    names.  Nodes are immutable and interned; compare them with ``is``.
    """

    __slots__ = ("op", "args", "value", "name", "index", "size", "uid", "__weakref__")

    def __init__(self, op, args=(), value=None, name=None, index=None, size=None):
        self.op = op
        self.args = args
        self.value = value
        self.name = name
        self.index = index
        self.size = size
        self.uid = next(_UIDS)

    # interning -------------------------------------------------------------
    @staticmethod
    def _make(op, args=(), value=None, name=None, index=None, size=None):
        if op == "const":
            key = ("const", float.hex(value))
        elif op == "input":
            key = ("input", name, index, size)
        else:
            key = (op,) + tuple(a.uid for a in args)
        node = _TABLE.get(key)
        if node is None:
            node = Expression(op, args, value, name, index, size)
            _TABLE[key] = node
        return node

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    @property
    def is_input(self) -> bool:
        return self.op == "input"

    def __repr__(self):
        if self.op == "const":
            return repr(self.value)
        if self.op == "input":
            return f"{self.name}[{self.index}]"
        if len(self.args) == 1:
            return f"{self.op}({self.args[0]!r})"
        return f"{self.op}({self.args[0]!r}, {self.args[1]!r})"

    def __hash__(self):
        return self.uid

    def __bool__(self):
        raise TypeError("symbolic expressions have no truth value")

    # operators -------------------------------------------------------------
    def __add__(self, other):
        other = _coerce(other)
        return NotImplemented if other is None else add(self, other)

    def __radd__(self, other):
        other = _coerce(other)
        return NotImplemented if other is None else add(other, self)

    def __sub__(self, other):
        other = _coerce(other)
        return NotImplemented if other is None else sub(self, other)

    def __rsub__(self, other):
        other = _coerce(other)
        return NotImplemented if other is None else sub(other, self)

    def __mul__(self, other):
        other = _coerce(other)
        return NotImplemented if other is None else mul(self, other)

    def __rmul__(self, other):
        other = _coerce(other)
        return NotImplemented if other is None else mul(other, self)

    def __truediv__(self, other):
        other = _coerce(other)
        return NotImplemented if other is None else div(self, other)

    def __rtruediv__(self, other):
        other = _coerce(other)
        return NotImplemented if other is None else div(other, self)

    def __pow__(self, other):
        other = _coerce(other)
        return NotImplemented if other is None else pow_(self, other)

    def __rpow__(self, other):
        other = _coerce(other)
        return NotImplemented if other is None else pow_(other, self)

    def __neg__(self):
        return neg(self)

    def __abs__(self):
        return abs_(self)


def _coerce(x):
    if isinstance(x, Expression):
        return x
    if isinstance(x, (bool, np.bool_)):
        return None
    if isinstance(x, (int, float, np.integer, np.floating)):
        return const(float(x))
    return None


def as_expr(x) -> Expression:
    e = _coerce(x)
    if e is None:
        raise TypeError(f"cannot use {type(x).__name__} as an expression")
    return e


def const(value: float) -> Expression:
    return Expression._make("const", value=float(value))


ZERO = const(0.0)
ONE = const(1.0)


def _is(e: Expression, value: float) -> bool:
    return e.op == "const" and e.value == value


# constructors with folding and 0/1 identities ---------------------------------

def _unary(op: str, a) -> Expression:
    a = as_expr(a)
    if a.op == "const":
        try:
            return const(_UNARY_FN[op](a.value))
        except _ARITH_ERRORS:
            pass  # domain violations surface at evaluation time
    return Expression._make(op, (a,))


def neg(a) -> Expression:
    return _unary("neg", a)


def tanh(a) -> Expression:
    return _unary("tanh", a)


def exp(a) -> Expression:
    return _unary("exp", a)


def log(a) -> Expression:
    return _unary("log", a)


def sqrt(a) -> Expression:
    return _unary("sqrt", a)


def sign(a) -> Expression:
    return _unary("sign", a)


def abs_(a) -> Expression:
    return _unary("abs", a)


def sin(a) -> Expression:
    return _unary("sin", a)


def cos(a) -> Expression:
    return _unary("cos", a)


def _fold(op, a, b):
    if a.op == "const" and b.op == "const":
        try:
            return const(_BINARY_FN[op](a.value, b.value))
        except _ARITH_ERRORS:
            return None
    return None


def add(a, b) -> Expression:
    a, b = as_expr(a), as_expr(b)
    folded = _fold("add", a, b)
    if folded is not None:
        return folded
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Expression._make("add", (a, b))


def sub(a, b) -> Expression:
    a, b = as_expr(a), as_expr(b)
    folded = _fold("sub", a, b)
    if folded is not None:
        return folded
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return Expression._make("sub", (a, b))


def mul(a, b) -> Expression:
    a, b = as_expr(a), as_expr(b)
    folded = _fold("mul", a, b)
    if folded is not None:
        return folded
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return Expression._make("mul", (a, b))


def div(a, b) -> Expression:
    a, b = as_expr(a), as_expr(b)
    folded = _fold("div", a, b)
    if folded is not None:
        return folded
    if _is(b, 1.0):
        return a
    if _is(a, 0.0):
        return ZERO
    return Expression._make("div", (a, b))


def pow_(a, b) -> Expression:
    a, b = as_expr(a), as_expr(b)
    folded = _fold("pow", a, b)
    if folded is not None:
        return folded
    if _is(b, 1.0):
        return a
    if _is(b, 0.0) or _is(a, 1.0):
        return ONE
    return Expression._make("pow", (a, b))


_CONSTRUCTOR = {
    "neg": neg, "tanh": tanh, "exp": exp, "log": log, "sqrt": sqrt,
    "sign": sign, "abs": abs_, "sin": sin, "cos": cos,
    "add": add, "sub": sub, "mul": mul, "div": div, "pow": pow_,
}


def norm(v: Sequence) -> Expression:
    """Regularized Euclidean norm ``sqrt(sum v_i^2 + EPS_NORM)``."""
    total = None
    for item in v:
        sq = item * item
        total = sq if total is None else total + sq
    return sqrt(total + EPS_NORM)


# builder context ---------------------------------------------------------------

class Builder:
    """Owns the input groups of one symbolic construction."""

    def __init__(self):
        self._groups: dict[str, int] = {}

    @property
    def groups(self) -> dict[str, int]:
        return dict(self._groups)

    def input_group(self, name: str, dim: int) -> np.ndarray:
        if not isinstance(name, str) or not name.isidentifier() or keyword.iskeyword(name):
            raise SymbolError(f"input group name {name!r} is not an identifier")
        if int(dim) != dim or dim < 1:
            raise SymbolError(f"input group {name!r} needs dim >= 1, got {dim}")
        if name in self._groups:
            raise SymbolError(f"input group {name!r} already declared")
        dim = int(dim)
        self._groups[name] = dim
        return _vector(Expression._make("input", name=name, index=i, size=dim) for i in range(dim))


def _vector(items: Iterable) -> np.ndarray:
    items = list(items)
    out = np.empty(len(items), dtype=object)
    for i, item in enumerate(items):
        out[i] = item
    return out


def to_array(values, shape=None) -> np.ndarray:
    """Object array of expressions, coercing numbers to constants."""
    arr = np.array(values, dtype=object)
    flat = arr.reshape(-1)
    for i, item in enumerate(flat):
        flat[i] = as_expr(item)
    return arr if shape is None else arr.reshape(shape)


def zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(ZERO)
    return out


def identity(n: int) -> np.ndarray:
    out = zeros((n, n))
    for i in range(n):
        out[i, i] = ONE
    return out


# traversal ---------------------------------------------------------------------

def _postorder(roots: Iterable[Expression], seen=None) -> list[Expression]:
    """Children before parents; nodes in the container ``seen`` are skipped."""
    order = []
    skip = () if seen is None else seen
    visited: set = set()
    for root in roots:
        if root in visited or root in skip:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node in visited:
                continue
            visited.add(node)
            stack.append((node, True))
            for child in reversed(node.args):
                if child not in visited and child not in skip:
                    stack.append((child, False))
    return order


def _flatten(exprs) -> list[Expression]:
    if isinstance(exprs, Expression):
        return [exprs]
    if isinstance(exprs, np.ndarray):
        return [as_expr(e) for e in exprs.reshape(-1)]
    return [as_expr(e) for e in exprs]


def node_count(exprs) -> int:
    return len(_postorder(_flatten(exprs)))


def free_groups(exprs) -> set[str]:
    """Names of the input groups referenced by the expressions."""
    return {n.name for n in _postorder(_flatten(exprs)) if n.op == "input"}


# differentiation ---------------------------------------------------------------

def _derivative(node: Expression, var: Expression, d: dict) -> Expression:
    op = node.op
    if op == "const":
        return ZERO
    if op == "input":
        return ONE if node is var else ZERO
    if len(node.args) == 1:
        a = node.args[0]
        da = d[a]
        if _is(da, 0.0) or op == "sign":
            return ZERO
        if op == "neg":
            return neg(da)
        if op == "tanh":
            return (1.0 - node * node) * da
        if op == "exp":
            return node * da
        if op == "log":
            return da / a
        if op == "sqrt":
            return da / (2.0 * node)
        if op == "abs":
            return sign(a) * da
        if op == "sin":
            return cos(a) * da
        if op == "cos":
            return neg(sin(a)) * da
        raise SymbolError(f"no derivative rule for {op}")
    a, b = node.args
    da, db = d[a], d[b]
    if _is(da, 0.0) and _is(db, 0.0):
        return ZERO
    if op == "add":
        return da + db
    if op == "sub":
        return da - db
    if op == "mul":
        return da * b + a * db
    if op == "div":
        return (da - node * db) / b
    if op == "pow":
        if _is(db, 0.0):
            return b * pow_(a, b - 1.0) * da
        return node * (db * log(a) + b * da / a)
    raise SymbolError(f"no derivative rule for {op}")


def differentiate(expr, var: Expression, cache: dict | None = None) -> Expression:
    """Partial derivative of ``expr`` with respect to the input node ``var``.

    ``cache`` maps already-differentiated nodes to their derivatives with
    respect to the same ``var`` and is extended in place; share it between
    calls to reuse work across related expressions.
    """
    if not isinstance(var, Expression) or var.op != "input":
        raise SymbolError("can only differentiate with respect to an input node")
    expr = as_expr(expr)
    d = {} if cache is None else cache
    for node in _postorder([expr], seen=d):
        d[node] = _derivative(node, var, d)
    return d[expr]


def jacobian(v, q) -> np.ndarray:
    """Matrix of partials ``J[i, j] = d v[i] / d q[j]``."""
    v = np.asarray(v, dtype=object).reshape(-1)
    q = np.asarray(q, dtype=object).reshape(-1)
    out = zeros((len(v), len(q)))
    for j, var in enumerate(q):
        cache: dict = {}
        for i, item in enumerate(v):
            out[i, j] = differentiate(item, var, cache)
    return out


def substitute(exprs, mapping: Mapping[Expression, object]):
    """Replace input nodes by expressions, rebuilding through the simplifiers.

    Accepts a single expression or an object array and returns the same kind.
    """
    repl = {k: as_expr(v) for k, v in mapping.items()}
    for k in repl:
        if k.op != "input":
            raise SymbolError("substitution keys must be input nodes")
    roots = _flatten(exprs)
    done: dict[Expression, Expression] = {}
    for node in _postorder(roots):
        if node.op == "input":
            done[node] = repl.get(node, node)
        elif node.op == "const":
            done[node] = node
        else:
            args = tuple(done[a] for a in node.args)
            if all(x is y for x, y in zip(args, node.args)):
                done[node] = node
            else:
                done[node] = _CONSTRUCTOR[node.op](*args)
    if isinstance(exprs, np.ndarray):
        out = np.empty(exprs.shape, dtype=object)
        flat = out.reshape(-1)
        for i, r in enumerate(roots):
            flat[i] = done[r]
        return out
    if isinstance(exprs, Expression):
        return done[roots[0]]
    return [done[r] for r in roots]


# evaluation --------------------------------------------------------------------

def _bind(node: Expression, bindings: Mapping[str, object]) -> float:
    try:
        values = bindings[node.name]
    except KeyError:
        raise UnboundInputError(f"input group {node.name!r} is not bound") from None
    values = np.asarray(values, dtype=float).reshape(-1)
    if len(values) != node.size:
        raise UnboundInputError(
            f"input group {node.name!r} has length {node.size}, bound with {len(values)}")
    return float(values[node.index])


def _apply(node: Expression, operands: tuple) -> float:
    try:
        if len(operands) == 1:
            return _UNARY_FN[node.op](operands[0])
        return _BINARY_FN[node.op](operands[0], operands[1])
    except _ARITH_ERRORS:
        raise EvaluationError(node, operands) from None


def _evaluate_many(roots: list[Expression], bindings) -> dict[Expression, float]:
    values: dict[Expression, float] = {}
    for node in _postorder(roots):
        if node.op == "const":
            values[node] = node.value
        elif node.op == "input":
            values[node] = _bind(node, bindings)
        else:
            values[node] = _apply(node, tuple(values[a] for a in node.args))
    return values


def evaluate(expr, bindings: Mapping[str, object] | None = None) -> float:
    """Evaluate one expression in IEEE double precision."""
    expr = as_expr(expr)
    return _evaluate_many([expr], bindings or {})[expr]


def evaluate_array(exprs, bindings: Mapping[str, object] | None = None) -> np.ndarray:
    arr = np.asarray(exprs, dtype=object)
    roots = _flatten(arr)
    values = _evaluate_many(roots, bindings or {})
    return np.array([values[r] for r in roots], dtype=float).reshape(arr.shape)


# compilation -------------------------------------------------------------------

def _layout_entry(group) -> tuple[str, int]:
    if isinstance(group, tuple) and len(group) == 2 and isinstance(group[0], str):
        return group[0], int(group[1])
    nodes = _flatten(group)
    if not nodes or any(n.op != "input" for n in nodes) or len({n.name for n in nodes}) != 1:
        raise SymbolError("inputs must be (name, dim) pairs or input-group vectors")
    return nodes[0].name, nodes[0].size


class CompiledPlan:
    """A topologically ordered instruction tape with named input and output slots.

    Instructions are ``(op, dst, a, b)`` tuples.  ``input`` loads flat input
    position ``a``; ``const`` loads the literal ``a``; every other op reads
    slots ``a`` (and ``b``) and writes slot ``dst``.  The tape holds exactly
    one instruction per distinct node, so its length is the node count after
    sharing.
    """

    def __init__(self, tape, input_layout, output_layout, output_slots, nodes=None):
        self.tape = tape
        self.input_layout = input_layout
        self.output_layout = output_layout
        self.output_slots = output_slots
        self._nodes = nodes
        self.n_inputs = sum(dim for _, dim in input_layout)
        self.n_outputs = len(output_slots)
        self._fn = None
        self._source = None

    def __len__(self):
        return len(self.tape)

    def __getstate__(self):
        return {"tape": self.tape, "input_layout": self.input_layout,
                "output_layout": self.output_layout, "output_slots": self.output_slots}

    def __setstate__(self, state):
        self.__init__(state["tape"], state["input_layout"], state["output_layout"],
                      state["output_slots"])

    # input handling ---------------------------------------------------------
    def flatten_inputs(self, inputs) -> list[float]:
        """Accept a name->array mapping or an already flat sequence."""
        if isinstance(inputs, Mapping):
            flat: list[float] = []
            for name, dim in self.input_layout:
                if name not in inputs:
                    raise UnboundInputError(f"input group {name!r} is not bound")
                vals = np.asarray(inputs[name], dtype=float).reshape(-1)
                if len(vals) != dim:
                    raise UnboundInputError(
                        f"input group {name!r} has length {dim}, bound with {len(vals)}")
                flat.extend(vals.tolist())
            return flat
        flat = np.asarray(inputs, dtype=float).reshape(-1).tolist()
        if len(flat) != self.n_inputs:
            raise UnboundInputError(f"expected {self.n_inputs} inputs, got {len(flat)}")
        return flat

    def unflatten_outputs(self, flat) -> dict[str, np.ndarray]:
        out = {}
        pos = 0
        for name, shape in self.output_layout:
            size = int(np.prod(shape)) if shape else 1
            out[name] = np.array(flat[pos:pos + size], dtype=float).reshape(shape)
            pos += size
        return out

    # interpreter ------------------------------------------------------------
    def new_scratch(self) -> list[float]:
        return [0.0] * len(self.tape)

    def run_tape(self, flat_inputs: Sequence[float], scratch: list | None = None) -> list[float]:
        """Checked tape interpreter; raises :class:`EvaluationError` on domain errors."""
        s = self.new_scratch() if scratch is None else scratch
        if len(s) < len(self.tape):
            raise ValueError("scratch buffer is shorter than the tape")
        for ins in self.tape:
            op, dst, a, b = ins
            if op == "input":
                s[dst] = flat_inputs[a]
            elif op == "const":
                s[dst] = a
            else:
                try:
                    if b is None:
                        s[dst] = _UNARY_FN[op](s[a])
                    else:
                        s[dst] = _BINARY_FN[op](s[a], s[b])
                except _ARITH_ERRORS:
                    operands = (s[a],) if b is None else (s[a], s[b])
                    node = self._nodes[dst] if self._nodes else Expression(op)
                    raise EvaluationError(node, operands) from None
        return [s[i] for i in self.output_slots]

    # generated fast path ----------------------------------------------------
    @property
    def source(self) -> str:
        if self._source is None:
            self._source = self._generate()
        return self._source

    def _generate(self) -> str:
        infix = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
        call = {"tanh": "_tanh", "exp": "_exp", "log": "_log", "sqrt": "_sqrt",
                "sign": "_sign", "abs": "_fabs", "sin": "_sin", "cos": "_cos", "pow": "_pow"}
        names: dict[int, str] = {}
        lines = ["def _plan(x):"]
        for op, dst, a, b in self.tape:
            if op == "const":
                names[dst] = f"({a!r})" if math.isfinite(a) else f"_float({str(a)!r})"
                continue
            target = f"v{dst}"
            if op == "input":
                lines.append(f"    {target} = x[{a}]")
            elif op in infix:
                lines.append(f"    {target} = {names[a]} {infix[op]} {names[b]}")
            elif op == "neg":
                lines.append(f"    {target} = -{names[a]}")
            elif b is None:
                lines.append(f"    {target} = {call[op]}({names[a]})")
            else:
                lines.append(f"    {target} = {call[op]}({names[a]}, {names[b]})")
            names[dst] = target
        outs = ", ".join(names[i] for i in self.output_slots)
        lines.append(f"    return [{outs}]")
        return "\n".join(lines) + "\n"

    def _function(self):
        if self._fn is None:
            namespace = {
                "_tanh": math.tanh, "_exp": math.exp, "_log": _log, "_sqrt": _sqrt,
                "_sign": _sign, "_fabs": math.fabs, "_sin": math.sin, "_cos": math.cos,
                "_pow": math.pow, "_float": float,
            }
            exec(compile(self.source, "<compiled-plan>", "exec"), namespace)
            self._fn = namespace["_plan"]
        return self._fn

    def run(self, flat_inputs: Sequence[float]) -> list[float]:
        """Fast evaluation of flat Python-float inputs to flat outputs.

        Domain errors are re-run through the interpreter so the raised
        :class:`EvaluationError` names the failing node.
        """
        try:
            return self._function()(flat_inputs)
        except _ARITH_ERRORS:
            return self.run_tape(flat_inputs)

    def evaluate(self, inputs, scratch: list | None = None) -> dict[str, np.ndarray]:
        flat = self.flatten_inputs(inputs)
        if scratch is not None:
            return self.unflatten_outputs(self.run_tape(flat, scratch))
        return self.unflatten_outputs(self.run(flat))


def compile_plan(outputs: Mapping[str, object], inputs: Sequence) -> CompiledPlan:
    """Compile named output expressions (scalars or arrays) against ordered input groups."""
    input_layout = [_layout_entry(g) for g in inputs]
    offsets = {}
    pos = 0
    for name, dim in input_layout:
        if name in offsets:
            raise SymbolError(f"input group {name!r} listed twice")
        offsets[name] = (pos, dim)
        pos += dim

    output_layout = []
    roots: list[Expression] = []
    for name, value in outputs.items():
        if isinstance(value, np.ndarray):
            output_layout.append((name, tuple(value.shape)))
        else:
            output_layout.append((name, ()))
        roots.extend(_flatten(value))

    order = _postorder(roots)
    missing = sorted({n.name for n in order if n.op == "input" and n.name not in offsets})
    if missing:
        raise SymbolError(f"inputs do not list group(s): {', '.join(missing)}")

    slot: dict[Expression, int] = {}
    tape = []
    for node in order:
        dst = len(tape)
        slot[node] = dst
        if node.op == "input":
            start, dim = offsets[node.name]
            if node.size != dim:
                raise SymbolError(f"input group {node.name!r} declared with dim {node.size}, listed as {dim}")
            tape.append(("input", dst, start + node.index, None))
        elif node.op == "const":
            tape.append(("const", dst, node.value, None))
        elif len(node.args) == 1:
            tape.append((node.op, dst, slot[node.args[0]], None))
        else:
            tape.append((node.op, dst, slot[node.args[0]], slot[node.args[1]]))
    output_slots = [slot[r] for r in roots]
    return CompiledPlan(tape, input_layout, output_layout, output_slots, nodes=order)
