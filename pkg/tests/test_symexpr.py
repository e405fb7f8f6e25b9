import math
import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exprgen import central_difference, random_expression
from fabtune import symexpr as sx


@pytest.fixture
def xs():
    return sx.Builder().input_group("x", 3)


class TestBuilder:
    def test_input_group_names_and_indices(self):
        q = sx.Builder().input_group("q", 3)
        assert [(e.name, e.index, e.size) for e in q] == [("q", 0, 3), ("q", 1, 3), ("q", 2, 3)]

    def test_goal_group(self):
        assert len(sx.Builder().input_group("goal", 2)) == 2

    def test_duplicate_group_rejected(self):
        b = sx.Builder()
        b.input_group("q", 3)
        with pytest.raises(sx.SymbolError, match="already declared"):
            b.input_group("q", 2)

    @pytest.mark.parametrize("name, dim", [("q", 0), ("1q", 2), ("class", 1), ("a b", 1)])
    def test_bad_declarations(self, name, dim):
        with pytest.raises(sx.SymbolError):
            sx.Builder().input_group(name, dim)

    def test_nodes_are_shared(self, xs):
        assert (xs[0] + xs[1]) is (xs[0] + xs[1])
        assert sx.tanh(xs[0]) is sx.tanh(xs[0])

    def test_truth_value_is_an_error(self, xs):
        with pytest.raises(TypeError):
            bool(xs[0])


class TestFolding:
    def test_constants_fold(self):
        e = sx.const(2.0) * 3.0 + 1.0
        assert e.op == "const" and e.value == 7.0

    @pytest.mark.parametrize("build", [
        lambda x: x + 0.0, lambda x: 0.0 + x, lambda x: x * 1.0, lambda x: 1.0 * x,
        lambda x: x - 0.0, lambda x: x / 1.0, lambda x: x ** 1.0,
    ])
    def test_identities_return_operand(self, xs, build):
        assert build(xs[0]) is xs[0]

    def test_multiplying_by_zero(self, xs):
        assert (xs[0] * 0.0) is sx.ZERO

    def test_folding_preserves_values(self, xs, rng):
        for _ in range(100):
            point = rng.uniform(-1, 1, 3)
            folded = (xs[0] * 1.0 + 0.0) * (sx.const(2.0) + 3.0) - sx.const(4.0) / 2.0
            raw = xs[0] * 5.0 - 2.0
            assert sx.evaluate(folded, {"x": point}) == sx.evaluate(raw, {"x": point})


class TestDifferentiate:
    def test_square(self, xs):
        assert sx.evaluate(sx.differentiate(xs[0] * xs[0], xs[0]), {"x": [3, 0, 0]}) == 6.0

    def test_tanh_at_zero(self, xs):
        assert sx.evaluate(sx.differentiate(sx.tanh(xs[0]), xs[0]), {"x": [0, 0, 0]}) == 1.0

    def test_inverse_cube(self, xs):
        d = sx.differentiate(1.0 / xs[0] ** 3.0, xs[0])
        assert sx.evaluate(d, {"x": [2, 0, 0]}) == pytest.approx(-0.1875, abs=1e-15)

    def test_other_input_is_zero(self, xs):
        assert sx.differentiate(xs[1], xs[0]) is sx.ZERO

    def test_sign_and_abs(self, xs):
        assert sx.differentiate(sx.sign(xs[0]), xs[0]) is sx.ZERO
        d = sx.differentiate(sx.abs_(xs[0]), xs[0])
        assert sx.evaluate(d, {"x": [-2, 0, 0]}) == -1.0

    def test_linearity(self, xs, rng):
        e1 = sx.sin(xs[0] * xs[1])
        e2 = sx.exp(xs[2]) / (1.0 + xs[0] * xs[0])
        combo = 2.5 * e1 + e2
        for _ in range(20):
            p = {"x": rng.uniform(-1, 1, 3)}
            lhs = sx.evaluate(sx.differentiate(combo, xs[0]), p)
            rhs = 2.5 * sx.evaluate(sx.differentiate(e1, xs[0]), p) + sx.evaluate(
                sx.differentiate(e2, xs[0]), p)
            assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_expressions_match_finite_differences(self, xs, seed):
        rng = np.random.default_rng(seed)
        for _ in range(10):
            e = random_expression(rng, xs)
            grads = [sx.differentiate(e, x) for x in xs]
            for _ in range(5):
                point = rng.uniform(-1, 1, 3)
                for i in range(3):
                    g = sx.evaluate(grads[i], {"x": point})
                    fd = central_difference(e, "x", point, i)
                    assert abs(g - fd) <= 1e-5 * max(abs(g), abs(fd), 1.0)


class TestJacobian:
    def test_hand_partials(self):
        q = sx.Builder().input_group("q", 2)
        J = sx.jacobian([q[0] + q[1], q[0] * q[1]], q)
        assert sx.evaluate_array(J, {"q": [2, 3]}).tolist() == [[1, 1], [3, 2]]

    def test_identity_map(self):
        q = sx.Builder().input_group("q", 3)
        assert sx.evaluate_array(sx.jacobian(q, q), {"q": [1, 2, 3]}).tolist() == np.eye(3).tolist()

    def test_constant_map(self):
        q = sx.Builder().input_group("q", 2)
        J = sx.jacobian(sx.to_array([1.0, 2.0, 3.0]), q)
        assert J.shape == (3, 2) and all(e is sx.ZERO for e in J.ravel())


class TestEvaluate:
    def test_constant(self):
        assert sx.evaluate(sx.const(4.2)) == 4.2

    def test_sqrt(self):
        q = sx.Builder().input_group("q", 1)
        assert sx.evaluate(sx.sqrt(q[0]), {"q": [9]}) == 3.0

    def test_sign_of_zero(self):
        q = sx.Builder().input_group("q", 1)
        assert sx.evaluate(sx.sign(q[0]), {"q": [0.0]}) == 0.0

    def test_unbound_input(self, xs):
        with pytest.raises(sx.UnboundInputError, match="'x'"):
            sx.evaluate(xs[0] + 1.0, {})

    def test_wrong_length(self, xs):
        with pytest.raises(sx.UnboundInputError):
            sx.evaluate(xs[0], {"x": [1.0, 2.0]})

    @pytest.mark.parametrize("build, value", [(sx.log, 0.0), (sx.log, -1.0), (sx.sqrt, -4.0)])
    def test_domain_error_names_node(self, xs, build, value):
        node = build(xs[0])
        with pytest.raises(sx.EvaluationError) as info:
            sx.evaluate(node + 1.0, {"x": [value, 0, 0]})
        assert info.value.node is node

    def test_norm_is_regularized(self, xs):
        n = sx.norm(xs)
        assert sx.evaluate(n, {"x": [0, 0, 0]}) == pytest.approx(1e-6)
        grad = [sx.evaluate(sx.differentiate(n, x), {"x": [0, 0, 0]}) for x in xs]
        assert grad == [0.0, 0.0, 0.0]


class TestSubstitute:
    def test_replaces_inputs(self, xs):
        y = sx.Builder().input_group("y", 1)
        e = sx.substitute(xs[0] * xs[1], {xs[0]: y[0] + 1.0})
        assert sx.evaluate(e, {"x": [0, 3, 0], "y": [1]}) == 6.0

    def test_unchanged_graph_is_identical(self, xs):
        e = sx.tanh(xs[0])
        assert sx.substitute(e, {xs[2]: sx.const(1.0)}) is e

    def test_keys_must_be_inputs(self, xs):
        with pytest.raises(sx.SymbolError):
            sx.substitute(xs[0], {xs[0] + 1.0: 2.0})


class TestCompile:
    def test_cse_aliases_operands(self):
        q = sx.Builder().input_group("q", 1)
        plan = sx.compile_plan({"y": q[0] + q[0]}, [q])
        adds = [ins for ins in plan.tape if ins[0] == "add"]
        assert len(adds) == 1 and adds[0][2] == adds[0][3]

    def test_missing_group_is_listed(self, xs):
        other = sx.Builder().input_group("goal", 2)
        with pytest.raises(sx.SymbolError, match="goal"):
            sx.compile_plan({"y": xs[0] + other[0]}, [xs])

    def test_tape_has_one_instruction_per_node(self, xs, rng):
        e = random_expression(rng, xs)
        plan = sx.compile_plan({"y": e, "g": sx.to_array([sx.differentiate(e, x) for x in xs])}, [xs])
        assert len(plan) == sx.node_count([e] + [sx.differentiate(e, x) for x in xs])

    def test_matches_evaluate_bitwise(self, xs):
        rng = np.random.default_rng(7)
        exprs = [random_expression(rng, xs) for _ in range(10)]
        grads = sx.to_array([[sx.differentiate(e, x) for x in xs] for e in exprs])
        outputs = {"f": sx.to_array(exprs), "grad": grads}
        plan = sx.compile_plan(outputs, [xs])
        scratch = plan.new_scratch()
        for _ in range(1000):
            point = rng.uniform(-2, 2, 3)
            fast = plan.evaluate({"x": point})
            slow = plan.evaluate({"x": point}, scratch)
            direct_f = sx.evaluate_array(outputs["f"], {"x": point})
            direct_g = sx.evaluate_array(grads, {"x": point})
            assert np.array_equal(fast["f"], direct_f) and np.array_equal(fast["grad"], direct_g)
            assert np.array_equal(slow["f"], direct_f) and np.array_equal(slow["grad"], direct_g)

    def test_fast_path_reports_failing_node(self, xs):
        bad = sx.log(xs[0])
        plan = sx.compile_plan({"y": bad * 2.0}, [xs])
        with pytest.raises(sx.EvaluationError) as info:
            plan.run([-1.0, 0.0, 0.0])
        assert info.value.node is bad

    def test_output_shapes(self, xs):
        plan = sx.compile_plan({"s": xs[0], "m": sx.identity(2) * xs[1]}, [("x", 3)])
        out = plan.evaluate({"x": [1.0, 2.0, 3.0]})
        assert out["s"].shape == () and out["m"].tolist() == [[2.0, 0.0], [0.0, 2.0]]

    def test_pickle_round_trip(self, xs):
        plan = sx.compile_plan({"y": sx.sin(xs[0]) * xs[1]}, [xs])
        again = pickle.loads(pickle.dumps(plan))
        assert again.run([0.3, 2.0, 0.0]) == plan.run([0.3, 2.0, 0.0])


finite = st.floats(-5, 5, allow_nan=False)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(a=finite, b=finite)
    def test_product_rule(self, a, b):
        x = sx.Builder().input_group("x", 2)
        e = sx.sin(x[0]) * sx.exp(x[0] * x[1])
        d = sx.evaluate(sx.differentiate(e, x[0]), {"x": [a, b]})
        expected = math.cos(a) * math.exp(a * b) + math.sin(a) * b * math.exp(a * b)
        assert d == pytest.approx(expected, rel=1e-12, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(a=finite, b=finite, c=finite)
    def test_sum_commutes_in_value(self, a, b, c):
        x = sx.Builder().input_group("x", 3)
        p = {"x": [a, b, c]}
        assert sx.evaluate(x[0] + x[1], p) == sx.evaluate(x[1] + x[0], p)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), a=finite, b=finite, c=finite)
    def test_compiled_equals_direct(self, seed, a, b, c):
        x = sx.Builder().input_group("x", 3)
        e = random_expression(np.random.default_rng(seed), x, depth=6)
        plan = sx.compile_plan({"y": e}, [x])
        assert plan.run([a, b, c])[0] == sx.evaluate(e, {"x": [a, b, c]})
