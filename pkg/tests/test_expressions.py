import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenlab.expressions import ExpressionError, compile_expression


class TestCompile:
    def test_basic_arithmetic(self):
        fn = compile_expression("2*r + 1", ["r"])
        assert fn(np.array([0.0, 1.0])) == pytest.approx([1.0, 3.0])

    def test_functions_and_constants(self):
        fn = compile_expression("sin(pi*x1)*exp(-r)", ["x1", "r"])
        assert fn(0.5, 0.0) == pytest.approx(1.0)

    def test_absy_alias(self):
        fn = compile_expression("absy**2", ["x1", "r"])
        assert fn(0.0, 3.0) == pytest.approx(9.0)

    @given(st.floats(0.1, 2.0), st.floats(-1.0, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_matches_numpy(self, r, t):
        fn = compile_expression("r**1.5*cos(theta)", ["r", "theta"])
        assert fn(r, t) == pytest.approx(r ** 1.5 * np.cos(t))

    def test_vectorized(self):
        fn = compile_expression("x1 + r", ["x1", "r"])
        x = np.linspace(0, 1, 5)
        r = np.linspace(1, 2, 5)
        assert fn(x, r) == pytest.approx(x + r)


class TestRejection:
    @pytest.mark.parametrize("bad", [
        "__import__('os')",
        "open('/etc/passwd')",
        "x1.real",
        "[1,2,3]",
        "lambda: 1",
        "r if r > 0 else 0",
        "unknown_var",
        "min(r, key=abs)",
    ])
    def test_rejects_non_arithmetic(self, bad):
        with pytest.raises(ExpressionError):
            compile_expression(bad, ["x1", "r"])

    def test_rejects_bad_syntax(self):
        with pytest.raises(ExpressionError):
            compile_expression("r +* 2", ["r"])

    def test_wrong_arity(self):
        fn = compile_expression("r", ["r"])
        with pytest.raises(ValueError):
            fn(1.0, 2.0)
