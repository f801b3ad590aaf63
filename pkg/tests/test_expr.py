import math

import numpy as np
import pytest

from iosscert.expr import (
    DomainError,
    ExprError,
    degree_xu,
    eval_expr,
    free_vars,
    parse_expression,
)

DIMS = (2, 2, 1)  # n=2, q=2, m=1


def ev(text, x, u=(), d=(), grad=False):
    e = parse_expression(text, DIMS)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    U = np.asarray(u, dtype=float).reshape(X.shape[0], -1) if len(u) else np.zeros((X.shape[0], 0))
    if U.shape[1] != 2:
        U = np.zeros((X.shape[0], 2))
    D = np.asarray(d, dtype=float).reshape(X.shape[0], -1) if len(d) else np.zeros((X.shape[0], 1))
    return eval_expr(e, X, U, D, 2, 2, want_grad=grad)


def test_arithmetic_and_precedence():
    val, _, ok = ev("1 + 2*3", [0.0, 0.0])
    assert val[0] == 7.0 and ok[0]
    val, _, _ = ev("2*x1^2 - x2/4", [3.0, 8.0])
    assert val[0] == 2 * 9 - 2.0
    val, _, _ = ev("-x1^2", [3.0, 0.0])
    assert val[0] == -9.0  # unary minus binds looser than the power
    val, _, _ = ev("(1+2)*(3-5)", [0.0, 0.0])
    assert val[0] == -6.0
    val, _, _ = ev("2^-2", [0.0, 0.0])
    assert val[0] == 0.25
    val, _, _ = ev("x1^(-1)", [4.0, 0.0])
    assert val[0] == 0.25


def test_unary_functions():
    x = 0.7
    for name, ref in [("sin", math.sin), ("cos", math.cos), ("exp", math.exp),
                      ("tanh", math.tanh), ("sqrt", math.sqrt)]:
        val, _, ok = ev(f"{name}(x1)", [x, 0.0])
        assert ok[0]
        assert val[0] == pytest.approx(ref(x), rel=1e-15)


def test_parse_errors_carry_location():
    with pytest.raises(ExprError) as err:
        parse_expression("1 + * 2", DIMS, line_no=3)
    assert "line 3" in str(err.value)
    with pytest.raises(ExprError, match="trailing"):
        parse_expression("1 2", DIMS)
    with pytest.raises(ExprError, match="exponent must be a literal integer"):
        parse_expression("x1^x2", DIMS)
    with pytest.raises(ExprError, match="exponent must be a literal integer"):
        parse_expression("x1^2.5", DIMS)
    with pytest.raises(ExprError, match="unknown identifier"):
        parse_expression("foo(x1)", DIMS)
    with pytest.raises(ExprError, match="unexpected character"):
        parse_expression("x1 @ 2", DIMS)


def test_undeclared_variable_bounds():
    with pytest.raises(ExprError, match="undeclared variable x3"):
        parse_expression("x3", DIMS)
    with pytest.raises(ExprError, match="undeclared variable u2"):
        parse_expression("x1 * u2", (1, 1, 0))
    with pytest.raises(ExprError, match="undeclared variable d1"):
        parse_expression("d1", (1, 1, 0))


def test_comments_and_whitespace():
    val, _, _ = ev("  x1   +  1  # trailing comment", [2.0, 0.0])
    assert val[0] == 3.0


def test_forward_ad_polynomial_matches_hand_gradient():
    # f = x1^2 * u1 + 3*x1 - x2^3; grad wrt (x1, x2, u1, u2)
    e = parse_expression("x1^2 * u1 + 3*x1 - x2^3", DIMS)
    rng = np.random.default_rng(7)
    Z = rng.standard_normal((50, 5))
    X, U, D = Z[:, :2], Z[:, 2:4], Z[:, 4:]
    val, grad, ok = eval_expr(e, X, U, D, 2, 2, want_grad=True)
    assert ok.all()
    hand = np.stack([
        2 * X[:, 0] * U[:, 0] + 3,
        -3 * X[:, 1] ** 2,
        X[:, 0] ** 2,
        np.zeros(50),
    ], axis=1)
    assert np.allclose(grad, hand, rtol=1e-14, atol=1e-14)


def test_forward_ad_against_central_differences():
    exprs = [
        "sin(x1)*cos(x2) + exp(u1/4)",
        "tanh(x1*u2) - sqrt(x2 + 3)",
        "x1^3 * d1 + u1*u2/(x2 + 5)",
    ]
    rng = np.random.default_rng(11)
    for text in exprs:
        e = parse_expression(text, DIMS)
        for _ in range(20):
            z = rng.uniform(-0.9, 0.9, size=5)
            X, U, D = z[None, :2], z[None, 2:4], z[None, 4:]
            _, grad, ok = eval_expr(e, X, U, D, 2, 2, want_grad=True)
            assert ok[0]

            def value_at(w):
                v, _, _ = eval_expr(e, w[None, :2], w[None, 2:4], w[None, 4:], 2, 2)
                return v[0]

            h = 1e-6
            for j in range(4):  # x1 x2 u1 u2 tangents only
                zp, zm = z.copy(), z.copy()
                zp[j] += h
                zm[j] -= h
                fd = (value_at(zp) - value_at(zm)) / (2 * h)
                scale = max(1.0, abs(grad[0, j]))
                assert abs(grad[0, j] - fd) <= 1e-6 * scale


def test_domain_tracking_sqrt_and_division():
    val, _, ok = ev("sqrt(x1)", [[-1.0, 0.0], [4.0, 0.0]])
    assert not ok[0] and ok[1]
    assert val[1] == 2.0
    _, _, ok = ev("1/x1", [[0.0, 0.0], [2.0, 0.0]])
    assert not ok[0] and ok[1]
    _, _, ok = ev("x1^(-2)", [[0.0, 0.0], [2.0, 0.0]])
    assert not ok[0] and ok[1]
    # overflow is flagged, not silently propagated
    _, _, ok = ev("exp(x1)", [[1000.0, 0.0]])
    assert not ok[0]


def test_sqrt_derivative_at_zero_is_flagged():
    _, _, ok = ev("sqrt(x1)", [[0.0, 0.0]], grad=True)
    assert not ok[0]  # value exists but the tangent is unbounded


def test_complex_mode_for_oracles():
    e = parse_expression("sin(x1) * exp(x2/3)", DIMS)
    h = 1e-200
    z = np.array([0.4 + 1j * h, -0.2, 0.0, 0.0, 0.0], dtype=complex)
    val, _, _ = eval_expr(e, z[None, :2], z[None, 2:4], z[None, 4:], 2, 2,
                          dtype=np.complex128, track=False)
    ref = math.cos(0.4) * math.exp(-0.2 / 3)
    assert val[0].imag / h == pytest.approx(ref, rel=1e-15)


def test_free_vars():
    e = parse_expression("x1*u2 + d1 - sin(x2)", DIMS)
    assert free_vars(e) == {("x", 0), ("u", 1), ("d", 0), ("x", 1)}


@pytest.mark.parametrize("text,expected", [
    ("3.5", 0),
    ("x1 + 2*u1 + d1", 1),
    ("x1 + sin(d1)", 1),          # nonlinear in d only: still affine in (x, u)
    ("x1*x2", 2),
    ("x1^3", 3),
    ("sin(x1)", math.inf),
    ("x1/u1", math.inf),
    ("x1/(d1 + 2)", 1),
    ("(x1 + u1)^2", 2),
    ("x1^0", 0),
])
def test_degree_xu(text, expected):
    assert degree_xu(parse_expression(text, DIMS)) == expected
