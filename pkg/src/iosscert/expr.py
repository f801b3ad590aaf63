"""Expression trees for system models.

The language is deliberately small: real constants, indexed variables
(``x1..xn``, ``u1..uq``, ``d1..dm``), unary functions ``sin``, ``cos``,
``exp``, ``tanh``, ``sqrt`` plus negation, and the binary operators
``+ - * /`` together with ``^`` restricted to a literal integer exponent.
Every primitive is continuously differentiable on its domain, which is what
the linearization machinery downstream requires.

Trees evaluate over batches of points in a single walk.  Values are arrays
of shape (N,); when derivatives are requested each node also propagates a
tangent array of shape (N, n+q) carrying exact forward-mode partials with
respect to the state and input coordinates (``d`` variables are treated as
constants by the Jacobians).  Points where a partial primitive is invalid
(sqrt of a negative number, division by zero, a non-finite intermediate)
are recorded in a validity mask instead of leaking NaN into results.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

UNARY_FUNCTIONS = ("neg", "sin", "cos", "exp", "tanh", "sqrt")
VAR_KINDS = ("x", "u", "d")


class ExprError(ValueError):
    """Malformed expression text or an out-of-range variable reference."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class DomainError(ArithmeticError):
    """Evaluation hit a point outside a primitive's domain."""

    def __init__(self, message, label=None):
        super().__init__(f"{label}: {message}" if label else message)
        self.label = label


class _Ctx:
    __slots__ = ("X", "U", "D", "n", "q", "grad", "ok", "dtype")

    def __init__(self, X, U, D, n, q, grad, track, dtype):
        self.X = X
        self.U = U
        self.D = D
        self.n = n
        self.q = q
        self.grad = grad
        self.ok = np.ones(X.shape[0], dtype=bool) if track else None
        self.dtype = dtype


class Expr:
    """Base node. Concrete nodes: Const, Var, Unary, Binary, Pow."""

    __slots__ = ()

    def _eval(self, ctx):
        raise NotImplementedError

    def children(self):
        return ()


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    def _eval(self, ctx):
        val = np.full(ctx.X.shape[0], self.value, dtype=ctx.dtype)
        grad = np.zeros((ctx.X.shape[0], ctx.n + ctx.q), dtype=ctx.dtype) if ctx.grad else None
        return val, grad

    def __repr__(self):
        return f"Const({self.value!r})"


class Var(Expr):
    """Reference to x_i, u_i or d_i; ``index`` is zero-based."""

    __slots__ = ("kind", "index")

    def __init__(self, kind, index):
        if kind not in VAR_KINDS:
            raise ValueError(f"bad variable kind {kind!r}")
        self.kind = kind
        self.index = int(index)

    @property
    def name(self):
        return f"{self.kind}{self.index + 1}"

    def _eval(self, ctx):
        src = ctx.X if self.kind == "x" else ctx.U if self.kind == "u" else ctx.D
        val = src[:, self.index]
        grad = None
        if ctx.grad:
            grad = np.zeros((val.shape[0], ctx.n + ctx.q), dtype=ctx.dtype)
            if self.kind == "x":
                grad[:, self.index] = 1.0
            elif self.kind == "u":
                grad[:, ctx.n + self.index] = 1.0
        return val, grad

    def __repr__(self):
        return f"Var({self.name})"


class Unary(Expr):
    __slots__ = ("fn", "arg")

    def __init__(self, fn, arg):
        if fn not in UNARY_FUNCTIONS:
            raise ValueError(f"unknown function {fn!r}")
        self.fn = fn
        self.arg = arg

    def children(self):
        return (self.arg,)

    def _eval(self, ctx):
        v, g = self.arg._eval(ctx)
        fn = self.fn
        if fn == "neg":
            return -v, (-g if ctx.grad else None)
        if fn == "sin":
            val, dv = np.sin(v), (np.cos(v) if ctx.grad else None)
        elif fn == "cos":
            val, dv = np.cos(v), (-np.sin(v) if ctx.grad else None)
        elif fn == "exp":
            val = np.exp(v)
            dv = val if ctx.grad else None
        elif fn == "tanh":
            val = np.tanh(v)
            dv = 1.0 - val * val if ctx.grad else None
        else:  # sqrt
            if ctx.ok is not None:
                ctx.ok &= np.real(v) >= 0
            val = np.sqrt(np.where(np.real(v) >= 0, v, 0) if ctx.ok is not None else v)
            dv = 0.5 / val if ctx.grad else None
        grad = dv[:, None] * g if ctx.grad else None
        return val, grad

    def __repr__(self):
        return f"Unary({self.fn}, {self.arg!r})"


class Binary(Expr):
    __slots__ = ("op", "a", "b")

    def __init__(self, op, a, b):
        if op not in "+-*/":
            raise ValueError(f"unknown operator {op!r}")
        self.op = op
        self.a = a
        self.b = b

    def children(self):
        return (self.a, self.b)

    def _eval(self, ctx):
        va, ga = self.a._eval(ctx)
        vb, gb = self.b._eval(ctx)
        op = self.op
        if op == "+":
            return va + vb, (ga + gb if ctx.grad else None)
        if op == "-":
            return va - vb, (ga - gb if ctx.grad else None)
        if op == "*":
            grad = ga * vb[:, None] + gb * va[:, None] if ctx.grad else None
            return va * vb, grad
        # division: a zero divisor is a domain error, not a NaN
        if ctx.ok is not None:
            ctx.ok &= vb != 0
        val = va / np.where(vb == 0, 1, vb) if ctx.ok is not None else va / vb
        grad = (ga - val[:, None] * gb) / vb[:, None] if ctx.grad else None
        return val, grad

    def __repr__(self):
        return f"Binary({self.op!r}, {self.a!r}, {self.b!r})"


class Pow(Expr):
    """Integer power. The exponent is a parse-time literal, not a subtree."""

    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        self.base = base
        self.exponent = int(exponent)

    def children(self):
        return (self.base,)

    def _eval(self, ctx):
        v, g = self.base._eval(ctx)
        k = self.exponent
        if k == 0:
            one = np.ones_like(v)
            return one, (np.zeros((v.shape[0], ctx.n + ctx.q), dtype=ctx.dtype) if ctx.grad else None)
        if k < 0 and ctx.ok is not None:
            ctx.ok &= v != 0
            v = np.where(v == 0, 1, v)
        val = v ** k
        grad = None
        if ctx.grad:
            grad = (k * v ** (k - 1))[:, None] * g
        return val, grad

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent})"


def eval_expr(expr, X, U, D, n, q, want_grad=False, dtype=np.float64, track=True):
    """Evaluate one tree over a batch of points.

    Parameters
    ----------
    X, U, D : arrays of shape (N, n), (N, q), (N, m).
    want_grad : also compute the (N, n+q) forward-mode tangent.
    dtype : np.float64, or np.complex128 for complex-step probing
        (domain tracking must be off in that case).
    track : maintain the validity mask; when False the caller takes
        responsibility for staying inside all primitive domains.

    Returns
    -------
    (val, grad, ok) with val (N,), grad (N, n+q) or None, ok (N,) bool or
    None when tracking is off.
    """
    X = np.asarray(X, dtype=dtype)
    U = np.asarray(U, dtype=dtype)
    D = np.asarray(D, dtype=dtype)
    ctx = _Ctx(X, U, D, n, q, want_grad, track, dtype)
    with np.errstate(all="ignore"):
        val, grad = expr._eval(ctx)
    val = np.asarray(val, dtype=dtype)
    ok = None
    if track:
        ok = ctx.ok
        ok &= np.isfinite(val)
        if want_grad:
            ok &= np.isfinite(grad).all(axis=1)
    return val, grad, ok


def eval_exprs(exprs, X, U, D, n, q, want_grad=False, dtype=np.float64, track=True):
    """Evaluate several trees over one batch; stacks values and tangents.

    Returns (vals (N, E), grads (N, E, n+q) or None, oks (E, N) or None).
    """
    X = np.asarray(X, dtype=dtype)
    U = np.asarray(U, dtype=dtype)
    D = np.asarray(D, dtype=dtype)
    N = X.shape[0]
    E = len(exprs)
    vals = np.empty((N, E), dtype=dtype)
    grads = np.empty((N, E, n + q), dtype=dtype) if want_grad else None
    oks = np.empty((E, N), dtype=bool) if track else None
    for j, e in enumerate(exprs):
        v, g, ok = eval_expr(e, X, U, D, n, q, want_grad=want_grad, dtype=dtype, track=track)
        vals[:, j] = v
        if want_grad:
            grads[:, j, :] = g
        if track:
            oks[j] = ok
    return vals, grads, oks


def free_vars(expr):
    """Set of (kind, zero-based index) variables referenced by the tree."""
    acc = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            acc.add((node.kind, node.index))
        stack.extend(node.children())
    return acc


def degree_xu(expr):
    """Polynomial degree of the tree in the (x, u) variables.

    ``d`` variables count as constants.  Returns math.inf for anything
    non-polynomial in (x, u); a result <= 1 means affine, which is the
    premise under which the quadratic-difference Lyapunov construction is
    exact rather than merely a sampled check.
    """
    if isinstance(expr, Const):
        return 0
    if isinstance(expr, Var):
        return 1 if expr.kind in ("x", "u") else 0
    if isinstance(expr, Unary):
        d = degree_xu(expr.arg)
        if expr.fn == "neg":
            return d
        return 0 if d == 0 else math.inf
    if isinstance(expr, Pow):
        d = degree_xu(expr.base)
        if d == 0:
            return 0
        return math.inf if expr.exponent < 0 else expr.exponent * d
    if isinstance(expr, Binary):
        da, db = degree_xu(expr.a), degree_xu(expr.b)
        if expr.op in "+-":
            return max(da, db)
        if expr.op == "*":
            return da + db
        return da if db == 0 else math.inf
    raise TypeError(f"not an expression node: {expr!r}")


# ----------------------------------------------------------------------
# Parsing


@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "ident" | "op" | "end"
    text: str
    line: int
    col: int


_NUM_RE = re.compile(r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_VAR_RE = re.compile(r"([xud])([1-9]\d*)$")


def _tokenize(text, line_no):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in " \t":
            i += 1
            continue
        if ch == "#":
            break
        col = i + 1
        m = _NUM_RE.match(text, i)
        if m:
            tokens.append(Token("num", m.group(), line_no, col))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(Token("ident", m.group(), line_no, col))
            i = m.end()
            continue
        if ch in "+-*/^()":
            tokens.append(Token("op", ch, line_no, col))
            i += 1
            continue
        raise ExprError(f"unexpected character {ch!r}", line_no, col)
    tokens.append(Token("end", "", line_no, len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, tokens, dims, line_no):
        self.tokens = tokens
        self.pos = 0
        self.n, self.q, self.m = dims
        self.line = line_no

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, text):
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ExprError(f"expected {text!r}, found {tok.text or 'end of line'!r}", tok.line, tok.col)
        return self.advance()

    def parse(self):
        e = self._sum()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprError(f"unexpected trailing token {tok.text!r}", tok.line, tok.col)
        return e

    def _sum(self):
        left = self._product()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            left = Binary(op, left, self._product())
        return left

    def _product(self):
        left = self._unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            left = Binary(op, left, self._unary())
        return left

    def _unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Unary("neg", self._unary())
        if tok.kind == "op" and tok.text == "+":
            self.advance()
            return self._unary()
        return self._power()

    def _power(self):
        base = self._atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            return Pow(base, self._exponent())
        return base

    def _exponent(self):
        # literal integer, optionally signed and/or parenthesized: 2, -3, (-2)
        parens = False
        tok = self.peek()
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            parens = True
        sign = 1
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            sign = -1
        tok = self.peek()
        if tok.kind != "num" or not tok.text.isdigit():
            raise ExprError(
                f"exponent must be a literal integer, found {tok.text or 'end of line'!r}",
                tok.line, tok.col,
            )
        self.advance()
        if parens:
            self.expect_op(")")
        return sign * int(tok.text)

    def _atom(self):
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name in UNARY_FUNCTIONS:
                self.expect_op("(")
                inner = self._sum()
                self.expect_op(")")
                return Unary(name, inner)
            m = _VAR_RE.fullmatch(name)
            if m:
                kind, idx1 = m.group(1), int(m.group(2))
                bound = {"x": self.n, "u": self.q, "d": self.m}[kind]
                if idx1 > bound:
                    dim_name = {"x": "n", "u": "q", "d": "m"}[kind]
                    raise ExprError(
                        f"undeclared variable {name}: model declares {dim_name}={bound}",
                        tok.line, tok.col,
                    )
                return Var(kind, idx1 - 1)
            raise ExprError(f"unknown identifier {name!r}", tok.line, tok.col)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner = self._sum()
            self.expect_op(")")
            return inner
        raise ExprError(
            f"expected a number, variable or '(', found {tok.text or 'end of line'!r}",
            tok.line, tok.col,
        )


def parse_expression(text, dims, line_no=1):
    """Parse one expression. ``dims`` is (n, q, m); raises ExprError with
    line/column on malformed input or out-of-range variables."""
    return _Parser(_tokenize(text, line_no), dims, line_no).parse()
