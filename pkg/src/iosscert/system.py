"""System models: the model-file format, pointwise linearization, and the
regularity constants used by the sampling-period transfer.

A model declares dimensions ``n q m p`` and gives n dynamics expressions
f1..fn and p output expressions h1..hp over variables x1..xn, u1..uq,
d1..dm.  Jacobians A = df/dx, B = df/du, C = dh/dx, D = dh/du come from
forward-mode AD and are exact for the primitive set (no finite
differences anywhere in the certified path).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .expr import DomainError, Expr, ExprError, eval_expr, eval_exprs, parse_expression
from .grid import grid_blocks, split_block


@dataclass(frozen=True)
class SystemSpec:
    """Parsed continuous-time model x' = f(x,u,d), y = h(x,u,d)."""

    name: str
    n: int
    q: int
    m: int
    p: int
    f: tuple[Expr, ...]
    h: tuple[Expr, ...]
    f_src: tuple[str, ...] = ()
    h_src: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.q < 0 or self.m < 0:
            raise ExprError(f"bad dimensions n={self.n} q={self.q} m={self.m} p={self.p}")
        if len(self.f) != self.n:
            raise ExprError(f"expected {self.n} dynamics expressions, got {len(self.f)}")
        if len(self.h) != self.p:
            raise ExprError(f"expected {self.p} output expressions, got {len(self.h)}")

    @property
    def dim(self):
        """Number of grid coordinates: n + q + m."""
        return self.n + self.q + self.m

    def axis_name(self, axis):
        if axis < self.n:
            return f"x{axis + 1}"
        if axis < self.n + self.q:
            return f"u{axis - self.n + 1}"
        return f"d{axis - self.n - self.q + 1}"


@dataclass
class PointEval:
    """Dynamics value and exact Jacobians at a single point."""

    x: np.ndarray
    u: np.ndarray
    d: np.ndarray
    f_val: np.ndarray
    A: np.ndarray  # n x n
    B: np.ndarray  # n x q
    C: np.ndarray  # p x n
    D: np.ndarray  # p x q


@dataclass
class LinBatch:
    """Batched dynamics/output values and Jacobians over N points."""

    f: np.ndarray  # (N, n)
    y: np.ndarray  # (N, p)
    A: np.ndarray  # (N, n, n)
    B: np.ndarray  # (N, n, q)
    C: np.ndarray  # (N, p, n)
    D: np.ndarray  # (N, p, q)
    ok: np.ndarray  # (N,) bool


_DIMS_RE = re.compile(r"dims\s+(\d+)\s+(\d+)\s+(\d+)\s+(\d+)\s*$")
_LHS_RE = re.compile(r"([fh])([1-9]\d*)\s*$")


def parse_model(text, name="model"):
    """Parse a model file.

    Format (UTF-8, '#' comments)::

        dims n q m p
        f1 = <expr>
        ...
        fn = <expr>
        h1 = <expr>
        ...
        hp = <expr>

    Raises ExprError with line/column for syntax errors, undeclared
    variables, and dimension mismatches (missing/duplicate definitions).
    """
    dims = None
    assignments = {}
    order = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if dims is None:
            m = _DIMS_RE.match(line)
            if not m:
                raise ExprError("first line must be 'dims n q m p'", line_no, 1)
            n, q, mdim, p = (int(g) for g in m.groups())
            if n < 1 or p < 1:
                raise ExprError(f"dims require n >= 1 and p >= 1, got n={n} p={p}", line_no, 1)
            dims = (n, q, mdim, p)
            continue
        if "=" not in line:
            raise ExprError(f"expected '<f|h><i> = <expr>', got {line.strip()!r}", line_no, 1)
        lhs, rhs = line.split("=", 1)
        m = _LHS_RE.match(lhs.strip())
        if not m:
            raise ExprError(f"left-hand side must be f<i> or h<j>, got {lhs.strip()!r}", line_no, 1)
        key = (m.group(1), int(m.group(2)))
        if key in assignments:
            raise ExprError(f"duplicate definition of {lhs.strip()}", line_no, 1)
        assignments[key] = (rhs.strip(), line_no)
        order.append(key)
    if dims is None:
        raise ExprError("model file is empty")
    n, q, mdim, p = dims
    for kind, count in (("f", n), ("h", p)):
        for i in range(1, count + 1):
            if (kind, i) not in assignments:
                raise ExprError(f"missing definition of {kind}{i} (dims declare {kind}-count {count})")
    for kind, i in order:
        bound = n if kind == "f" else p
        if i > bound:
            src, line_no = assignments[(kind, i)]
            raise ExprError(f"{kind}{i} exceeds declared count {bound}", line_no, 1)
    f_exprs, f_src, h_exprs, h_src = [], [], [], []
    for i in range(1, n + 1):
        src, line_no = assignments[("f", i)]
        f_exprs.append(parse_expression(src, (n, q, mdim), line_no))
        f_src.append(src)
    for j in range(1, p + 1):
        src, line_no = assignments[("h", j)]
        h_exprs.append(parse_expression(src, (n, q, mdim), line_no))
        h_src.append(src)
    return SystemSpec(
        name=name, n=n, q=q, m=mdim, p=p,
        f=tuple(f_exprs), h=tuple(h_exprs),
        f_src=tuple(f_src), h_src=tuple(h_src),
    )


def _as_batch(sys, x, u, d):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != sys.n:
        raise ValueError(f"state length {x.shape[1]} does not match n={sys.n}")

    def shape_input(vec, width, label):
        if not width:
            return np.zeros((x.shape[0], 0))
        arr = np.asarray(vec, dtype=float)
        if arr.size != x.shape[0] * width:
            raise ValueError(f"{label} length {arr.size} does not match {label}-dim {width}")
        return arr.reshape(x.shape[0], width)

    return x, shape_input(u, sys.q, "u"), shape_input(d, sys.m, "d")


def eval_f_batch(sys, X, U, D, dtype=np.float64, track=True):
    """Dynamics values over a batch: returns (f (N, n), ok (N,) or None)."""
    vals, _, oks = eval_exprs(sys.f, X, U, D, sys.n, sys.q, want_grad=False, dtype=dtype, track=track)
    return vals, (oks.all(axis=0) if track else None)


def eval_h_batch(sys, X, U, D, dtype=np.float64, track=True):
    vals, _, oks = eval_exprs(sys.h, X, U, D, sys.n, sys.q, want_grad=False, dtype=dtype, track=track)
    return vals, (oks.all(axis=0) if track else None)


def linearize_batch(sys, X, U, D):
    """Values and exact Jacobians of f and h over a batch of points."""
    n, q = sys.n, sys.q
    fv, fg, f_oks = eval_exprs(sys.f, X, U, D, n, q, want_grad=True)
    hv, hg, h_oks = eval_exprs(sys.h, X, U, D, n, q, want_grad=True)
    ok = f_oks.all(axis=0) & h_oks.all(axis=0)
    return LinBatch(
        f=fv, y=hv,
        A=fg[:, :, :n], B=fg[:, :, n:],
        C=hg[:, :, :n], D=hg[:, :, n:],
        ok=ok,
    )


def first_invalid_expression(sys, X, U, D):
    """Label of the first expression that is invalid somewhere in the batch,
    or None when everything evaluates cleanly."""
    for kind, exprs, srcs in (("f", sys.f, sys.f_src), ("h", sys.h, sys.h_src)):
        for j, e in enumerate(exprs):
            _, _, ok = eval_expr(e, X, U, D, sys.n, sys.q, want_grad=True)
            if not ok.all():
                src = srcs[j] if j < len(srcs) else ""
                return f"{kind}{j + 1}" + (f" = {src}" if src else "")
    return None


def eval_point(sys, x, u=(), d=()):
    """Evaluate dynamics, output and all four Jacobians at one point.

    Raises DomainError naming the offending expression when the point is
    outside a primitive's domain (negative sqrt argument, zero divisor).
    """
    X, U, D = _as_batch(sys, x, u, d)
    if X.shape[0] != 1:
        raise ValueError("eval_point takes a single point")
    lin = linearize_batch(sys, X, U, D)
    if not lin.ok[0]:
        label = first_invalid_expression(sys, X, U, D)
        raise DomainError("invalid evaluation at this point", label)
    return PointEval(
        x=X[0], u=U[0], d=D[0],
        f_val=lin.f[0],
        A=lin.A[0], B=lin.B[0], C=lin.C[0], D=lin.D[0],
    )


# ----------------------------------------------------------------------
# Regularity constants over a grid / box


def _specnorm_sq_batch(M):
    """Squared spectral norms of a (N, r, c) stack: the top eigenvalue of
    the Gram matrix formed on the smaller side."""
    if M.shape[1] == 0 or M.shape[2] == 0:
        return np.zeros(M.shape[0])
    if M.shape[1] <= M.shape[2]:
        G = M @ M.transpose(0, 2, 1)
    else:
        G = M.transpose(0, 2, 1) @ M
    w = np.linalg.eigvalsh(G)[:, -1]
    return np.maximum(w, 0.0)


def _specnorm_batch(M):
    return np.sqrt(_specnorm_sq_batch(M))


def _raise_domain(sys, Z, ok, context):
    bad = int(np.argmax(~ok))
    raise DomainError(f"{context}: grid point {Z[bad].tolist()} is outside the model's domain")


def estimate_Lf(sys, grid, chunk=65536):
    """Max over the grid of ||[A B]||_2, the gridded Lipschitz bound on f."""
    return estimate_Lf_detail(sys, grid, chunk=chunk)[0]


def estimate_Lf_detail(sys, grid, chunk=65536):
    """(L_f, argmax point, L_f^2).

    The square is the Gram eigenvalue the sweep actually maximizes;
    downstream formulas that need L_f^2 should consume it directly rather
    than re-squaring the rounded square root.
    """
    if grid.dim != sys.dim:
        raise ValueError(f"grid has {grid.dim} axes, system needs {sys.dim}")
    best_sq = -np.inf
    best_point = None
    for start, Z in grid_blocks(grid, chunk):
        X, U, D = split_block(Z, sys)
        lin = linearize_batch(sys, X, U, D)
        if not lin.ok.all():
            _raise_domain(sys, Z, lin.ok, "estimate_Lf")
        norms_sq = _specnorm_sq_batch(np.concatenate([lin.A, lin.B], axis=2))
        i = int(np.argmax(norms_sq))
        if norms_sq[i] > best_sq:
            best_sq = float(norms_sq[i])
            best_point = Z[i].copy()
    return float(np.sqrt(best_sq)), best_point, best_sq


def estimate_cf(sys, grid, chunk=65536):
    """Max over the grid of ||f||_2."""
    return estimate_cf_detail(sys, grid, chunk=chunk)[0]


def estimate_cf_detail(sys, grid, chunk=65536):
    if grid.dim != sys.dim:
        raise ValueError(f"grid has {grid.dim} axes, system needs {sys.dim}")
    best = -np.inf
    best_point = None
    for start, Z in grid_blocks(grid, chunk):
        X, U, D = split_block(Z, sys)
        fv, ok = eval_f_batch(sys, X, U, D)
        if not ok.all():
            _raise_domain(sys, Z, ok, "estimate_cf")
        norms = np.sqrt((fv * fv).sum(axis=1))
        i = int(np.argmax(norms))
        if norms[i] > best:
            best = float(norms[i])
            best_point = Z[i].copy()
    return best, best_point


DEFAULT_LDF_PAIRS = 4096
LDF_SAFETY = 1.1


def estimate_Ldf(sys, grid, n_pairs=DEFAULT_LDF_PAIRS, seed=0, safety=LDF_SAFETY):
    """Sampled Lipschitz constant of the concatenated Jacobian [A B].

    Draws seeded point pairs uniformly from the grid box and returns the
    largest difference quotient ||[A B](z) - [A B](z~)||_2 / ||z - z~||_2
    times a safety factor.  This is an estimate, not a certified bound;
    callers that know an analytic value should pass it through instead
    (overrides take precedence throughout the pipeline).  Pairs closer
    than 1e-12 are resampled, never divided by.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if grid.dim != sys.dim:
        raise ValueError(f"grid has {grid.dim} axes, system needs {sys.dim}")
    rng = np.random.default_rng(seed)
    lows, highs = grid.lows, grid.highs
    span = highs - lows

    def draw(k):
        return lows + span * rng.random((k, grid.dim))

    Z1 = draw(n_pairs)
    Z2 = draw(n_pairs)
    dist = np.linalg.norm(Z1 - Z2, axis=1)
    for _ in range(100):
        bad = dist < 1e-12
        if not bad.any():
            break
        k = int(bad.sum())
        Z1[bad] = draw(k)
        Z2[bad] = draw(k)
        dist = np.linalg.norm(Z1 - Z2, axis=1)
    else:
        # a degenerate box (all axes width zero) cannot produce distinct pairs
        return 0.0

    def jac_concat(Z):
        X, U, D = split_block(Z, sys)
        lin = linearize_batch(sys, X, U, D)
        if not lin.ok.all():
            _raise_domain(sys, Z, lin.ok, "estimate_Ldf")
        return np.concatenate([lin.A, lin.B], axis=2)

    diff = jac_concat(Z1) - jac_concat(Z2)
    ratios = _specnorm_batch(diff) / dist
    return float(safety * ratios.max())
