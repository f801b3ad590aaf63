import numpy as np
import pytest

from iosscert import Certificate, SymMatrix, box_grid, builtin_model, parse_model

# Additional hand-certifiable systems used by the pipeline property tests.
# cubic: A(x) = -1 - 3x^2 <= -1 on the box, so (P,Q,R,kappa) = (1,1,1,1)
# works: the LMI matrix is [[2A + 1 - 1, 1], [1, -1]] with det = -2A-1 >= 1.
CUBIC_TEXT = """\
dims 1 1 0 1
f1 = -x1 - x1^3 + u1
h1 = x1
"""

# lin2d: constant A = diag(-1,-2), B = [1;1], C = [1 1]; certificate checked
# in tests via the grid verifier before any transfer uses it.
LIN2D_TEXT = """\
dims 2 1 0 1
f1 = -x1 + u1
f2 = -2*x2 + u1
h1 = x1 + x2
"""


@pytest.fixture(scope="session")
def reactor():
    return builtin_model("reactor")


@pytest.fixture(scope="session")
def scalar_linear():
    return builtin_model("scalar_linear")


@pytest.fixture(scope="session")
def sine():
    return builtin_model("sine")


@pytest.fixture(scope="session")
def zero():
    return builtin_model("zero")


@pytest.fixture(scope="session")
def cubic():
    return parse_model(CUBIC_TEXT, name="cubic")


@pytest.fixture(scope="session")
def lin2d():
    return parse_model(LIN2D_TEXT, name="lin2d")


@pytest.fixture(scope="session")
def unit_cert():
    return Certificate(P=SymMatrix([[1.0]]), Q=SymMatrix([[1.0]]),
                       R=SymMatrix([[1.0]]), kappa=1.0)


@pytest.fixture(scope="session")
def lin2d_cert():
    return Certificate(P=SymMatrix(np.eye(2)), Q=SymMatrix([[2.0]]),
                       R=SymMatrix([[1.0]]), kappa=1.0)


@pytest.fixture(scope="session")
def reactor_cert():
    return Certificate(P=SymMatrix(np.eye(2)), Q=SymMatrix(30.0 * np.eye(3)),
                       R=SymMatrix([[0.2]]), kappa=0.01)


@pytest.fixture(scope="session")
def square_grid():
    return box_grid([(-1, 1), (-1, 1)], 11)


# ----------------------------------------------------------------------
# Independent oracles (kept free of the code paths they check)


def fd_jacobian(fn, z, h=1e-6):
    """Central finite differences of a vector map, column by column."""
    z = np.asarray(z, dtype=float)
    cols = []
    for j in range(z.shape[0]):
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        cols.append((np.asarray(fn(zp)) - np.asarray(fn(zm))) / (2 * h))
    return np.stack(cols, axis=1)


def eig2_oracle(M):
    """Eigenvalues of a symmetric 2x2 from the characteristic polynomial."""
    a, b, c = M[0, 0], M[0, 1], M[1, 1]
    mid = 0.5 * (a + c)
    disc = np.sqrt(max(0.25 * (a - c) ** 2 + b * b, 0.0))
    return mid - disc, mid + disc


def eig3_oracle(M):
    """Eigenvalues of a symmetric 3x3 via np.roots of the characteristic
    polynomial (companion-matrix eigensolve, not eigvalsh)."""
    tr = np.trace(M)
    m2 = (
        M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        + M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
        + M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1]
    )
    det = np.linalg.det(M)
    roots = np.roots([1.0, -tr, m2, -det])
    return np.sort(roots.real)


def random_points_in(bounds, count, seed):
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return lo + (hi - lo) * rng.random((count, len(bounds)))
