"""Dense symmetric matrices and the semidefiniteness tests built on them.

Instances here are tiny (n+q rarely above 10), so everything is dense and
backed by numpy's symmetric eigensolver.  Symmetry is structural: a
SymMatrix stores a full square array whose upper triangle is a mirror of
the lower one, bit for bit, so ``M == M.T`` holds exactly no matter how
the entries were produced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_NSD_TOL = 1e-9
DEFAULT_PSD_TOL = 1e-12


def mirror_lower(M):
    """Reflect the lower triangle onto the upper one; works on (..., k, k)."""
    M = np.asarray(M, dtype=float)
    low = np.tril(M)
    strict = np.tril(M, -1)
    return low + np.swapaxes(strict, -1, -2)


@dataclass(frozen=True)
class SymMatrix:
    """Structurally symmetric square matrix with finite entries."""

    data: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.data, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {M.shape}")
        if M.size and not np.isfinite(M).all():
            raise ValueError("symmetric matrix entries must be finite")
        M = mirror_lower(M)
        M.setflags(write=False)
        object.__setattr__(self, "data", M)

    @classmethod
    def from_lower(cls, M):
        return cls(M)

    @classmethod
    def from_full(cls, M, rtol=1e-8):
        """Construct from a nominally symmetric array, rejecting anything
        whose asymmetry exceeds rounding scale."""
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {M.shape}")
        if M.size:
            scale = max(1.0, float(np.abs(M).max()))
            if np.abs(M - M.T).max() > rtol * scale:
                raise ValueError("matrix is not symmetric")
        return cls(M)

    @classmethod
    def identity(cls, k):
        return cls(np.eye(k))

    @classmethod
    def diagonal(cls, values):
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def zeros(cls, k):
        return cls(np.zeros((k, k)))

    @property
    def dim(self):
        return self.data.shape[0]

    def to_lists(self):
        return self.data.tolist()

    def __array__(self, dtype=None):
        return np.asarray(self.data, dtype=dtype)


def _as_matrix(M):
    return M.data if isinstance(M, SymMatrix) else np.asarray(M, dtype=float)


def eig_extents(M):
    """(lambda_min, lambda_max) of a symmetric matrix.

    The empty 0x0 matrix returns (inf, -inf) so that vacuous positivity
    checks pass naturally.
    """
    A = _as_matrix(M)
    if A.size == 0:
        return float("inf"), float("-inf")
    if not np.isfinite(A).all():
        raise ValueError("eig_extents requires finite entries")
    w = np.linalg.eigvalsh(A)
    return float(w[0]), float(w[-1])


@dataclass(frozen=True)
class NsdVerdict:
    holds: bool
    lambda_max: float
    threshold: float

    def __bool__(self):
        return self.holds


def is_nsd(M, tol=DEFAULT_NSD_TOL):
    """Negative-semidefiniteness test with a relative tolerance.

    Holds iff lambda_max(M) <= tol * max(1, ||M||_2).  The relative scaling
    keeps verdicts stable when a certificate is rescaled; the returned
    verdict carries the violating lambda_max either way.
    """
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    A = _as_matrix(M)
    if A.size == 0:
        return NsdVerdict(True, float("-inf"), tol)
    if not np.isfinite(A).all():
        raise ValueError("is_nsd requires finite entries")
    w = np.linalg.eigvalsh(A)
    lam_max = float(w[-1])
    norm2 = max(abs(float(w[0])), abs(lam_max))
    threshold = tol * max(1.0, norm2)
    return NsdVerdict(lam_max <= threshold, lam_max, threshold)


def weighted_norm_sq(v, P):
    """v' P v, the squared P-weighted norm (P assumed PSD)."""
    v = np.asarray(v, dtype=float)
    A = _as_matrix(P)
    if v.ndim != 1 or A.shape[0] != v.shape[0]:
        raise ValueError(f"dimension mismatch: vector {v.shape} vs matrix {A.shape}")
    return float(v @ A @ v)


def lambda_max_batch(Ms):
    """lambda_max of each matrix in a (N, k, k) stack (also full spectra)."""
    w = np.linalg.eigvalsh(Ms)
    return w[:, -1], w


def spectral_norm(M):
    """Induced 2-norm of a general rectangular matrix."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])
