"""Assembly and gridded verification of the detectability LMIs.

Continuous time, at a point with Jacobians (A, B, C, D) and certificate
(P, Q, R, kappa):

    [ PA + A'P + kappa*P - C'RC     PB - C'RD  ]
    [ B'P - D'RC                   -D'RD - Q   ]  <= 0

Discrete time, with step Jacobians (A~, B~) and certificate
(P, Qt, Rt, eta):

    [ A~'P A~ - eta*P - C'Rt C      A~'P B~ - C'Rt D   ]
    [ B~'P A~ - D'Rt C              B~'P B~ - Qt - D'Rt D ]  <= 0

The (1,1) continuous block is assembled as S + S' with S = P A computed
once, and every assembled matrix mirrors its lower triangle, so results
are exactly symmetric no matter the rounding of individual products.
Verification grids the compact box and tests negative semidefiniteness
point by point with a relative tolerance; per-point domain errors are
tallied (the report is then marked incomplete) instead of aborting.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .grid import run_blocks, split_block
from .schemes import Scheme, as_scheme, scheme_jacobians_batch
from .symmetric import DEFAULT_NSD_TOL, SymMatrix, mirror_lower
from .system import linearize_batch


def ct_lmi_blocks(A, B, C, D, P, Q, R, kappa):
    """Continuous-time LMI matrices for a (N, ...) batch of linearizations.

    P, Q, R are plain (k, k) arrays; returns (N, n+q, n+q) with exact
    structural symmetry.
    """
    N, n, q = A.shape[0], A.shape[1], B.shape[2]
    S = np.einsum("ij,njk->nik", P, A)
    RC = np.einsum("ij,njk->nik", R, C)
    CtRC = np.einsum("nji,njk->nik", C, RC)
    block11 = S + S.transpose(0, 2, 1) + kappa * P[None, :, :] - CtRC
    M = np.empty((N, n + q, n + q))
    M[:, :n, :n] = block11
    if q:
        PB = np.einsum("ij,njk->nik", P, B)
        RD = np.einsum("ij,njk->nik", R, D)
        CtRD = np.einsum("nji,njk->nik", C, RD)
        DtRD = np.einsum("nji,njk->nik", D, RD)
        block12 = PB - CtRD
        M[:, :n, n:] = block12
        M[:, n:, :n] = block12.transpose(0, 2, 1)
        M[:, n:, n:] = -DtRD - Q[None, :, :]
    return mirror_lower(M)


def dt_lmi_blocks(At, Bt, C, D, P, Qt, Rt, eta):
    """Discrete-time LMI matrices for a batch; same conventions as above."""
    N, n, q = At.shape[0], At.shape[1], Bt.shape[2]
    G = np.concatenate([At, Bt], axis=2)  # (N, n, n+q)
    PG = np.einsum("ij,njk->nik", P, G)
    M = np.einsum("nji,njk->nik", G, PG)  # G' P G
    M[:, :n, :n] -= eta * P[None, :, :]
    if q:
        M[:, n:, n:] -= Qt[None, :, :]
    RtC = np.einsum("ij,njk->nik", Rt, C)
    CtRtC = np.einsum("nji,njk->nik", C, RtC)
    M[:, :n, :n] -= CtRtC
    if q:
        RtD = np.einsum("ij,njk->nik", Rt, D)
        CtRtD = np.einsum("nji,njk->nik", C, RtD)
        DtRtD = np.einsum("nji,njk->nik", D, RtD)
        M[:, :n, n:] -= CtRtD
        M[:, n:, :n] -= CtRtD.transpose(0, 2, 1)
        M[:, n:, n:] -= DtRtD
    return mirror_lower(M)


def assemble_ct_lmi(pe, cert):
    """Continuous-time LMI matrix at one evaluated point, as a SymMatrix."""
    n, q, p = pe.A.shape[0], pe.B.shape[1], pe.C.shape[0]
    if cert.n != n or cert.q != q or cert.p != p:
        raise ValueError(
            f"certificate dims (n={cert.n}, q={cert.q}, p={cert.p}) do not match "
            f"point dims (n={n}, q={q}, p={p})"
        )
    M = ct_lmi_blocks(
        pe.A[None], pe.B[None], pe.C[None], pe.D[None],
        cert.P.data, cert.Q.data, cert.R.data, cert.kappa,
    )[0]
    return SymMatrix(M)


def assemble_dt_lmi(At, Bt, pe, dc):
    """Discrete-time LMI matrix at one point from given step Jacobians."""
    At = np.asarray(At, dtype=float).reshape(pe.A.shape)
    Bt = np.asarray(Bt, dtype=float).reshape(pe.B.shape)
    n = pe.A.shape[0]
    if dc.P.dim != n:
        raise ValueError(f"certificate P is {dc.P.dim}x{dc.P.dim}, state dim is {n}")
    M = dt_lmi_blocks(
        At[None], Bt[None], pe.C[None], pe.D[None],
        dc.P.data, dc.Qt.data, dc.Rt.data, dc.eta,
    )[0]
    return SymMatrix(M)


@dataclass
class CheckReport:
    """Aggregated pointwise verdicts of a gridded LMI (or inequality) check."""

    total_points: int
    violations: int
    domain_errors: int
    worst_lambda_max: float | None
    argmax_point: list | None
    lambda_max_min: float | None
    lambda_max_median: float | None
    tolerance: float
    wall_time_s: float
    complete: bool
    warnings: list = field(default_factory=list)

    @property
    def certified(self):
        return self.complete and self.violations == 0

    def to_dict(self):
        return {
            "total_points": self.total_points,
            "violations": self.violations,
            "domain_errors": self.domain_errors,
            "worst_lambda_max": self.worst_lambda_max,
            "argmax_point": self.argmax_point,
            "lambda_max_min": self.lambda_max_min,
            "lambda_max_median": self.lambda_max_median,
            "tolerance": self.tolerance,
            "wall_time_s": self.wall_time_s,
            "complete": self.complete,
            "warnings": list(self.warnings),
        }


def _sweep_lambda(grid, worker, tol, chunk, threads, warnings=None):
    """Shared reducer: worker(start, Z) -> (start, lam, ok) per block.

    lam holds lambda_max per point (garbage where ~ok).  Verdicts use the
    relative tolerance tol * max(1, ||M||_2) per point, matching is_nsd.
    Merging is in block order with strict-greater updates, so the argmax
    tie-break is the lowest grid index under any thread count.
    """
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    t0 = time.perf_counter()
    total = grid.total_points
    violations = 0
    dom = 0
    worst = -np.inf
    worst_idx = None
    lam_chunks = []
    for start, lam, norm2, ok in run_blocks(grid, worker, chunk=chunk, threads=threads):
        dom += int((~ok).sum())
        if not ok.any():
            continue
        good = np.nonzero(ok)[0]
        vals = lam[good]
        thresh = tol * np.maximum(1.0, norm2[good])
        violations += int((vals > thresh).sum())
        lam_chunks.append(vals)
        i = int(np.argmax(vals))
        if vals[i] > worst:
            worst = float(vals[i])
            worst_idx = start + int(good[i])
    wall = time.perf_counter() - t0
    if lam_chunks:
        all_lam = np.concatenate(lam_chunks)
        lam_min = float(all_lam.min())
        lam_med = float(np.median(all_lam))
    else:
        lam_min = lam_med = None
    return CheckReport(
        total_points=total,
        violations=violations,
        domain_errors=dom,
        worst_lambda_max=None if worst_idx is None else worst,
        argmax_point=None if worst_idx is None else grid.point(worst_idx).tolist(),
        lambda_max_min=lam_min,
        lambda_max_median=lam_med,
        tolerance=tol,
        wall_time_s=wall,
        complete=(dom == 0),
        warnings=list(warnings or []),
    )


def check_ct_grid(sys, grid, cert, tol=DEFAULT_NSD_TOL, chunk=65536, threads=1):
    """Verify the continuous-time LMI at every grid point.

    Zero violations with a complete sweep certifies the LMI on the grid
    (and only on the grid: the report is a sampled statement, inter-point
    behavior is the caller's responsibility via grid spacing and L_f).
    """
    if grid.dim != sys.dim:
        raise ValueError(f"grid has {grid.dim} axes, system needs {sys.dim}")
    if cert.n != sys.n or cert.q != sys.q or cert.p != sys.p:
        raise ValueError("certificate dimensions do not match the system")
    P, Q, R, kappa = cert.P.data, cert.Q.data, cert.R.data, cert.kappa

    def worker(start, Z):
        X, U, D = split_block(Z, sys)
        lin = linearize_batch(sys, X, U, D)
        lam = np.full(Z.shape[0], -np.inf)
        norm2 = np.zeros(Z.shape[0])
        if lin.ok.any():
            good = np.nonzero(lin.ok)[0]
            M = ct_lmi_blocks(lin.A[good], lin.B[good], lin.C[good], lin.D[good], P, Q, R, kappa)
            w = np.linalg.eigvalsh(M)
            lam[good] = w[:, -1]
            norm2[good] = np.maximum(np.abs(w[:, 0]), np.abs(w[:, -1]))
        return start, lam, norm2, lin.ok

    return _sweep_lambda(grid, worker, tol, chunk, threads)


def check_dt_grid(sys, scheme, grid, dc, tol=DEFAULT_NSD_TOL, chunk=65536, threads=1):
    """Verify the discrete-time LMI for one sampling period at every grid
    point, using the scheme's exact step Jacobians.

    A certificate whose tau is not strictly below its tau1 is still
    checked, but the report carries an out-of-certificate warning.
    """
    if grid.dim != sys.dim:
        raise ValueError(f"grid has {grid.dim} axes, system needs {sys.dim}")
    scheme = as_scheme(scheme)
    warnings = []
    if not (dc.tau > 0):
        raise ValueError(f"dc.tau must be positive, got {dc.tau}")
    if dc.tau >= dc.tau1:
        warnings.append(
            f"out-of-certificate: tau = {dc.tau} is not below tau1 = {dc.tau1}; "
            "the transferred guarantee does not cover this sampling period"
        )
    P, Qt, Rt, eta = dc.P.data, dc.Qt.data, dc.Rt.data, dc.eta

    def worker(start, Z):
        X, U, D = split_block(Z, sys)
        lin, At, Bt, ok = scheme_jacobians_batch(sys, scheme, X, U, D, dc.tau)
        lam = np.full(Z.shape[0], -np.inf)
        norm2 = np.zeros(Z.shape[0])
        if ok.any():
            good = np.nonzero(ok)[0]
            M = dt_lmi_blocks(At[good], Bt[good], lin.C[good], lin.D[good], P, Qt, Rt, eta)
            w = np.linalg.eigvalsh(M)
            lam[good] = w[:, -1]
            norm2[good] = np.maximum(np.abs(w[:, 0]), np.abs(w[:, -1]))
        return start, lam, norm2, ok

    return _sweep_lambda(grid, worker, tol, chunk, threads, warnings=warnings)
