"""Search for a continuous-time certificate making the gridded LMI feasible.

The per-point LMI matrix is affine in (P, Q, R) for fixed kappa, so
phi(P, Q, R) = max over grid points of lambda_max(LMI matrix) is convex.
We minimize it by projected subgradient descent over the cone

    { P >= eps*I with trace(P) = n,  Q >= eps*I,  R >= eps*I },

trying kappa candidates on a descending log grid (larger kappa tightens
the LMI, so the first feasible kappa found is the largest feasible one).
The subgradient at the worst grid point with top eigenvector v = [v1; v2]
maps through the affine dependence:

    dP = v1 g' + g v1' + kappa v1 v1'   with  g = A v1 + B v2
    dQ = -v2 v2'
    dR = -w w'                           with  w = C v1 + D v2

Steps use the Polyak rule against a slightly-infeasible target, which
needs no tuning on these small instances.  None of this is a soundness
claim: whatever the optimizer produces is re-verified by check_ct_grid
before being returned, and an infeasible outcome is explicitly NOT a
proof of undetectability (gridding and local search are both incomplete).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .certificates import Certificate, CertificateError
from .grid import split_block
from .lmi import check_ct_grid, ct_lmi_blocks
from .symmetric import DEFAULT_NSD_TOL, SymMatrix
from .system import linearize_batch


@dataclass(frozen=True)
class SynthOptions:
    kappa_values: tuple = ()      # explicit candidates; empty = log grid below
    kappa_min: float = 1e-3
    kappa_max: float = 10.0
    kappa_count: int = 16
    max_iters: int = 400
    margin: float = 1e-6          # accept when phi <= -margin
    eps_floor: float = 1e-6       # strictness floor for P, Q, R
    step_scale: float = 1.0       # multiplier on the Polyak step
    diagonal_supplies: bool = True
    tol: float = DEFAULT_NSD_TOL  # verification tolerance for the gate
    seed: int = 0                 # kept for interface stability; the search is deterministic

    def __post_init__(self):
        if not self.margin > 0:
            raise ValueError("margin must be positive")
        if not self.eps_floor > 0:
            raise ValueError("eps_floor must be positive")
        if not self.step_scale > 0:
            raise ValueError("step_scale must be positive")

    def kappas(self):
        if self.kappa_values:
            return sorted((float(k) for k in self.kappa_values), reverse=True)
        ks = np.geomspace(self.kappa_min, self.kappa_max, self.kappa_count)
        return list(ks[::-1])


@dataclass
class SynthAttempt:
    kappa: float
    iterations: int
    best_phi: float
    accepted: bool
    gate_rejected: bool = False


@dataclass
class SynthResult:
    feasible: bool
    certificate: Certificate | None
    report: object | None           # CheckReport of the verification gate
    log: list[SynthAttempt] = field(default_factory=list)
    message: str = ""
    wall_time_s: float = 0.0

    def to_dict(self):
        from .certificates import certificate_to_dict

        return {
            "feasible": self.feasible,
            "certificate": certificate_to_dict(self.certificate) if self.certificate else None,
            "verification": self.report.to_dict() if self.report is not None else None,
            "synth_log": [
                {
                    "kappa": a.kappa,
                    "iterations": a.iterations,
                    "best_phi": a.best_phi,
                    "accepted": a.accepted,
                    "gate_rejected": a.gate_rejected,
                }
                for a in self.log
            ],
            "message": self.message,
            "wall_time_s": self.wall_time_s,
        }


def _cache_linearizations(sys, grid, chunk=65536):
    """The LMI data (A, B, C, D) is iteration-independent; evaluate once."""
    from .grid import grid_blocks

    As, Bs, Cs, Ds = [], [], [], []
    for _, Z in grid_blocks(grid, chunk):
        X, U, D = split_block(Z, sys)
        lin = linearize_batch(sys, X, U, D)
        if not lin.ok.all():
            bad = int(np.argmax(~lin.ok))
            raise CertificateError(
                f"synthesis grid point {Z[bad].tolist()} is outside the model's domain"
            )
        As.append(lin.A)
        Bs.append(lin.B)
        Cs.append(lin.C)
        Ds.append(lin.D)
    return (np.concatenate(As), np.concatenate(Bs), np.concatenate(Cs), np.concatenate(Ds))


def _phi_and_worst(A, B, C, D, P, Q, R, kappa):
    M = ct_lmi_blocks(A, B, C, D, P, Q, R, kappa)
    w, V = np.linalg.eigh(M)
    lam = w[:, -1]
    i = int(np.argmax(lam))
    return float(lam[i]), i, V[i][:, -1]


def _project(P, Q, R, n, eps, diagonal):
    # eigenvalue clipping to the eps floor, then trace renormalization of P
    wP, VP = np.linalg.eigh((P + P.T) / 2.0)
    P = (VP * np.maximum(wP, eps)) @ VP.T
    P = P * (n / np.trace(P))
    P = (P + P.T) / 2.0

    def clip_sym(M):
        if M.shape[0] == 0:
            return M
        if diagonal:
            return np.diag(np.maximum(np.diag(M), eps))
        w, V = np.linalg.eigh((M + M.T) / 2.0)
        return (V * np.maximum(w, eps)) @ V.T

    return P, clip_sym(Q), clip_sym(R)


def _optimize_for_kappa(sys_dims, lin_cache, kappa, opts):
    """Inner subgradient loop for one kappa.

    Returns (P, Q, R, best_phi, iterations); the caller owns the
    verification gate, so nothing here is trusted.
    """
    n, q, p = sys_dims
    A, B, C, D = lin_cache
    eps = opts.eps_floor
    P = np.eye(n)
    Q = np.eye(q)
    R = np.eye(p)
    best = (P.copy(), Q.copy(), R.copy())
    best_phi = np.inf
    target = -2.0 * opts.margin
    iters = 0
    for it in range(opts.max_iters):
        iters = it + 1
        phi, idx, v = _phi_and_worst(A, B, C, D, P, Q, R, kappa)
        if phi < best_phi:
            best_phi = phi
            best = (P.copy(), Q.copy(), R.copy())
        if phi <= -opts.margin:
            break
        v1, v2 = v[:n], v[n:]
        g = A[idx] @ v1 + (B[idx] @ v2 if q else 0.0)
        GP = np.outer(v1, g) + np.outer(g, v1) + kappa * np.outer(v1, v1)
        GQ = -np.outer(v2, v2) if q else np.zeros((0, 0))
        w = C[idx] @ v1 + (D[idx] @ v2 if q else 0.0)
        GR = -np.outer(w, w)
        if opts.diagonal_supplies:
            GQ = np.diag(np.diag(GQ)) if q else GQ
            GR = np.diag(np.diag(GR))
        gnorm_sq = float((GP * GP).sum() + (GQ * GQ).sum() + (GR * GR).sum())
        if gnorm_sq <= 0:
            break  # flat subgradient: nothing to move
        step = opts.step_scale * (phi - target) / gnorm_sq
        P = P - step * GP
        Q = Q - step * GQ if q else Q
        R = R - step * GR
        P, Q, R = _project(P, Q, R, n, eps, opts.diagonal_supplies)
    return best[0], best[1], best[2], best_phi, iters


def synthesize_certificate(sys, grid, opts=None, chunk=65536, threads=1):
    """Search for (P, Q, R, kappa) certifying the CT LMI on the grid.

    Tries kappa candidates in descending order and returns the first one
    whose optimized certificate passes check_ct_grid at opts.tol — the
    verifier, not the optimizer, is the authority (a certificate that
    fails re-verification is logged as gate_rejected and never returned).
    The log records every attempt; an infeasible result reports best phi
    per kappa and is not a proof of undetectability.
    """
    opts = opts or SynthOptions()
    if grid.total_points < 1:
        raise ValueError("synthesis needs a non-empty grid")
    t0 = time.perf_counter()
    lin_cache = _cache_linearizations(sys, grid, chunk=chunk)
    log = []
    for kappa in opts.kappas():
        P, Q, R, phi, iters = _optimize_for_kappa((sys.n, sys.q, sys.p), lin_cache, kappa, opts)
        attempt = SynthAttempt(kappa=float(kappa), iterations=iters, best_phi=float(phi), accepted=False)
        log.append(attempt)
        if phi > -opts.margin:
            continue
        try:
            cert = Certificate(
                P=SymMatrix(P), Q=SymMatrix(Q), R=SymMatrix(R), kappa=float(kappa),
            )
        except CertificateError:
            attempt.gate_rejected = True
            continue
        report = check_ct_grid(sys, grid, cert, tol=opts.tol, chunk=chunk, threads=threads)
        if report.certified:
            attempt.accepted = True
            return SynthResult(
                feasible=True,
                certificate=cert,
                report=report,
                log=log,
                message=f"certified with kappa = {kappa:g} (largest feasible candidate tried)",
                wall_time_s=time.perf_counter() - t0,
            )
        attempt.gate_rejected = True
    return SynthResult(
        feasible=False,
        certificate=None,
        report=None,
        log=log,
        message=(
            "no candidate kappa reached the feasibility margin; this is NOT a proof "
            "of undetectability (gridding and local search are both incomplete)"
        ),
        wall_time_s=time.perf_counter() - t0,
    )
