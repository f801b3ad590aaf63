"""One-step discretization maps, their exact Jacobians, and consistency.

Two schemes are supported:

* Euler:  F_tau(x,u,d) = x + tau * f(x,u,d)
* RK2:    F_tau(x,u,d) = x + tau * f(x + (tau/2) f(x,u,d), u, d)

The consistency defect at a point is

    max{ ||(A~ - I)/tau - A||_2, ||B~/tau - B||_2 }

where (A~, B~) are the Jacobians of F_tau and (A, B) those of f.  For
Euler the defect vanishes identically (the closed forms are I + tau*A and
tau*B).  For RK2 it is bounded by rho(tau) = sigma(tau/2) + (tau/2) L_f^2
for tau <= tau0 = 2*delta0, where sigma(s) = L_df * c_f * s on a compact
box; the three constants come from the grid estimators in
``iosscert.system`` or from user-supplied analytic values.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .expr import DomainError
from .grid import run_blocks, split_block
from .system import _as_batch, _specnorm_batch, eval_f_batch, first_invalid_expression, linearize_batch

DEFAULT_DELTA0 = 0.5  # tau0 = 2 * delta0 = 1 time unit unless overridden


class Scheme(str, Enum):
    EULER = "euler"
    RK2 = "rk2"


def as_scheme(value):
    if isinstance(value, Scheme):
        return value
    try:
        return Scheme(str(value).lower())
    except ValueError:
        raise ValueError(f"unknown scheme {value!r}; expected 'euler' or 'rk2'") from None


@dataclass(frozen=True)
class ConsistencyBound:
    """Defect envelope rho and validity threshold tau0 for one scheme.

    rho(tau) = 0 for Euler (any tau); for RK2,
    rho(tau) = sigma_slope * tau/2 + (tau/2) * L_f^2 on (0, tau0] with
    sigma_slope = L_df * c_f.  ``L_f_sq`` may carry the exactly-computed
    squared norm from the grid estimator; otherwise L_f is squared.
    """

    scheme: Scheme
    L_f: float
    sigma_slope: float = 0.0
    tau0: float = float("inf")
    L_f_sq: float | None = None

    @property
    def lf_squared(self):
        return self.L_f * self.L_f if self.L_f_sq is None else self.L_f_sq

    def rho(self, tau):
        if self.scheme is Scheme.EULER:
            return 0.0
        return self.sigma_slope * (tau / 2.0) + (tau / 2.0) * self.lf_squared


def consistency_bound(scheme, L_f, L_df=None, c_f=None, delta0=DEFAULT_DELTA0, L_f_sq=None):
    """Build the defect envelope for a scheme from regularity constants.

    Euler needs nothing beyond L_f (kept for the transfer formulas) and is
    consistent with rho = 0 for every tau.  RK2 needs L_df, c_f and
    delta0 > 0, giving tau0 = 2*delta0.
    """
    scheme = as_scheme(scheme)
    if L_f < 0:
        raise ValueError("L_f must be nonnegative")
    if scheme is Scheme.EULER:
        return ConsistencyBound(scheme=scheme, L_f=float(L_f), L_f_sq=L_f_sq)
    if L_df is None or c_f is None:
        raise ValueError("RK2 consistency requires L_df and c_f")
    if L_df < 0 or c_f < 0:
        raise ValueError("L_df and c_f must be nonnegative")
    if not delta0 > 0:
        raise ValueError("delta0 must be positive")
    return ConsistencyBound(
        scheme=scheme,
        L_f=float(L_f),
        sigma_slope=float(L_df) * float(c_f),
        tau0=2.0 * float(delta0),
        L_f_sq=L_f_sq,
    )


# ----------------------------------------------------------------------
# One-step maps


def _check_tau(tau):
    if not isinstance(tau, (int, float)) or not (np.isfinite(tau) and tau > 0):
        raise ValueError(f"sampling period must be a positive real, got {tau!r}")


def step_batch(sys, scheme, X, U, D, tau, dtype=np.float64, track=True):
    """Apply one step of the scheme to a batch. Returns (X_next, ok)."""
    _check_tau(tau)
    scheme = as_scheme(scheme)
    fv, ok = eval_f_batch(sys, X, U, D, dtype=dtype, track=track)
    if scheme is Scheme.EULER:
        return X + tau * fv, ok
    mid = X + (tau / 2.0) * fv
    fm, ok2 = eval_f_batch(sys, mid, U, D, dtype=dtype, track=track)
    if track:
        ok = ok & ok2
    return X + tau * fm, ok


def _step_point(sys, scheme, x, u, d, tau):
    X, U, D = _as_batch(sys, x, u, d)
    Xn, ok = step_batch(sys, scheme, X, U, D, tau)
    if not ok[0]:
        raise DomainError("invalid evaluation along the step", first_invalid_expression(sys, X, U, D))
    return Xn[0]


def euler_step(sys, x, u=(), d=(), tau=None):
    """x + tau * f(x, u, d)."""
    return _step_point(sys, Scheme.EULER, x, u, d, tau)


def rk2_step(sys, x, u=(), d=(), tau=None):
    """x + tau * f(x + (tau/2) f(x,u,d), u, d)."""
    return _step_point(sys, Scheme.RK2, x, u, d, tau)


# ----------------------------------------------------------------------
# Exact step Jacobians (closed forms; AD-through-the-step stays a test oracle)


def jacobians_euler(pe, tau):
    """(A~, B~) = (I + tau*A, tau*B) from a point evaluation."""
    _check_tau(tau)
    n = pe.A.shape[0]
    return np.eye(n) + tau * pe.A, tau * pe.B


def scheme_jacobians_batch(sys, scheme, X, U, D, tau):
    """Step Jacobians over a batch, plus the base-point linearization.

    Returns (lin, At, Bt, ok) where lin holds f, y, A, B, C, D at the
    original points (C and D are what the output-side LMI blocks need) and
    ok combines base and, for RK2, midpoint validity.
    """
    _check_tau(tau)
    scheme = as_scheme(scheme)
    lin = linearize_batch(sys, X, U, D)
    n = sys.n
    eye = np.eye(n)
    if scheme is Scheme.EULER:
        At = eye[None, :, :] + tau * lin.A
        Bt = tau * lin.B
        return lin, At, Bt, lin.ok.copy()
    mid = X + (tau / 2.0) * lin.f
    lin_mid = linearize_batch(sys, mid, U, D)
    inner = eye[None, :, :] + (tau / 2.0) * lin.A
    At = eye[None, :, :] + tau * (lin_mid.A @ inner)
    Bt = tau * ((tau / 2.0) * (lin_mid.A @ lin.B) + lin_mid.B)
    return lin, At, Bt, lin.ok & lin_mid.ok


def jacobians_rk2(sys, x, u=(), d=(), tau=None):
    """RK2 step Jacobians at one point:

    A~ = I + tau * A(mid) (I + (tau/2) A(x)),
    B~ = tau * ((tau/2) A(mid) B(x) + B(mid)),   mid = x + (tau/2) f(x,u,d).
    """
    X, U, D = _as_batch(sys, x, u, d)
    _, At, Bt, ok = scheme_jacobians_batch(sys, Scheme.RK2, X, U, D, tau)
    if not ok[0]:
        raise DomainError("invalid evaluation at the point or midpoint",
                          first_invalid_expression(sys, X, U, D))
    return At[0], Bt[0]


# ----------------------------------------------------------------------
# Consistency defect


def defect_batch(sys, scheme, X, U, D, tau):
    """Pointwise consistency defects over a batch. Returns (defect, ok)."""
    lin, At, Bt, ok = scheme_jacobians_batch(sys, scheme, X, U, D, tau)
    n = sys.n
    eye = np.eye(n)
    DA = (At - eye[None, :, :]) / tau - lin.A
    dA = _specnorm_batch(DA)
    if sys.q:
        DB = Bt / tau - lin.B
        dB = _specnorm_batch(DB)
        return np.maximum(dA, dB), ok
    return dA, ok


def consistency_defect(sys, scheme, x, u=(), d=(), tau=None):
    """max{ ||(A~-I)/tau - A||_2, ||B~/tau - B||_2 } at one point."""
    X, U, D = _as_batch(sys, x, u, d)
    defect, ok = defect_batch(sys, scheme, X, U, D, tau)
    if not ok[0]:
        raise DomainError("invalid evaluation at the point or midpoint",
                          first_invalid_expression(sys, X, U, D))
    return float(defect[0])


def residual_r(sys, scheme, x, u=(), d=(), tau=None):
    """Residual r_tau = F_tau(x,u,d) - x - tau*f(x,u,d).

    Diagnostic for how far the scheme sits from the Euler map: exactly
    zero for Euler, O(tau^2) for RK2 on smooth systems.
    """
    _check_tau(tau)
    scheme = as_scheme(scheme)
    X, U, D = _as_batch(sys, x, u, d)
    fv, ok = eval_f_batch(sys, X, U, D)
    if not ok[0]:
        raise DomainError("invalid evaluation at this point", first_invalid_expression(sys, X, U, D))
    if scheme is Scheme.EULER:
        return np.zeros(sys.n)
    Xn, ok = step_batch(sys, scheme, X, U, D, tau)
    if not ok[0]:
        raise DomainError("invalid evaluation along the step", first_invalid_expression(sys, X, U, D))
    return Xn[0] - X[0] - tau * fv[0]


@dataclass
class DefectReport:
    """Grid sweep of the consistency defect at one sampling period."""

    scheme: str
    tau: float
    total_points: int
    domain_errors: int
    max_defect: float | None
    argmax_point: list | None
    rho_of_tau: float | None
    bound_satisfied: bool | None
    tau_within_tau0: bool | None
    wall_time_s: float

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "tau": self.tau,
            "total_points": self.total_points,
            "domain_errors": self.domain_errors,
            "max_defect": self.max_defect,
            "argmax_point": self.argmax_point,
            "rho_of_tau": self.rho_of_tau,
            "bound_satisfied": self.bound_satisfied,
            "tau_within_tau0": self.tau_within_tau0,
            "wall_time_s": self.wall_time_s,
        }


DEFECT_MEASUREMENT_TOL = 1e-12  # floor for the rho comparison; the defect
# quotient (A~-I)/tau amplifies ulp-level rounding by 1/tau, so an exact
# rho of zero (Euler) must not be failed by measurement noise


def defect_sweep(sys, scheme, grid, tau, bound=None, chunk=65536, threads=1,
                 defect_tol=DEFECT_MEASUREMENT_TOL):
    """Max consistency defect over a grid, compared against rho(tau).

    ``bound`` is an optional ConsistencyBound; when given, the report says
    whether max defect <= rho(tau) + defect_tol*max(1, rho) and whether
    tau <= tau0.  Domain errors are tallied per point rather than aborting.
    """
    _check_tau(tau)
    scheme = as_scheme(scheme)
    t0 = time.perf_counter()
    worst = -np.inf
    worst_idx = None
    dom = 0
    total = grid.total_points

    def worker(start, Z):
        X, U, D = split_block(Z, sys)
        defect, ok = defect_batch(sys, scheme, X, U, D, tau)
        return start, defect, ok

    for start, defect, ok in run_blocks(grid, worker, chunk=chunk, threads=threads):
        dom += int((~ok).sum())
        if ok.any():
            good = np.nonzero(ok)[0]
            vals = defect[good]
            i = int(np.argmax(vals))
            if vals[i] > worst:
                worst = float(vals[i])
                worst_idx = start + int(good[i])

    wall = time.perf_counter() - t0
    max_defect = None if worst_idx is None else worst
    arg = None if worst_idx is None else grid.point(worst_idx).tolist()
    rho = None
    satisfied = None
    within = None
    if bound is not None:
        rho = float(bound.rho(tau))
        within = tau <= bound.tau0
        satisfied = (max_defect is not None) and within and (
            max_defect <= rho + defect_tol * max(1.0, rho))
    return DefectReport(
        scheme=scheme.value,
        tau=float(tau),
        total_points=total,
        domain_errors=dom,
        max_defect=max_defect,
        argmax_point=arg,
        rho_of_tau=rho,
        bound_satisfied=satisfied,
        tau_within_tau0=within,
        wall_time_s=wall,
    )
