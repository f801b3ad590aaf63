"""Sampling-period transfer of a continuous-time certificate.

Given a CT certificate (P, Q, R, kappa), a Lipschitz bound L_f and a
consistency envelope rho with threshold tau0, every sampling period
tau in (0, tau1) inherits a discrete-time certificate:

    alpha(tau) = (lmax(P)/lmin(P)) * (4 rho(tau) (1 + tau L_f + tau rho(tau)) + tau L_f^2)
    tau1       = min{ 1/kappa, tau0, alpha^{-1}(kappa) }
    Qt(tau)    = tau * (Q + alpha(tau) * lmin(P) * I_q)
    Rt(tau)    = tau * R
    eta(tau)   = tau * (alpha(tau) - kappa) + 1        in (0, 1)

alpha is nondecreasing (strictly whenever L_f > 0 or rho is nonzero), so
alpha^{-1}(kappa) is computed by bisection, rounded down so tau1 is never
overestimated.  The function W(x, x~) = ||x - x~||_P^2 is then a
dissipation certificate for the stepped system, which
``check_lyapunov_sampled`` spot-checks on random pairs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .certificates import DtCertificate
from .expr import degree_xu
from .grid import split_block
from .lmi import CheckReport
from .schemes import ConsistencyBound, as_scheme, step_batch
from .symmetric import DEFAULT_NSD_TOL, SymMatrix, eig_extents
from .system import eval_h_batch

BISECTION_REL_TOL = 1e-10

BINDING_INV_KAPPA = "1/kappa"
BINDING_TAU0 = "tau0"
BINDING_ALPHA_INV = "alpha_inv"


class TransferError(ValueError):
    def __init__(self, message, binding=None):
        super().__init__(message)
        self.binding = binding


@dataclass(frozen=True)
class TransferInput:
    """Everything the transfer formulas need: the CT certificate, the
    scheme's consistency bound, and the eigenvalue extents of P."""

    certificate: object
    bound: ConsistencyBound
    lam_min_P: float
    lam_max_P: float


def make_transfer_input(cert, bound):
    lam_min, lam_max = eig_extents(cert.P)
    if bound.L_f < 0:
        raise ValueError("L_f must be nonnegative")
    return TransferInput(certificate=cert, bound=bound, lam_min_P=lam_min, lam_max_P=lam_max)


def alpha(tau, ti):
    """Degradation rate alpha(tau); see the module docstring."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    rho = ti.bound.rho(tau)
    L_f = ti.bound.L_f
    ratio = ti.lam_max_P / ti.lam_min_P
    return ratio * (4.0 * rho * (1.0 + tau * L_f + tau * rho) + tau * ti.bound.lf_squared)


@dataclass(frozen=True)
class Tau1Result:
    value: float
    binding: str
    alpha_at_value: float


def compute_tau1(ti, rel_tol=BISECTION_REL_TOL):
    """tau1 = min{1/kappa, tau0, alpha^{-1}(kappa)} with the binding term.

    alpha only binds when alpha at the smaller of the other two bounds
    exceeds kappa, so the bisection bracket is [0, min(1/kappa, tau0)];
    the result is the lower bracket end, hence alpha(tau1) <= kappa
    always (rounding down preserves soundness).  When alpha is identically
    zero (L_f = 0 and rho = 0) its inverse is unbounded and the other two
    terms decide.
    """
    kappa = ti.certificate.kappa
    cap = min(1.0 / kappa, ti.bound.tau0)
    cap_binding = BINDING_INV_KAPPA if 1.0 / kappa <= ti.bound.tau0 else BINDING_TAU0
    a_cap = alpha(cap, ti)
    if a_cap <= kappa:
        return Tau1Result(value=cap, binding=cap_binding, alpha_at_value=a_cap)
    lo, hi = 0.0, cap
    a_lo = 0.0
    # alpha is nondecreasing with alpha(0+) = 0 < kappa < alpha(cap): valid bracket
    for _ in range(200):
        if hi - lo <= rel_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        a_mid = alpha(mid, ti)
        if a_mid <= kappa:
            lo, a_lo = mid, a_mid
        else:
            hi = mid
    return Tau1Result(value=lo, binding=BINDING_ALPHA_INV, alpha_at_value=a_lo)


def tau1(ti):
    """Largest sampling period (exclusive) covered by the transfer."""
    return compute_tau1(ti).value


def dt_certificate(ti, tau):
    """Build the transferred certificate for one tau in (0, tau1).

    Rejects tau >= tau1 naming the binding constraint; the constructed
    eta is asserted to land in (0, 1) as the theory guarantees.
    """
    if not isinstance(tau, (int, float)) or not (np.isfinite(tau) and tau > 0):
        raise TransferError(f"tau must be a positive real, got {tau!r}")
    t1 = compute_tau1(ti)
    if tau >= t1.value:
        raise TransferError(
            f"tau = {tau} is not below tau1 = {t1.value} (binding constraint: {t1.binding})",
            binding=t1.binding,
        )
    cert = ti.certificate
    a = alpha(tau, ti)
    # association chosen so the hand identities (e.g. eta(0.1) = 0.92 for the
    # scalar linear example) come out exact in floats
    eta = tau * a + (1.0 - tau * cert.kappa)
    if not (0.0 < eta < 1.0):
        raise TransferError(
            f"constructed eta = {eta} fell outside (0, 1); this should be impossible "
            f"for tau < tau1 and indicates inconsistent transfer inputs"
        )
    q = cert.Q.dim
    Qt = SymMatrix(tau * (cert.Q.data + a * ti.lam_min_P * np.eye(q)))
    Rt = SymMatrix(tau * cert.R.data)
    return DtCertificate(
        P=cert.P, tau=float(tau), Qt=Qt, Rt=Rt, eta=float(eta),
        tau1=t1.value, rho_desc=ti.bound,
    ).validate()


def lyap_value(x, x_other, P):
    """W(x, x~) = (x - x~)' P (x - x~)."""
    x = np.asarray(x, dtype=float)
    x_other = np.asarray(x_other, dtype=float)
    if x.shape != x_other.shape:
        raise ValueError("state vectors must share a shape")
    diff = x - x_other
    A = P.data if isinstance(P, SymMatrix) else np.asarray(P, dtype=float)
    if diff.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: {diff.shape[0]} vs {A.shape[0]}")
    return float(diff @ A @ diff)


def _wnorm_sq_batch(V, M):
    return np.einsum("ni,ij,nj->n", V, M, V)


def check_lyapunov_sampled(sys, scheme, dc, grid, n_samples=10000, seed=0,
                           tol=DEFAULT_NSD_TOL):
    """Spot-check the dissipation inequality on random pairs from the box.

    Draws n_samples seeded tuples (x, x~, u, u~, d) uniformly from the
    grid box (both trajectories share d) and evaluates

        W(F(x,u,d), F(x~,u~,d)) <= eta W(x,x~) + ||u-u~||_Qt^2
                                   + ||h(x,u,d)-h(x~,u~,d)||_Rt^2

    with W = ||.||_P^2.  When the discrete LMI holds on the (convex) box
    and h is affine in (x, u), the inequality is guaranteed and zero
    violations are expected; for non-affine h the report carries a warning
    and the sweep is only an empirical check.  The report reuses the
    CheckReport shape with "lambda_max" meaning the violation slack
    (lhs - rhs) and argmax_point the concatenated worst sample tuple.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if grid.dim != sys.dim:
        raise ValueError(f"grid has {grid.dim} axes, system needs {sys.dim}")
    scheme = as_scheme(scheme)
    t0 = time.perf_counter()
    warnings = []
    if dc.tau >= dc.tau1:
        warnings.append(f"out-of-certificate: tau = {dc.tau} is not below tau1 = {dc.tau1}")
    if any(degree_xu(e) > 1 for e in sys.h):
        warnings.append(
            "output function is not affine in (x, u): the quadratic Lyapunov "
            "construction is not guaranteed, this sweep is an empirical check only"
        )

    rng = np.random.default_rng(seed)
    lows, highs = grid.lows, grid.highs
    span = highs - lows
    n, q = sys.n, sys.q

    def draw():
        return lows + span * rng.random((n_samples, grid.dim))

    Z_a, Z_b = draw(), draw()
    Xa, Ua, Da = split_block(Z_a, sys)
    Xb, Ub, _ = split_block(Z_b, sys)
    D_shared = Da  # the parameter is common to both trajectories

    P, Qt, Rt, eta = dc.P.data, dc.Qt.data, dc.Rt.data, dc.eta
    Xa_next, ok_a = step_batch(sys, scheme, Xa, Ua, D_shared, dc.tau)
    Xb_next, ok_b = step_batch(sys, scheme, Xb, Ub, D_shared, dc.tau)
    Ya, ok_ya = eval_h_batch(sys, Xa, Ua, D_shared)
    Yb, ok_yb = eval_h_batch(sys, Xb, Ub, D_shared)
    ok = ok_a & ok_b & ok_ya & ok_yb

    lhs = _wnorm_sq_batch(Xa_next - Xb_next, P)
    w_now = _wnorm_sq_batch(Xa - Xb, P)
    supply_u = _wnorm_sq_batch(Ua - Ub, Qt) if q else np.zeros(n_samples)
    supply_y = _wnorm_sq_batch(Ya - Yb, Rt)
    rhs = eta * w_now + supply_u + supply_y
    slack = lhs - rhs
    thresh = tol * np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))

    dom = int((~ok).sum())
    good = np.nonzero(ok)[0]
    if good.size:
        vals = slack[good]
        violations = int((vals > thresh[good]).sum())
        i = int(np.argmax(vals))
        worst = float(vals[i])
        gi = int(good[i])
        arg = np.concatenate([Xa[gi], Xb[gi], Ua[gi], Ub[gi], D_shared[gi]]).tolist()
        lam_min = float(vals.min())
        lam_med = float(np.median(vals))
    else:
        violations = 0
        worst = None
        arg = None
        lam_min = lam_med = None
    return CheckReport(
        total_points=n_samples,
        violations=violations,
        domain_errors=dom,
        worst_lambda_max=worst,
        argmax_point=arg,
        lambda_max_min=lam_min,
        lambda_max_median=lam_med,
        tolerance=tol,
        wall_time_s=time.perf_counter() - t0,
        complete=(dom == 0),
        warnings=warnings,
    )
