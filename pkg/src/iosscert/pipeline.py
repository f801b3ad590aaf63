"""End-to-end orchestration: constants -> consistency bound -> tau1 ->
transferred certificate -> gridded DT check -> sampled dissipation check,
plus the consistency sweep and the linearization-cost benchmark."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .grid import box_grid, grid_blocks, split_block
from .lmi import check_dt_grid
from .schemes import (
    DEFAULT_DELTA0,
    Scheme,
    as_scheme,
    consistency_bound,
    defect_sweep,
    scheme_jacobians_batch,
)
from .symmetric import DEFAULT_NSD_TOL
from .system import estimate_Ldf, estimate_Lf_detail, estimate_cf_detail, linearize_batch
from .systems import REACTOR_BOUNDS, builtin_model
from .transfer import (
    TransferError,
    alpha,
    check_lyapunov_sampled,
    compute_tau1,
    dt_certificate,
    make_transfer_input,
)


@dataclass
class Constants:
    """Grid/box regularity constants feeding the transfer formulas."""

    L_f: float
    c_f: float
    L_df: float | None
    L_df_source: str  # "sampled" or "override"
    delta0: float
    L_f_sq: float | None = None
    argmax_Lf: list | None = None
    argmax_cf: list | None = None

    def to_dict(self):
        return {
            "L_f": self.L_f,
            "c_f": self.c_f,
            "L_df": self.L_df,
            "L_df_source": self.L_df_source,
            "delta0": self.delta0,
            "argmax_Lf": self.argmax_Lf,
            "argmax_cf": self.argmax_cf,
        }


def estimate_constants(sys, grid, scheme, ldf_override=None, delta0=DEFAULT_DELTA0,
                       ldf_pairs=4096, seed=0):
    """Estimate L_f and, for RK2, c_f and L_df over the grid/box.

    A user-supplied L_df always wins over the sampled estimate; the source
    is recorded so reports can flag the soundness gap of sampling.
    """
    scheme = as_scheme(scheme)
    L_f, arg_Lf, L_f_sq = estimate_Lf_detail(sys, grid)
    if scheme is Scheme.EULER:
        c_f, arg_cf = 0.0, None
        L_df, source = None, "unused"
        if ldf_override is not None:
            L_df, source = float(ldf_override), "override"
    else:
        c_f, arg_cf = estimate_cf_detail(sys, grid)
        if ldf_override is not None:
            L_df, source = float(ldf_override), "override"
        else:
            L_df = estimate_Ldf(sys, grid, n_pairs=ldf_pairs, seed=seed)
            source = "sampled"
    return Constants(
        L_f=L_f, c_f=c_f, L_df=L_df, L_df_source=source, delta0=float(delta0),
        L_f_sq=L_f_sq,
        argmax_Lf=None if arg_Lf is None else list(arg_Lf),
        argmax_cf=None if arg_cf is None else list(arg_cf),
    )


def bound_from_constants(scheme, consts):
    scheme = as_scheme(scheme)
    if scheme is Scheme.EULER:
        return consistency_bound(scheme, consts.L_f, L_f_sq=consts.L_f_sq)
    return consistency_bound(scheme, consts.L_f, L_df=consts.L_df, c_f=consts.c_f,
                             delta0=consts.delta0, L_f_sq=consts.L_f_sq)


@dataclass
class TransferOutcome:
    """Everything the combined transfer run produced, in provenance order."""

    scheme: str
    tau: float
    constants: Constants
    tau1: float
    binding_constraint: str
    alpha_at_tau: float | None
    eta: float | None
    dt_cert: object | None
    consistency: object | None      # DefectReport at tau
    dt_check: object | None         # CheckReport
    lyapunov: object | None         # CheckReport
    ok: bool
    error: str | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        from .certificates import dt_certificate_to_dict

        return {
            "scheme": self.scheme,
            "tau": self.tau,
            "constants": self.constants.to_dict(),
            "tau1": self.tau1,
            "binding_constraint": self.binding_constraint,
            "alpha_at_tau": self.alpha_at_tau,
            "eta": self.eta,
            "dt_certificate": dt_certificate_to_dict(self.dt_cert) if self.dt_cert else None,
            "consistency": self.consistency.to_dict() if self.consistency else None,
            "dt_check": self.dt_check.to_dict() if self.dt_check else None,
            "lyapunov": self.lyapunov.to_dict() if self.lyapunov else None,
            "ok": self.ok,
            "error": self.error,
            "warnings": list(self.warnings),
        }


def run_transfer(sys, grid, cert, scheme, tau, *, ldf_override=None,
                 delta0=DEFAULT_DELTA0, ldf_pairs=4096, n_samples=10000,
                 seed=0, tol=None, chunk=65536, threads=1):
    """The whole certificate-transfer pipeline for one sampling period.

    ok means: tau < tau1, the transferred certificate exists, and the
    gridded DT check passed completely with zero violations.
    """
    tol = DEFAULT_NSD_TOL if tol is None else tol
    scheme = as_scheme(scheme)
    consts = estimate_constants(sys, grid, scheme, ldf_override=ldf_override,
                                delta0=delta0, ldf_pairs=ldf_pairs, seed=seed)
    bound = bound_from_constants(scheme, consts)
    ti = make_transfer_input(cert, bound)
    t1 = compute_tau1(ti)
    warnings = []
    if scheme is Scheme.RK2 and consts.L_df_source == "sampled":
        warnings.append(
            "L_df is a sampled estimate (x1.1 safety factor), not a certified bound; "
            "supply an analytic value to close the gap"
        )
    try:
        dc = dt_certificate(ti, tau)
    except TransferError as exc:
        return TransferOutcome(
            scheme=scheme.value, tau=float(tau), constants=consts,
            tau1=t1.value, binding_constraint=t1.binding,
            alpha_at_tau=None, eta=None, dt_cert=None,
            consistency=None, dt_check=None, lyapunov=None,
            ok=False, error=str(exc), warnings=warnings,
        )
    cons_report = defect_sweep(sys, scheme, grid, tau, bound=bound, chunk=chunk, threads=threads)
    dt_report = check_dt_grid(sys, scheme, grid, dc, tol=tol, chunk=chunk, threads=threads)
    lyap_report = check_lyapunov_sampled(sys, scheme, dc, grid, n_samples=n_samples,
                                         seed=seed, tol=tol)
    ok = dt_report.certified
    return TransferOutcome(
        scheme=scheme.value, tau=float(tau), constants=consts,
        tau1=t1.value, binding_constraint=t1.binding,
        alpha_at_tau=alpha(tau, ti), eta=dc.eta, dt_cert=dc,
        consistency=cons_report, dt_check=dt_report, lyapunov=lyap_report,
        ok=ok, error=None, warnings=warnings,
    )


@dataclass
class ConsistencyOutcome:
    scheme: str
    constants: Constants
    tau0: float
    reports: list
    ok: bool

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "constants": self.constants.to_dict(),
            "tau0": None if np.isinf(self.tau0) else self.tau0,
            "per_tau": [r.to_dict() for r in self.reports],
            "ok": self.ok,
        }


def run_consistency(sys, grid, scheme, taus, *, ldf_override=None,
                    delta0=DEFAULT_DELTA0, ldf_pairs=4096, seed=0,
                    chunk=65536, threads=1):
    """Measure the max defect for each tau and compare against rho(tau)."""
    scheme = as_scheme(scheme)
    if not taus:
        raise ValueError("need at least one tau")
    consts = estimate_constants(sys, grid, scheme, ldf_override=ldf_override,
                                delta0=delta0, ldf_pairs=ldf_pairs, seed=seed)
    bound = bound_from_constants(scheme, consts)
    reports = [defect_sweep(sys, scheme, grid, t, bound=bound, chunk=chunk, threads=threads)
               for t in taus]
    ok = all(r.bound_satisfied and r.domain_errors == 0 for r in reports)
    return ConsistencyOutcome(scheme=scheme.value, constants=consts,
                              tau0=bound.tau0, reports=reports, ok=ok)


# ----------------------------------------------------------------------
# Linearization-cost benchmark


def detect_dependent_axes(fn, lows, highs, probes=3, rtol=1e-11):
    """Indices of coordinates the vector-valued fn actually varies with.

    Probes each axis at a few positions while holding the others at the
    box midpoint; an axis is dependent when any probe moves the output
    beyond rounding scale.  Used to shrink benchmark sweeps the same way
    one would by inspecting the closed-form Jacobians.
    """
    lows = np.asarray(lows, dtype=float)
    highs = np.asarray(highs, dtype=float)
    mid = 0.5 * (lows + highs)
    base = fn(mid[None, :])[0]
    scale = max(1.0, float(np.abs(base).max()))
    dependent = []
    for axis in range(lows.shape[0]):
        if highs[axis] == lows[axis]:
            continue
        Z = np.repeat(mid[None, :], probes, axis=0)
        Z[:, axis] = np.linspace(lows[axis], highs[axis], probes + 1)[1:]
        out = fn(Z)
        if np.abs(out - base).max() > rtol * scale:
            dependent.append(axis)
    return dependent


@dataclass
class BenchOutcome:
    tau: float
    points_per_axis: int
    repeats: int
    ct_axes: list
    adt_axes: list
    ct_points: int
    adt_points: int
    ct_time_s: float
    adt_time_s: float
    ratio: float
    ct_spread: float

    def to_dict(self):
        return {
            "tau": self.tau,
            "points_per_axis": self.points_per_axis,
            "repeats": self.repeats,
            "ct_axes": self.ct_axes,
            "adt_axes": self.adt_axes,
            "ct_points": self.ct_points,
            "adt_points": self.adt_points,
            "ct_time_s": self.ct_time_s,
            "adt_time_s": self.adt_time_s,
            "ratio": self.ratio,
            "ct_spread": self.ct_spread,
        }


def _time_sweep(grid, eval_blocks, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        eval_blocks(grid)
        times.append(time.perf_counter() - t0)
    times.sort()
    median = times[len(times) // 2] if len(times) % 2 else 0.5 * (
        times[len(times) // 2 - 1] + times[len(times) // 2])
    spread = (times[-1] - times[0]) / max(median, 1e-9)
    return median, spread


def run_bench(points_per_axis=100, tau=0.1, repeats=5, chunk=65536):
    """Time continuous vs stepped-model linearization sweeps on the reactor.

    Both sweeps use the same evaluation machinery.  The continuous
    Jacobians (A, B) vary along x1 only; the RK2 step Jacobians pick up
    x2 and u1 through the midpoint, so their sweep covers three axes at
    the same per-axis resolution.  Times are medians over ``repeats``
    runs; the ratio denominator is clamped at 1 ns.
    """
    sys = builtin_model("reactor")
    lows = np.array([b[0] for b in REACTOR_BOUNDS])
    highs = np.array([b[1] for b in REACTOR_BOUNDS])

    def ct_fn(Z):
        X, U, D = split_block(Z, sys)
        lin = linearize_batch(sys, X, U, D)
        return np.concatenate([lin.A.reshape(Z.shape[0], -1), lin.B.reshape(Z.shape[0], -1)], axis=1)

    def adt_fn(Z):
        X, U, D = split_block(Z, sys)
        _, At, Bt, _ = scheme_jacobians_batch(sys, Scheme.RK2, X, U, D, tau)
        return np.concatenate([At.reshape(Z.shape[0], -1), Bt.reshape(Z.shape[0], -1)], axis=1)

    ct_axes = detect_dependent_axes(ct_fn, lows, highs)
    adt_axes = detect_dependent_axes(adt_fn, lows, highs)

    def reduced_grid(axes):
        counts = [points_per_axis if a in axes else 1 for a in range(len(REACTOR_BOUNDS))]
        return box_grid(REACTOR_BOUNDS, counts)

    ct_grid = reduced_grid(ct_axes)
    adt_grid = reduced_grid(adt_axes)

    def sweep(fn):
        def go(grid):
            for _, Z in grid_blocks(grid, chunk):
                fn(Z)
        return go

    ct_time, ct_spread = _time_sweep(ct_grid, sweep(ct_fn), repeats)
    adt_time, _ = _time_sweep(adt_grid, sweep(adt_fn), repeats)
    return BenchOutcome(
        tau=float(tau),
        points_per_axis=int(points_per_axis),
        repeats=int(repeats),
        ct_axes=[sys.axis_name(a) for a in ct_axes],
        adt_axes=[sys.axis_name(a) for a in adt_axes],
        ct_points=ct_grid.total_points,
        adt_points=adt_grid.total_points,
        ct_time_s=ct_time,
        adt_time_s=adt_time,
        ratio=adt_time / max(ct_time, 1e-9),
        ct_spread=ct_spread,
    )
