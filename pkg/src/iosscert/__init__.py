"""Detectability certificates for sampled nonlinear systems.

Verify an incremental-dissipation LMI for a continuous-time model on a
gridded compact box, then carry the certificate to the whole family of
Euler/RK2 stepped models with sampling period below a computed threshold
tau1 — no per-period re-verification.
"""

__version__ = "0.1.0"

from .certificates import Certificate, CertificateError, DtCertificate
from .expr import DomainError, ExprError, parse_expression
from .grid import GridSpec, box_grid, grid_points, parse_grid
from .lmi import CheckReport, assemble_ct_lmi, assemble_dt_lmi, check_ct_grid, check_dt_grid
from .schemes import (
    ConsistencyBound,
    Scheme,
    consistency_bound,
    consistency_defect,
    euler_step,
    jacobians_euler,
    jacobians_rk2,
    residual_r,
    rk2_step,
)
from .symmetric import SymMatrix, eig_extents, is_nsd, weighted_norm_sq
from .synthesis import SynthOptions, SynthResult, synthesize_certificate
from .system import (
    PointEval,
    SystemSpec,
    estimate_Ldf,
    estimate_Lf,
    estimate_cf,
    eval_point,
    parse_model,
)
from .systems import builtin_box, builtin_model, builtin_names
from .transfer import (
    TransferError,
    TransferInput,
    alpha,
    check_lyapunov_sampled,
    dt_certificate,
    lyap_value,
    make_transfer_input,
    tau1,
)

__all__ = [
    "__version__",
    "Certificate", "CertificateError", "DtCertificate",
    "DomainError", "ExprError", "parse_expression",
    "GridSpec", "box_grid", "grid_points", "parse_grid",
    "CheckReport", "assemble_ct_lmi", "assemble_dt_lmi", "check_ct_grid", "check_dt_grid",
    "ConsistencyBound", "Scheme", "consistency_bound", "consistency_defect",
    "euler_step", "jacobians_euler", "jacobians_rk2", "residual_r", "rk2_step",
    "SymMatrix", "eig_extents", "is_nsd", "weighted_norm_sq",
    "SynthOptions", "SynthResult", "synthesize_certificate",
    "PointEval", "SystemSpec", "estimate_Ldf", "estimate_Lf", "estimate_cf",
    "eval_point", "parse_model",
    "builtin_box", "builtin_model", "builtin_names",
    "TransferError", "TransferInput", "alpha", "check_lyapunov_sampled",
    "dt_certificate", "lyap_value", "make_transfer_input", "tau1",
]
