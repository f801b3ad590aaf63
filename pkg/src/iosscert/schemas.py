"""Pydantic request/response models for the verification service.

These are the wire shapes shared by the HTTP API and the CLI (the CLI
builds the same requests and runs them in-process by default).  Matrices
travel as row-major lists of lists; an unbounded tau0 is null because
strict JSON has no Infinity.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .certificates import Certificate, DtCertificate
from .grid import GridSpec, parse_grid
from .schemes import ConsistencyBound, Scheme
from .symmetric import DEFAULT_NSD_TOL, SymMatrix
from .system import parse_model
from .systems import BUILTIN_MODEL_TEXTS, builtin_model


class ModelSource(BaseModel):
    """A system model: either a builtin name or model-file text."""

    builtin: Optional[str] = None
    text: Optional[str] = None
    name: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.builtin is None) == (self.text is None):
            raise ValueError("provide exactly one of 'builtin' or 'text'")
        return self

    def to_system(self):
        if self.builtin is not None:
            return builtin_model(self.builtin)
        return parse_model(self.text, name=self.name or "model")


class GridAxis(BaseModel):
    lo: float
    hi: float
    count: int = Field(ge=1)


class GridSource(BaseModel):
    """A grid: explicit axes or grid-file text."""

    axes: Optional[list[GridAxis]] = None
    text: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.axes is None) == (self.text is None):
            raise ValueError("provide exactly one of 'axes' or 'text'")
        return self

    def to_grid(self):
        if self.text is not None:
            return parse_grid(self.text)
        return GridSpec(
            np.array([a.lo for a in self.axes]),
            np.array([a.hi for a in self.axes]),
            np.array([a.count for a in self.axes], dtype=np.int64),
        )


class CertificatePayload(BaseModel):
    P: list[list[float]]
    Q: list[list[float]]
    R: list[list[float]]
    kappa: float

    def to_certificate(self):
        return Certificate(
            P=SymMatrix.from_full(_square(self.P)),
            Q=SymMatrix.from_full(_square(self.Q)),
            R=SymMatrix.from_full(_square(self.R)),
            kappa=self.kappa,
        )

    @classmethod
    def from_certificate(cls, cert):
        return cls(P=cert.P.to_lists(), Q=cert.Q.to_lists(), R=cert.R.to_lists(),
                   kappa=cert.kappa)


class RhoDesc(BaseModel):
    scheme: str
    L_f: float
    sigma_slope: float
    tau0: Optional[float] = None  # null = unbounded


class DtCertificatePayload(BaseModel):
    P: list[list[float]]
    Qt: list[list[float]]
    Rt: list[list[float]]
    eta: float
    tau: float
    tau1: float
    rho_desc: Optional[RhoDesc] = None

    def to_certificate(self):
        rho = None
        if self.rho_desc is not None:
            rho = ConsistencyBound(
                scheme=Scheme(self.rho_desc.scheme),
                L_f=self.rho_desc.L_f,
                sigma_slope=self.rho_desc.sigma_slope,
                tau0=math.inf if self.rho_desc.tau0 is None else self.rho_desc.tau0,
            )
        return DtCertificate(
            P=SymMatrix.from_full(_square(self.P)),
            Qt=SymMatrix.from_full(_square(self.Qt)),
            Rt=SymMatrix.from_full(_square(self.Rt)),
            eta=self.eta, tau=self.tau, tau1=self.tau1, rho_desc=rho,
        )

    @classmethod
    def from_certificate(cls, dc):
        rho = None
        if dc.rho_desc is not None:
            b = dc.rho_desc
            rho = RhoDesc(scheme=b.scheme.value, L_f=b.L_f, sigma_slope=b.sigma_slope,
                          tau0=None if math.isinf(b.tau0) else b.tau0)
        return cls(P=dc.P.to_lists(), Qt=dc.Qt.to_lists(), Rt=dc.Rt.to_lists(),
                   eta=dc.eta, tau=dc.tau, tau1=dc.tau1, rho_desc=rho)


def _square(rows):
    arr = np.array(rows, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 0))
    return arr.reshape(len(rows), -1)


class CheckReportPayload(BaseModel):
    total_points: int
    violations: int
    domain_errors: int
    worst_lambda_max: Optional[float]
    argmax_point: Optional[list[float]]
    lambda_max_min: Optional[float]
    lambda_max_median: Optional[float]
    tolerance: float
    wall_time_s: float
    complete: bool
    warnings: list[str] = []

    @classmethod
    def from_report(cls, report):
        return cls(**report.to_dict())


class DefectReportPayload(BaseModel):
    scheme: str
    tau: float
    total_points: int
    domain_errors: int
    max_defect: Optional[float]
    argmax_point: Optional[list[float]]
    rho_of_tau: Optional[float]
    bound_satisfied: Optional[bool]
    tau_within_tau0: Optional[bool]
    wall_time_s: float

    @classmethod
    def from_report(cls, report):
        return cls(**report.to_dict())


class ConstantsPayload(BaseModel):
    L_f: float
    c_f: float
    L_df: Optional[float]
    L_df_source: str
    delta0: float
    argmax_Lf: Optional[list[float]] = None
    argmax_cf: Optional[list[float]] = None

    @classmethod
    def from_constants(cls, consts):
        return cls(**consts.to_dict())


# ----------------------------------------------------------------------
# Requests / responses per endpoint


class CheckCtRequest(BaseModel):
    model: ModelSource
    grid: GridSource
    certificate: CertificatePayload
    tolerance: float = DEFAULT_NSD_TOL
    threads: int = 1


class CheckCtResponse(BaseModel):
    certified: bool
    report: CheckReportPayload


class CheckDtRequest(BaseModel):
    model: ModelSource
    grid: GridSource
    dt_certificate: DtCertificatePayload
    scheme: str = "euler"
    tolerance: float = DEFAULT_NSD_TOL
    threads: int = 1


class CheckDtResponse(BaseModel):
    certified: bool
    report: CheckReportPayload


class TransferRequest(BaseModel):
    model: ModelSource
    grid: GridSource
    certificate: CertificatePayload
    scheme: str = "euler"
    tau: float = Field(gt=0)
    ldf_override: Optional[float] = None
    delta0: float = 0.5
    ldf_pairs: int = 4096
    n_samples: int = 10000
    seed: int = 0
    tolerance: float = DEFAULT_NSD_TOL
    threads: int = 1


class TransferResponse(BaseModel):
    ok: bool
    scheme: str
    tau: float
    tau1: float
    binding_constraint: str
    alpha_at_tau: Optional[float]
    eta: Optional[float]
    Qt: Optional[list[list[float]]]
    Rt: Optional[list[list[float]]]
    constants: ConstantsPayload
    dt_certificate: Optional[DtCertificatePayload]
    consistency: Optional[DefectReportPayload]
    dt_check: Optional[CheckReportPayload]
    lyapunov: Optional[CheckReportPayload]
    error: Optional[str] = None
    warnings: list[str] = []

    @classmethod
    def from_outcome(cls, out):
        return cls(
            ok=out.ok,
            scheme=out.scheme,
            tau=out.tau,
            tau1=out.tau1,
            binding_constraint=out.binding_constraint,
            alpha_at_tau=out.alpha_at_tau,
            eta=out.eta,
            Qt=out.dt_cert.Qt.to_lists() if out.dt_cert else None,
            Rt=out.dt_cert.Rt.to_lists() if out.dt_cert else None,
            constants=ConstantsPayload.from_constants(out.constants),
            dt_certificate=(DtCertificatePayload.from_certificate(out.dt_cert)
                            if out.dt_cert else None),
            consistency=(DefectReportPayload.from_report(out.consistency)
                         if out.consistency else None),
            dt_check=(CheckReportPayload.from_report(out.dt_check) if out.dt_check else None),
            lyapunov=(CheckReportPayload.from_report(out.lyapunov) if out.lyapunov else None),
            error=out.error,
            warnings=list(out.warnings),
        )


class ConsistencyRequest(BaseModel):
    model: ModelSource
    grid: GridSource
    scheme: str = "rk2"
    taus: list[float] = Field(min_length=1)
    ldf_override: Optional[float] = None
    delta0: float = 0.5
    ldf_pairs: int = 4096
    seed: int = 0
    threads: int = 1


class ConsistencyResponse(BaseModel):
    ok: bool
    scheme: str
    tau0: Optional[float]
    constants: ConstantsPayload
    per_tau: list[DefectReportPayload]

    @classmethod
    def from_outcome(cls, out):
        return cls(
            ok=out.ok,
            scheme=out.scheme,
            tau0=None if math.isinf(out.tau0) else out.tau0,
            constants=ConstantsPayload.from_constants(out.constants),
            per_tau=[DefectReportPayload.from_report(r) for r in out.reports],
        )


class SynthOptionsPayload(BaseModel):
    kappa_values: Optional[list[float]] = None
    kappa_min: float = 1e-3
    kappa_max: float = 10.0
    kappa_count: int = 16
    max_iters: int = 400
    margin: float = 1e-6
    eps_floor: float = 1e-6
    step_scale: float = 1.0
    diagonal_supplies: bool = True
    tol: float = DEFAULT_NSD_TOL
    seed: int = 0

    def to_options(self):
        from .synthesis import SynthOptions

        return SynthOptions(
            kappa_values=tuple(self.kappa_values or ()),
            kappa_min=self.kappa_min, kappa_max=self.kappa_max,
            kappa_count=self.kappa_count, max_iters=self.max_iters,
            margin=self.margin, eps_floor=self.eps_floor,
            step_scale=self.step_scale,
            diagonal_supplies=self.diagonal_supplies, tol=self.tol, seed=self.seed,
        )


class SynthRequest(BaseModel):
    model: ModelSource
    grid: GridSource
    options: SynthOptionsPayload = SynthOptionsPayload()
    threads: int = 1


class SynthAttemptPayload(BaseModel):
    kappa: float
    iterations: int
    best_phi: float
    accepted: bool
    gate_rejected: bool


class SynthResponse(BaseModel):
    feasible: bool
    certificate: Optional[CertificatePayload]
    verification: Optional[CheckReportPayload]
    synth_log: list[SynthAttemptPayload]
    message: str
    wall_time_s: float

    @classmethod
    def from_result(cls, res):
        return cls(
            feasible=res.feasible,
            certificate=(CertificatePayload.from_certificate(res.certificate)
                         if res.certificate else None),
            verification=(CheckReportPayload.from_report(res.report)
                          if res.report is not None else None),
            synth_log=[SynthAttemptPayload(
                kappa=a.kappa, iterations=a.iterations, best_phi=a.best_phi,
                accepted=a.accepted, gate_rejected=a.gate_rejected,
            ) for a in res.log],
            message=res.message,
            wall_time_s=res.wall_time_s,
        )


class BenchRequest(BaseModel):
    points_per_axis: int = Field(default=100, ge=1)
    tau: float = Field(default=0.1, gt=0)
    repeats: int = Field(default=5, ge=1)


class BenchResponse(BaseModel):
    tau: float
    points_per_axis: int
    repeats: int
    ct_axes: list[str]
    adt_axes: list[str]
    ct_points: int
    adt_points: int
    ct_time_s: float
    adt_time_s: float
    ratio: float
    ct_spread: float

    @classmethod
    def from_outcome(cls, out):
        return cls(**out.to_dict())


class BuiltinInfo(BaseModel):
    name: str
    n: int
    q: int
    m: int
    p: int
    text: str
    default_bounds: list[list[float]]


class BuiltinsResponse(BaseModel):
    models: list[BuiltinInfo]

    @classmethod
    def collect(cls):
        from .systems import DEFAULT_BOUNDS, builtin_names

        infos = []
        for name in builtin_names():
            sys = builtin_model(name)
            infos.append(BuiltinInfo(
                name=name, n=sys.n, q=sys.q, m=sys.m, p=sys.p,
                text=BUILTIN_MODEL_TEXTS[name],
                default_bounds=[[lo, hi] for lo, hi in DEFAULT_BOUNDS[name]],
            ))
        return cls(models=infos)
