"""HTTP verification service.

Wraps the core package behind a small JSON API; the CLI drives the same
handler functions in-process, so the two surfaces cannot drift.  Run with

    uvicorn iosscert.service:app

or ``iosscert serve``.  Input problems (malformed models, dimension
mismatches, invalid certificates) come back as 400s; verification
verdicts are data, not errors.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .certificates import CertificateError
from .expr import DomainError, ExprError
from .grid import GridError
from .lmi import check_ct_grid, check_dt_grid
from .pipeline import run_bench, run_consistency, run_transfer
from .schemas import (
    BenchRequest,
    BenchResponse,
    BuiltinsResponse,
    CheckCtRequest,
    CheckCtResponse,
    CheckDtRequest,
    CheckDtResponse,
    ConsistencyRequest,
    ConsistencyResponse,
    CheckReportPayload,
    SynthRequest,
    SynthResponse,
    TransferRequest,
    TransferResponse,
)
from .synthesis import synthesize_certificate

INPUT_ERRORS = (ExprError, GridError, CertificateError, DomainError, ValueError, KeyError)


def handle_check_ct(req: CheckCtRequest) -> CheckCtResponse:
    sys = req.model.to_system()
    grid = req.grid.to_grid()
    cert = req.certificate.to_certificate()
    report = check_ct_grid(sys, grid, cert, tol=req.tolerance, threads=req.threads)
    return CheckCtResponse(certified=report.certified,
                           report=CheckReportPayload.from_report(report))


def handle_check_dt(req: CheckDtRequest) -> CheckDtResponse:
    sys = req.model.to_system()
    grid = req.grid.to_grid()
    dc = req.dt_certificate.to_certificate()
    report = check_dt_grid(sys, req.scheme, grid, dc, tol=req.tolerance, threads=req.threads)
    return CheckDtResponse(certified=report.certified,
                           report=CheckReportPayload.from_report(report))


def handle_transfer(req: TransferRequest) -> TransferResponse:
    sys = req.model.to_system()
    grid = req.grid.to_grid()
    cert = req.certificate.to_certificate()
    outcome = run_transfer(
        sys, grid, cert, req.scheme, req.tau,
        ldf_override=req.ldf_override, delta0=req.delta0, ldf_pairs=req.ldf_pairs,
        n_samples=req.n_samples, seed=req.seed, tol=req.tolerance, threads=req.threads,
    )
    return TransferResponse.from_outcome(outcome)


def handle_consistency(req: ConsistencyRequest) -> ConsistencyResponse:
    sys = req.model.to_system()
    grid = req.grid.to_grid()
    outcome = run_consistency(
        sys, grid, req.scheme, req.taus,
        ldf_override=req.ldf_override, delta0=req.delta0, ldf_pairs=req.ldf_pairs,
        seed=req.seed, threads=req.threads,
    )
    return ConsistencyResponse.from_outcome(outcome)


def handle_synth(req: SynthRequest) -> SynthResponse:
    sys = req.model.to_system()
    grid = req.grid.to_grid()
    result = synthesize_certificate(sys, grid, req.options.to_options(), threads=req.threads)
    return SynthResponse.from_result(result)


def handle_bench(req: BenchRequest) -> BenchResponse:
    outcome = run_bench(points_per_axis=req.points_per_axis, tau=req.tau, repeats=req.repeats)
    return BenchResponse.from_outcome(outcome)


def handle_builtins() -> BuiltinsResponse:
    return BuiltinsResponse.collect()


app = FastAPI(
    title="iosscert",
    version=__version__,
    description="Gridded LMI detectability certificates and their transfer "
                "to sampled models",
)


def _guard(fn, *args):
    try:
        return fn(*args)
    except INPUT_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.get("/builtins", response_model=BuiltinsResponse)
def builtins():
    return handle_builtins()


@app.post("/check-ct", response_model=CheckCtResponse)
def check_ct(req: CheckCtRequest):
    return _guard(handle_check_ct, req)


@app.post("/check-dt", response_model=CheckDtResponse)
def check_dt(req: CheckDtRequest):
    return _guard(handle_check_dt, req)


@app.post("/transfer", response_model=TransferResponse)
def transfer(req: TransferRequest):
    return _guard(handle_transfer, req)


@app.post("/consistency", response_model=ConsistencyResponse)
def consistency(req: ConsistencyRequest):
    return _guard(handle_consistency, req)


@app.post("/synth", response_model=SynthResponse)
def synth(req: SynthRequest):
    return _guard(handle_synth, req)


@app.post("/bench", response_model=BenchResponse)
def bench(req: BenchRequest):
    return _guard(handle_bench, req)
