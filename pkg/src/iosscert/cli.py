"""Command-line front end.

Thin client over the service handlers: each subcommand builds the same
pydantic request the HTTP API accepts and executes it in-process, or
against a running service when --server is given.  Reports are JSON on
stdout (or --out) and always carry the artifact version, a config echo,
and the seed.

Exit codes: 0 certified/holds, 1 violated/infeasible, 2 usage or
evaluation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .schemas import (
    BenchRequest,
    BenchResponse,
    BuiltinsResponse,
    CertificatePayload,
    CheckCtRequest,
    CheckCtResponse,
    CheckDtRequest,
    CheckDtResponse,
    ConsistencyRequest,
    ConsistencyResponse,
    DtCertificatePayload,
    GridSource,
    ModelSource,
    SynthOptionsPayload,
    SynthRequest,
    SynthResponse,
    TransferRequest,
    TransferResponse,
)
from .service import (
    INPUT_ERRORS,
    handle_bench,
    handle_builtins,
    handle_check_ct,
    handle_check_dt,
    handle_consistency,
    handle_synth,
    handle_transfer,
)

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_ERROR = 2


class CliError(Exception):
    pass


def _read_text(path, what):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {what} file {path!r}: {exc}") from None


def _read_json(path, what):
    text = _read_text(path, what)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{what} file {path!r} is not valid JSON: {exc}") from None


def _model_source(args):
    if args.builtin:
        return ModelSource(builtin=args.builtin)
    if args.model:
        return ModelSource(text=_read_text(args.model, "model"), name=Path(args.model).stem)
    raise CliError("provide --model <path> or --builtin <name>")


def _grid_source(args):
    if not args.grid:
        raise CliError("provide --grid <path>")
    return GridSource(text=_read_text(args.grid, "grid"))


def _ct_certificate(args):
    if not args.cert:
        raise CliError("provide --cert <path>")
    return CertificatePayload(**_read_json(args.cert, "certificate"))


def _dt_certificate(args):
    if not args.cert:
        raise CliError("provide --cert <path>")
    return DtCertificatePayload(**_read_json(args.cert, "DT certificate"))


def _execute(args, path, request, handler, response_cls):
    """Run a request in-process or POST it to --server."""
    if args.server:
        import httpx

        url = args.server.rstrip("/") + path
        resp = httpx.post(url, json=request.model_dump(mode="json"), timeout=None)
        if resp.status_code != 200:
            raise CliError(f"server returned {resp.status_code}: {resp.text}")
        return response_cls.model_validate(resp.json())
    return handler(request)


def _emit(args, command, payload):
    doc = {
        "version": __version__,
        "command": command,
        "seed": getattr(args, "seed", None),
        "config": _config_echo(args),
    }
    doc.update(payload)
    text = json.dumps(doc, indent=2, allow_nan=False)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _config_echo(args):
    skip = {"func", "out"}
    echo = {}
    for key, value in vars(args).items():
        if key in skip or callable(value):
            continue
        echo[key] = value
    return echo


def _threads(args):
    if args.threads is not None:
        return args.threads
    return os.cpu_count() or 1


# ----------------------------------------------------------------------
# Subcommands


def cmd_check_ct(args):
    req = CheckCtRequest(
        model=_model_source(args), grid=_grid_source(args),
        certificate=_ct_certificate(args), tolerance=args.tol, threads=_threads(args),
    )
    resp = _execute(args, "/check-ct", req, handle_check_ct, CheckCtResponse)
    _emit(args, "check-ct", resp.model_dump(mode="json"))
    if resp.report.violations > 0:
        return EXIT_VIOLATED
    return EXIT_OK if resp.report.complete else EXIT_ERROR


def cmd_check_dt(args):
    req = CheckDtRequest(
        model=_model_source(args), grid=_grid_source(args),
        dt_certificate=_dt_certificate(args), scheme=args.scheme,
        tolerance=args.tol, threads=_threads(args),
    )
    resp = _execute(args, "/check-dt", req, handle_check_dt, CheckDtResponse)
    _emit(args, "check-dt", resp.model_dump(mode="json"))
    if resp.report.violations > 0:
        return EXIT_VIOLATED
    return EXIT_OK if resp.report.complete else EXIT_ERROR


def cmd_transfer(args):
    req = TransferRequest(
        model=_model_source(args), grid=_grid_source(args),
        certificate=_ct_certificate(args), scheme=args.scheme, tau=args.tau,
        ldf_override=args.ldf, delta0=args.delta0, ldf_pairs=args.pairs,
        n_samples=args.samples, seed=args.seed, tolerance=args.tol,
        threads=_threads(args),
    )
    resp = _execute(args, "/transfer", req, handle_transfer, TransferResponse)
    _emit(args, "transfer", resp.model_dump(mode="json"))
    if resp.ok:
        return EXIT_OK
    if resp.error is not None:
        return EXIT_VIOLATED  # tau >= tau1, binding constraint named in the report
    if resp.dt_check is not None and resp.dt_check.violations > 0:
        return EXIT_VIOLATED
    return EXIT_ERROR


def cmd_consistency(args):
    req = ConsistencyRequest(
        model=_model_source(args), grid=_grid_source(args), scheme=args.scheme,
        taus=args.taus, ldf_override=args.ldf, delta0=args.delta0,
        ldf_pairs=args.pairs, seed=args.seed, threads=_threads(args),
    )
    resp = _execute(args, "/consistency", req, handle_consistency, ConsistencyResponse)
    _emit(args, "consistency", resp.model_dump(mode="json"))
    if resp.ok:
        return EXIT_OK
    if any(r.domain_errors > 0 for r in resp.per_tau):
        return EXIT_ERROR
    return EXIT_VIOLATED


def cmd_synth(args):
    opts = SynthOptionsPayload(
        kappa_min=args.kappa_min, kappa_max=args.kappa_max,
        kappa_count=args.kappa_count, max_iters=args.max_iters,
        margin=args.margin, eps_floor=args.eps_floor,
        diagonal_supplies=not args.full_supplies, tol=args.tol, seed=args.seed,
    )
    req = SynthRequest(model=_model_source(args), grid=_grid_source(args),
                       options=opts, threads=_threads(args))
    resp = _execute(args, "/synth", req, handle_synth, SynthResponse)
    _emit(args, "synth", resp.model_dump(mode="json"))
    return EXIT_OK if resp.feasible else EXIT_VIOLATED


def cmd_bench(args):
    req = BenchRequest(points_per_axis=args.points, tau=args.tau, repeats=args.repeats)
    resp = _execute(args, "/bench", req, handle_bench, BenchResponse)
    _emit(args, "bench", resp.model_dump(mode="json"))
    return EXIT_OK


def cmd_builtins(args):
    if args.server:
        import httpx

        resp = httpx.get(args.server.rstrip("/") + "/builtins", timeout=None)
        if resp.status_code != 200:
            raise CliError(f"server returned {resp.status_code}: {resp.text}")
        payload = BuiltinsResponse.model_validate(resp.json())
    else:
        payload = handle_builtins()
    _emit(args, "builtins", payload.model_dump(mode="json"))
    return EXIT_OK


def cmd_serve(args):
    import uvicorn

    uvicorn.run("iosscert.service:app", host=args.host, port=args.port)
    return EXIT_OK


# ----------------------------------------------------------------------
# Argument wiring


def _add_common(p, model=True, grid=True, cert=False):
    if model:
        src = p.add_mutually_exclusive_group()
        src.add_argument("--model", help="model file path")
        src.add_argument("--builtin", help="builtin model name (see 'builtins')")
    if grid:
        p.add_argument("--grid", help="grid file path")
    if cert:
        p.add_argument("--cert", help="certificate JSON path")
    p.add_argument("--tol", type=float, default=1e-9, help="relative NSD tolerance")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for grid sweeps (default: hardware)")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled estimators/checks")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--server", help="run against a service instance at this base URL")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="iosscert",
        description="Certify detectability of a continuous-time model on a gridded "
                    "box and transfer the certificate to its sampled models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-ct", help="verify the continuous-time LMI on a grid")
    _add_common(p, cert=True)
    p.set_defaults(func=cmd_check_ct)

    p = sub.add_parser("check-dt", help="verify the discrete-time LMI for one tau")
    _add_common(p, cert=True)
    p.add_argument("--scheme", choices=["euler", "rk2"], default="euler")
    p.set_defaults(func=cmd_check_dt)

    p = sub.add_parser("transfer", help="run the full certificate-transfer pipeline")
    _add_common(p, cert=True)
    p.add_argument("--scheme", choices=["euler", "rk2"], default="euler")
    p.add_argument("--tau", type=float, required=True, help="sampling period")
    p.add_argument("--ldf", type=float, default=None,
                   help="analytic Lipschitz constant of [A B] (overrides sampling)")
    p.add_argument("--delta0", type=float, default=0.5, help="RK2 delta0 (tau0 = 2*delta0)")
    p.add_argument("--pairs", type=int, default=4096, help="sample pairs for the L_df estimate")
    p.add_argument("--samples", type=int, default=10000, help="dissipation-inequality samples")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("consistency", help="measure scheme defects against rho(tau)")
    _add_common(p)
    p.add_argument("--scheme", choices=["euler", "rk2"], default="rk2")
    p.add_argument("--taus", type=float, nargs="+", required=True)
    p.add_argument("--ldf", type=float, default=None)
    p.add_argument("--delta0", type=float, default=0.5)
    p.add_argument("--pairs", type=int, default=4096)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("synth", help="search for a continuous-time certificate")
    _add_common(p)
    p.add_argument("--kappa-min", type=float, default=1e-3)
    p.add_argument("--kappa-max", type=float, default=10.0)
    p.add_argument("--kappa-count", type=int, default=16)
    p.add_argument("--max-iters", type=int, default=400)
    p.add_argument("--margin", type=float, default=1e-6)
    p.add_argument("--eps-floor", type=float, default=1e-6)
    p.add_argument("--full-supplies", action="store_true",
                   help="optimize full symmetric Q, R instead of diagonal")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time continuous vs stepped linearization sweeps")
    _add_common(p, model=False, grid=False)
    p.add_argument("--points", type=int, default=100, help="points per (dependent) axis")
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("builtins", help="list builtin models")
    _add_common(p, model=False, grid=False)
    p.set_defaults(func=cmd_builtins)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # the exit-code contract is total
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
