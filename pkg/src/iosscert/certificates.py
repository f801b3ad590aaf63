"""Detectability certificates and their JSON wire format."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .symmetric import DEFAULT_PSD_TOL, SymMatrix, eig_extents

if TYPE_CHECKING:  # pragma: no cover
    from .schemes import ConsistencyBound


class CertificateError(ValueError):
    pass


def _require_pd(M, name, psd_tol):
    if M.dim == 0:
        return
    lam_min, _ = eig_extents(M)
    if not lam_min > psd_tol:
        raise CertificateError(
            f"{name} must be strictly positive definite: lambda_min = {lam_min:.3e} <= {psd_tol:.0e}"
        )


@dataclass(frozen=True)
class Certificate:
    """Continuous-time certificate (P, Q, R, kappa): Lyapunov matrix, the
    two supply matrices, and the contraction factor, all strictly positive."""

    P: SymMatrix
    Q: SymMatrix
    R: SymMatrix
    kappa: float
    psd_tol: float = DEFAULT_PSD_TOL

    def __post_init__(self):
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise CertificateError(f"kappa must be a positive real, got {self.kappa}")
        _require_pd(self.P, "P", self.psd_tol)
        _require_pd(self.Q, "Q", self.psd_tol)
        _require_pd(self.R, "R", self.psd_tol)

    @property
    def n(self):
        return self.P.dim

    @property
    def q(self):
        return self.Q.dim

    @property
    def p(self):
        return self.R.dim


@dataclass(frozen=True)
class DtCertificate:
    """Discrete-time certificate for one sampling period tau.

    Carries the unchanged Lyapunov matrix P, the per-tau supply matrices
    Qt, Rt, the contraction factor eta, and the validity threshold tau1
    below which the construction is sound.  ``rho_desc`` records the
    consistency bound (scheme, Lipschitz constant, slope, tau0) that
    produced it.  Instances built by ``transfer.dt_certificate`` are
    validated; hand-built ones can be deliberately out of range (the grid
    checker then flags them as out-of-certificate).
    """

    P: SymMatrix
    tau: float
    Qt: SymMatrix
    Rt: SymMatrix
    eta: float
    tau1: float
    rho_desc: Optional["ConsistencyBound"] = None

    def validate(self, psd_tol=DEFAULT_PSD_TOL):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise CertificateError(f"tau must be positive, got {self.tau}")
        if not self.tau < self.tau1:
            raise CertificateError(f"tau = {self.tau} is not below tau1 = {self.tau1}")
        if not (0.0 < self.eta < 1.0):
            raise CertificateError(f"eta must lie in (0, 1), got {self.eta}")
        _require_pd(self.P, "P", psd_tol)
        _require_pd(self.Qt, "Qt", psd_tol)
        _require_pd(self.Rt, "Rt", psd_tol)
        return self

    @property
    def n(self):
        return self.P.dim


def _matrix_lists(M):
    return [[float(v) for v in row] for row in M.data]


def certificate_to_dict(cert):
    return {
        "P": _matrix_lists(cert.P),
        "Q": _matrix_lists(cert.Q),
        "R": _matrix_lists(cert.R),
        "kappa": float(cert.kappa),
    }


def _square(rows):
    arr = np.array(rows, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 0))
    return arr.reshape(len(rows), -1)


def certificate_from_dict(payload):
    try:
        return Certificate(
            P=SymMatrix.from_full(_square(payload["P"])),
            Q=SymMatrix.from_full(_square(payload["Q"])),
            R=SymMatrix.from_full(_square(payload["R"])),
            kappa=float(payload["kappa"]),
        )
    except KeyError as exc:
        raise CertificateError(f"certificate JSON missing key {exc}") from None


def dt_certificate_to_dict(dc):
    out = {
        "P": _matrix_lists(dc.P),
        "Qt": _matrix_lists(dc.Qt),
        "Rt": _matrix_lists(dc.Rt),
        "eta": float(dc.eta),
        "tau": float(dc.tau),
        "tau1": float(dc.tau1),
    }
    if dc.rho_desc is not None:
        b = dc.rho_desc
        out["rho_desc"] = {
            "scheme": b.scheme.value,
            "L_f": float(b.L_f),
            "sigma_slope": float(b.sigma_slope),
            # strict JSON has no Infinity; null means unbounded
            "tau0": None if np.isinf(b.tau0) else float(b.tau0),
        }
    return out


def dt_certificate_from_dict(payload):
    from .schemes import ConsistencyBound, Scheme

    rho_desc = None
    if payload.get("rho_desc"):
        rd = payload["rho_desc"]
        rho_desc = ConsistencyBound(
            scheme=Scheme(rd["scheme"]),
            L_f=float(rd["L_f"]),
            sigma_slope=float(rd["sigma_slope"]),
            tau0=float("inf") if rd.get("tau0") is None else float(rd["tau0"]),
        )
    try:
        return DtCertificate(
            P=SymMatrix.from_full(_square(payload["P"])),
            Qt=SymMatrix.from_full(_square(payload["Qt"])),
            Rt=SymMatrix.from_full(_square(payload["Rt"])),
            eta=float(payload["eta"]),
            tau=float(payload["tau"]),
            tau1=float(payload["tau1"]),
            rho_desc=rho_desc,
        )
    except KeyError as exc:
        raise CertificateError(f"DT certificate JSON missing key {exc}") from None
