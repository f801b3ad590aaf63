import math

import pytest
from fastapi.testclient import TestClient

from iosscert.service import app

client = TestClient(app)

SCALAR_GRID = {"axes": [{"lo": -1, "hi": 1, "count": 11},
                        {"lo": -1, "hi": 1, "count": 11}]}
UNIT_CERT = {"P": [[1.0]], "Q": [[1.0]], "R": [[1.0]], "kappa": 1.0}


def test_health():
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_builtins_listing():
    r = client.get("/builtins")
    assert r.status_code == 200
    names = [m["name"] for m in r.json()["models"]]
    assert names == ["reactor", "scalar_linear", "sine", "zero"]
    reactor = next(m for m in r.json()["models"] if m["name"] == "reactor")
    assert (reactor["n"], reactor["q"], reactor["m"], reactor["p"]) == (2, 3, 0, 1)
    assert "dims 2 3 0 1" in reactor["text"]


def test_check_ct_certified():
    r = client.post("/check-ct", json={
        "model": {"builtin": "scalar_linear"},
        "grid": SCALAR_GRID,
        "certificate": UNIT_CERT,
    })
    assert r.status_code == 200
    body = r.json()
    assert body["certified"] is True
    assert body["report"]["violations"] == 0
    assert body["report"]["worst_lambda_max"] == pytest.approx(
        (-3 + math.sqrt(5)) / 2, abs=1e-12)


def test_check_ct_violated():
    cert = dict(UNIT_CERT, kappa=10.0)
    r = client.post("/check-ct", json={
        "model": {"builtin": "scalar_linear"}, "grid": SCALAR_GRID,
        "certificate": cert,
    })
    assert r.json()["certified"] is False
    assert r.json()["report"]["violations"] == 121


def test_check_ct_model_text():
    r = client.post("/check-ct", json={
        "model": {"text": "dims 1 1 0 1\nf1 = -x1 + u1\nh1 = x1\n", "name": "inline"},
        "grid": SCALAR_GRID,
        "certificate": UNIT_CERT,
    })
    assert r.status_code == 200
    assert r.json()["certified"] is True


def test_bad_model_is_400():
    r = client.post("/check-ct", json={
        "model": {"text": "dims 1 1 0 1\nf1 = x9\nh1 = x1\n"},
        "grid": SCALAR_GRID,
        "certificate": UNIT_CERT,
    })
    assert r.status_code == 400
    assert "undeclared variable x9" in r.json()["detail"]


def test_model_source_exclusivity():
    r = client.post("/check-ct", json={
        "model": {"builtin": "scalar_linear", "text": "dims 1 0 0 1\nf1 = x1\nh1 = x1\n"},
        "grid": SCALAR_GRID,
        "certificate": UNIT_CERT,
    })
    assert r.status_code == 422  # pydantic validation


def test_dimension_mismatch_is_400():
    r = client.post("/check-ct", json={
        "model": {"builtin": "reactor"}, "grid": SCALAR_GRID,
        "certificate": UNIT_CERT,
    })
    assert r.status_code == 400


def test_transfer_roundtrip_and_dt_check():
    r = client.post("/transfer", json={
        "model": {"builtin": "scalar_linear"}, "grid": SCALAR_GRID,
        "certificate": UNIT_CERT, "scheme": "euler", "tau": 0.1,
    })
    assert r.status_code == 200
    body = r.json()
    assert body["ok"] is True
    assert body["tau1"] == 0.5
    assert body["eta"] == 0.92
    assert body["binding_constraint"] == "alpha_inv"
    assert body["dt_check"]["violations"] == 0
    assert body["lyapunov"]["violations"] == 0
    assert body["consistency"]["bound_satisfied"] is True
    dt_cert = body["dt_certificate"]
    assert dt_cert["Qt"] == [[0.12]]
    assert dt_cert["rho_desc"]["tau0"] is None  # Euler: unbounded, JSON null

    # feed the emitted DT certificate straight into /check-dt
    r2 = client.post("/check-dt", json={
        "model": {"builtin": "scalar_linear"}, "grid": SCALAR_GRID,
        "dt_certificate": dt_cert, "scheme": "euler",
    })
    assert r2.status_code == 200
    assert r2.json()["certified"] is True


def test_transfer_tau_too_large():
    r = client.post("/transfer", json={
        "model": {"builtin": "scalar_linear"}, "grid": SCALAR_GRID,
        "certificate": UNIT_CERT, "scheme": "euler", "tau": 0.6,
    })
    body = r.json()
    assert body["ok"] is False
    assert "not below tau1" in body["error"]
    assert body["binding_constraint"] == "alpha_inv"


def test_consistency_endpoint():
    r = client.post("/consistency", json={
        "model": {"builtin": "scalar_linear"}, "grid": SCALAR_GRID,
        "scheme": "rk2", "taus": [0.1, 0.05],
    })
    assert r.status_code == 200
    body = r.json()
    assert body["ok"] is True
    assert len(body["per_tau"]) == 2
    assert body["per_tau"][0]["max_defect"] == pytest.approx(0.05, rel=1e-9)


def test_synth_endpoint():
    r = client.post("/synth", json={
        "model": {"builtin": "scalar_linear"}, "grid": SCALAR_GRID,
        "options": {"max_iters": 400},
    })
    assert r.status_code == 200
    body = r.json()
    assert body["feasible"] is True
    assert body["verification"]["violations"] == 0
    assert body["synth_log"]


def test_bench_endpoint_small():
    r = client.post("/bench", json={"points_per_axis": 5, "repeats": 1})
    assert r.status_code == 200
    body = r.json()
    assert body["ct_axes"] == ["x1"]
    assert body["adt_axes"] == ["x1", "x2", "u1"]
    assert body["ratio"] > 0


def test_grid_text_source():
    r = client.post("/check-ct", json={
        "model": {"builtin": "scalar_linear"},
        "grid": {"text": "-1 1 5\n-1 1 5\n"},
        "certificate": UNIT_CERT,
    })
    assert r.status_code == 200
    assert r.json()["report"]["total_points"] == 25
