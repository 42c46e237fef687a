import pytest
from fastapi.testclient import TestClient

from nozzleflow.service import create_app

SMALL = {"solver.n1": 65, "solver.n2": 16}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


class TestHealth:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"


class TestBackground:
    def test_background(self, client):
        r = client.post("/background", json={"config": SMALL})
        assert r.status_code == 200
        body = r.json()
        assert body["csv"].splitlines()[0] == \
            "x1,n,u_b,rho_b,c_b,mach,tau,k_b,alpha,d1k_b"
        assert len(body["csv"].splitlines()) == 65 + 1
        assert body["report"]["mach_entry"] == pytest.approx(0.6924, abs=1e-3)
        assert body["report"]["mass_flux_residual"] <= 1e-10


class TestVerify:
    def test_verify_passes_on_defaults(self, client):
        r = client.post("/verify", json={"config": SMALL})
        assert r.status_code == 200
        body = r.json()
        assert body["passed"] is True
        assert "pass" in body["table"]
        assert body["coefficients_csv"].splitlines()[4] == "x1,x2,k,b,a,alpha_h,rhs"
        assert body["coefficients_csv"].splitlines()[5].startswith("-1,")


class TestSolveLinear:
    def test_solve_linear(self, client):
        r = client.post("/solve-linear", json={"config": SMALL, "rhs_mode": "h"})
        assert r.status_code == 200
        body = r.json()
        assert body["field_csv"].splitlines()[0] == "x1,x2,value"
        assert body["report"]["energy_ratio"] > 0


class TestSolve:
    def test_solve_small(self, client):
        cfg = dict(SMALL)
        cfg["g.mode.1"] = 1e-3
        r = client.post("/solve", json={"config": cfg})
        assert r.status_code == 200
        body = r.json()
        assert body["report"]["converged"] == "true"
        assert float(body["report"]["stability_ratio"]) > 0
        assert body["solution_csv"].splitlines()[0] == "x1,x2,value"


class TestSweep:
    def test_sweep_two_eps(self, client):
        r = client.post("/sweep", json={"config": SMALL,
                                        "eps_list": [3e-4, 1e-4]})
        assert r.status_code == 200
        body = r.json()
        assert len(body["rows"]) == 2
        assert body["rows"][0]["eps"] == pytest.approx(3e-4)


class TestErrorMapping:
    def test_config_error_400(self, client):
        r = client.post("/background", json={"config": {"gas.gamma": 0.5}})
        assert r.status_code == 400
        assert r.json()["error_type"] == "RangeError"

    def test_unknown_key_400(self, client):
        r = client.post("/background", json={"config": {"nozle.n0": 1}})
        assert r.status_code == 400
        assert r.json()["error_type"] == "UnknownKeyError"

    def test_solver_error_422(self, client):
        cfg = dict(SMALL)
        cfg["g.mode.1"] = 0.5  # ||g||_5 far beyond eps0
        r = client.post("/solve", json={"config": cfg})
        assert r.status_code == 422
        assert r.json()["error_type"] == "KappaExceeded"
