import inspect

import pytest
from fastapi.routing import APIRoute
from fastapi.testclient import TestClient

from main import app
from services.model_library import mm1_model, two_type_model

client = TestClient(app)


def test_root():
    response = client.get("/")
    assert response.status_code == 200
    assert "version" in response.json()


def test_api_handlers_are_coroutines():
    handlers = [route for route in app.routes if isinstance(route, APIRoute) and route.path.startswith("/api")]
    assert len(handlers) == 7
    assert all(inspect.iscoroutinefunction(route.endpoint) for route in handlers)


class TestSolverRoutes:
    def test_solve(self):
        response = client.post("/api/solver/solve", json={"model": mm1_model().document()})
        assert response.status_code == 200
        body = response.json()
        assert body["solution"]["f0"] == [pytest.approx(0.5)]
        assert body["means"][0]["mean"] == pytest.approx(1.0, abs=1e-8)
        assert body["pmfs"] == []

    def test_pmf_with_fixed_truncation(self):
        payload = {"model": mm1_model().document(), "epochs": ["departure", "arbitrary"], "truncation": 64}
        response = client.post("/api/solver/pmf", json=payload)
        assert response.status_code == 200
        pmfs = response.json()["pmfs"]
        assert [pmf["epoch"] for pmf in pmfs] == ["departure", "arbitrary"]
        assert len(pmfs[0]["probabilities"]) == 65
        assert pmfs[0]["probabilities"][2] == pytest.approx(0.125, abs=1e-8)

    def test_invalid_model_is_422_with_path(self):
        document = mm1_model().document()
        document["G"][0][0]["weight"] = 0.9
        response = client.post("/api/solver/solve", json={"model": document})
        assert response.status_code == 422
        assert response.json()["path"] == "G[0]"

    def test_unstable_model_is_409(self):
        response = client.post("/api/solver/solve", json={"model": mm1_model(lam=2.0).document()})
        assert response.status_code == 409
        assert response.json()["error"] == "UnstableModelError"

    def test_sweep_needs_one_grid(self):
        response = client.post("/api/solver/sweep", json={"model": mm1_model().document()})
        assert response.status_code == 422

    def test_sweep_by_rho(self):
        response = client.post("/api/solver/sweep", json={"model": mm1_model().document(), "rhos": [0.5]})
        assert response.status_code == 200
        row = response.json()["rows"][0]
        assert row["lambda"] == pytest.approx(0.5)
        assert row["mean_departure"] == pytest.approx(1.0, abs=1e-8)
        assert row["ht_mean"] == pytest.approx(1.0)


class TestHeavyTrafficRoutes:
    def test_rate(self):
        response = client.post("/api/heavy-traffic/rate", json={"model": two_type_model(0.02).document()})
        assert response.status_code == 200
        body = response.json()
        assert body["valid"] is True
        assert abs(body["independence_condition"]) < 1e-5

    def test_density_rejects_few_bins(self):
        payload = {"model": mm1_model().document(), "rho": 0.5, "bins": 5}
        assert client.post("/api/heavy-traffic/density", json=payload).status_code == 422

    def test_density(self):
        payload = {"model": mm1_model().document(), "rho": 0.5, "bins": 10}
        response = client.post("/api/heavy-traffic/density", json=payload)
        assert response.status_code == 200
        assert len(response.json()["rows"]) == 10


class TestSimulationRoutes:
    def test_run(self):
        payload = {"model": mm1_model().document(), "seed": 3, "departures": 5000}
        response = client.post("/api/simulation/run", json=payload)
        assert response.status_code == 200
        body = response.json()
        assert body["seed"] == 3
        assert {row["epoch"] for row in body["epochs"]} == {"departure", "batch-arrival", "customer-arrival", "arbitrary"}

    def test_rejects_short_runs(self):
        payload = {"model": mm1_model().document(), "departures": 10}
        assert client.post("/api/simulation/run", json=payload).status_code == 422
