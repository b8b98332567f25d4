"""HTTP API tests driven through the in-process test client.

A zero-weight model gives exact expected outputs (uniform probabilities,
all-zero saliency); a seeded random model covers the live-normalization
and digest-change cases.  Design jobs run tiny PBIL configurations so the
polling paths finish quickly.
"""

import base64
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from dlsp.nn import ArchSpec, build_model, save_weights
from dlsp.server import build_app
from dlsp.structures import make_bilayer


def payload(values):
    q = np.clip(np.rint(np.asarray(values, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    return {
        "height": q.shape[0],
        "width": q.shape[1],
        "grid_b64": base64.b64encode(q.tobytes()).decode("ascii"),
    }


@pytest.fixture(scope="module")
def zero_weights(tmp_path_factory):
    model = build_model(ArchSpec(), seed=0)
    zeroed = {k: np.zeros_like(v) for k, v in model.params.items()}
    path = tmp_path_factory.mktemp("w") / "zero.w"
    save_weights(type(model)(model.arch, zeroed), path)
    return path


@pytest.fixture(scope="module")
def random_weights(tmp_path_factory):
    path = tmp_path_factory.mktemp("w") / "rand.w"
    save_weights(build_model(ArchSpec(), seed=1), path)
    return path


@pytest.fixture(scope="module")
def client(zero_weights):
    return TestClient(build_app(model_path=zero_weights))


@pytest.fixture(scope="module")
def live_client(random_weights):
    return TestClient(build_app(model_path=random_weights))


def poll_until_settled(client, job_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        r = client.get(f"/api/design/{job_id}")
        assert r.status_code == 200
        body = r.json()
        if body["status"] != "running":
            return body
        time.sleep(0.1)
    raise AssertionError(f"job {job_id} still running after {timeout}s")


# ---------------------------------------------------------------------------
# health


def test_health_ok_and_stable_digest(client):
    a = client.get("/api/health").json()
    b = client.get("/api/health").json()
    assert a["status"] == "ok"
    assert a["model_digest"] == b["model_digest"]
    assert len(a["model_digest"]) == 64


def test_digest_tracks_weights_file(client, live_client):
    a = client.get("/api/health").json()["model_digest"]
    b = live_client.get("/api/health").json()["model_digest"]
    assert a != b


# ---------------------------------------------------------------------------
# predict


def test_predict_zero_model_uniform(client):
    r = client.post("/api/predict", json=payload(np.zeros((101, 101))))
    assert r.status_code == 200
    body = r.json()
    assert body["class"] == 0
    assert len(body["probs"]) == 10
    np.testing.assert_allclose(body["probs"], 0.1, atol=1e-9)


def test_predict_probs_sum_to_one(live_client):
    r = live_client.post("/api/predict", json=payload(make_bilayer(50).values))
    assert r.status_code == 200
    assert abs(sum(r.json()["probs"]) - 1.0) < 1e-6


def test_predict_short_payload_400(client):
    body = {"height": 101, "width": 101,
            "grid_b64": base64.b64encode(b"\x00" * 100).decode("ascii")}
    r = client.post("/api/predict", json=body)
    assert r.status_code == 400


def test_predict_wrong_dims_400(client):
    r = client.post("/api/predict", json=payload(np.zeros((50, 50))))
    assert r.status_code == 400


def test_predict_bad_base64_400(client):
    r = client.post("/api/predict", json={"height": 2, "width": 2, "grid_b64": "@@@@"})
    assert r.status_code == 400


def test_predict_missing_field_422(client):
    r = client.post("/api/predict", json={"height": 101, "width": 101})
    assert r.status_code == 422  # schema-level rejection


def test_predict_is_pure(live_client):
    body = payload(make_bilayer(30).values)
    a = live_client.post("/api/predict", json=body)
    b = live_client.post("/api/predict", json=body)
    assert a.content == b.content


def test_predict_no_model_503(tmp_path):
    bare = TestClient(build_app(model_path=None))
    r = bare.post("/api/predict", json=payload(np.zeros((101, 101))))
    assert r.status_code == 503


# ---------------------------------------------------------------------------
# saliency


def test_saliency_zero_model_zero_map(client):
    r = client.post("/api/saliency", json=payload(np.zeros((101, 101))))
    assert r.status_code == 200
    body = r.json()
    assert body["height"] == 101 and body["width"] == 101
    raw = base64.b64decode(body["map_b64"])
    assert len(raw) == 101 * 101
    assert set(raw) == {0}


def test_saliency_live_model_hits_255(live_client):
    r = live_client.post("/api/saliency", json=payload(make_bilayer(50).values))
    raw = base64.b64decode(r.json()["map_b64"])
    assert max(raw) == 255  # max-normalized map must quantize to a full-scale byte


def test_saliency_explicit_target(live_client):
    a = live_client.post("/api/saliency", json={**payload(make_bilayer(50).values), "target": 3})
    assert a.status_code == 200


def test_saliency_bad_target_400(live_client):
    r = live_client.post("/api/saliency", json={**payload(make_bilayer(50).values), "target": 99})
    assert r.status_code == 400


# ---------------------------------------------------------------------------
# oracle


def test_oracle_all_donor_zero(client):
    r = client.post("/api/oracle", json=payload(np.ones((101, 101))))
    assert r.status_code == 200
    body = r.json()
    assert body["jsc"] == 0.0
    assert body["class"] == 0
    assert set(body) == {"jsc", "proxy", "eta_diss", "eta_transport", "class"}


def test_oracle_matches_module_on_bilayer(client):
    # The API must return exactly what the library computes; the slab
    # formula comparison itself lives in the acceptance suite.
    from dlsp.morpho import Morphology
    from dlsp.oracle import evaluate

    g = np.rint(make_bilayer(50).values * 255.0) / 255.0  # byte-quantized like the payload
    r = client.post("/api/oracle", json=payload(g))
    assert r.status_code == 200
    body = r.json()
    direct = evaluate(Morphology(values=g))
    assert body["jsc"] == direct.jsc
    assert body["eta_diss"] == direct.eta_diss
    assert body["eta_transport"] == direct.eta_transport


def test_oracle_mirror_invariance(client):
    g = make_bilayer(40).values
    a = client.post("/api/oracle", json=payload(g)).json()["jsc"]
    b = client.post("/api/oracle", json=payload(g[:, ::-1])).json()["jsc"]
    assert abs(a - b) < 1e-6


def test_oracle_any_square_size(client):
    r = client.post("/api/oracle", json=payload(np.ones((31, 31))))
    assert r.status_code == 200  # oracle has no fixed input size


# ---------------------------------------------------------------------------
# design jobs


def test_design_job_runs_to_done(client):
    r = client.post("/api/design/start",
                    json={"init": "bilayer", "params": {"n": 6, "n_b": 2, "max_iters": 2}})
    assert r.status_code == 200
    job_id = r.json()["job_id"]

    body = poll_until_settled(client, job_id)
    assert body["status"] == "done"
    assert body["iteration"] == 2
    assert len(body["fitness_history"]) == 2
    assert body["P"]["height"] == 101 and body["P"]["width"] == 101
    assert len(base64.b64decode(body["best"]["grid_b64"])) == 101 * 101
    bests = [row[1] for row in body["fitness_history"]]
    assert bests == sorted(bests)  # elitism keeps best fitness monotone


def test_design_zero_iters_done_immediately(client):
    r = client.post("/api/design/start", json={"init": "uniform", "params": {"max_iters": 0}})
    body = poll_until_settled(client, r.json()["job_id"])
    assert body["status"] == "done"
    assert body["iteration"] == 0
    assert body["fitness_history"] == []


def test_design_grid_init(client):
    r = client.post("/api/design/start",
                    json={"init": payload(make_bilayer(30).values),
                          "params": {"n": 6, "n_b": 2, "max_iters": 1}})
    assert r.status_code == 200
    body = poll_until_settled(client, r.json()["job_id"])
    assert body["status"] == "done"


def test_design_unknown_id_404(client):
    assert client.get("/api/design/doesnotexist").status_code == 404
    assert client.delete("/api/design/doesnotexist").status_code == 404


def test_design_unknown_param_400(client):
    r = client.post("/api/design/start", json={"params": {"porpulation": 5}})
    assert r.status_code == 400
    assert "porpulation" in r.json()["detail"]


def test_design_bad_param_value_400(client):
    r = client.post("/api/design/start", json={"params": {"n": 2, "n_b": 9}})
    assert r.status_code == 400


def test_design_bad_init_400(client):
    r = client.post("/api/design/start", json={"init": "swirl"})
    assert r.status_code == 400


def test_design_cancel(client):
    r = client.post("/api/design/start",
                    json={"params": {"n": 40, "max_iters": 2000, "improvement_tol": 0.0}})
    job_id = r.json()["job_id"]
    r = client.delete(f"/api/design/{job_id}")
    assert r.status_code == 200
    body = poll_until_settled(client, job_id)
    assert body["status"] == "failed"
    assert body["error"] == "cancelled"


def test_design_job_cap_429(zero_weights):
    capped = TestClient(build_app(model_path=zero_weights, max_jobs=1))
    first = capped.post("/api/design/start",
                        json={"params": {"n": 40, "max_iters": 2000, "improvement_tol": 0.0}})
    assert first.status_code == 200
    second = capped.post("/api/design/start", json={"params": {"max_iters": 1}})
    assert second.status_code == 429
    capped.delete(f"/api/design/{first.json()['job_id']}")
    poll_until_settled(capped, first.json()["job_id"])
    third = capped.post("/api/design/start", json={"params": {"n": 6, "n_b": 2, "max_iters": 0}})
    assert third.status_code == 200
