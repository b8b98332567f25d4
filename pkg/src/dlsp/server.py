"""HTTP service for real-time prediction, saliency, oracle checks, and
background design jobs.

Grids travel as base64 byte strings (one byte per pixel, round(value*255)),
which keeps painting-rate payloads an order of magnitude smaller than JSON
number arrays.  Everything is stateless except the design-job store; jobs
run on daemon threads and are polled, never pushed.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import threading
import uuid
from dataclasses import fields, replace

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .design import PbilParams, PbilState, cnn_expected_class, pbil_init, pbil_run
from .interpret import saliency
from .morpho import BinningSpec, Morphology, assign_class, load_binning
from .nn import ArchSpec, load_weights
from .nn.model import predict_proba
from .oracle import OracleParams, SolverDiverged, evaluate
from .structures import make_bilayer


class GridPayload(BaseModel):
    height: int
    width: int
    grid_b64: str


class SaliencyRequest(GridPayload):
    target: int | None = None


class DesignRequest(BaseModel):
    init: GridPayload | str = "bilayer"
    params: dict = {}


def decode_grid(p: GridPayload) -> np.ndarray:
    if p.height < 1 or p.width < 1:
        raise HTTPException(400, "height and width must be positive")
    try:
        raw = base64.b64decode(p.grid_b64, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(400, "grid_b64 is not valid base64")
    if len(raw) != p.height * p.width:
        raise HTTPException(400, f"grid has {len(raw)} bytes, want {p.height * p.width}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(p.height, p.width) / 255.0


def encode_grid(values: np.ndarray) -> GridPayload:
    q = np.clip(np.rint(np.asarray(values, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    return GridPayload(height=q.shape[0], width=q.shape[1],
                       grid_b64=base64.b64encode(q.tobytes()).decode("ascii"))


class DesignJob:
    """One background PBIL run; every read goes through the lock so a poll
    never sees iteration, history, and grids from different iterations."""

    def __init__(self, job_id: str):
        self.id = job_id
        self.lock = threading.Lock()
        self.status = "running"
        self.error = None
        self.cancelled = threading.Event()
        self.state: PbilState | None = None

    def snapshot(self) -> dict:
        with self.lock:
            out = {"id": self.id, "status": self.status, "error": self.error}
            if self.state is not None:
                out["iteration"] = self.state.iteration
                out["fitness_history"] = [list(row) for row in self.state.fitness_history]
                out["best_fitness"] = self.state.best_fitness
                out["P"] = encode_grid(self.state.P).model_dump()
                out["best"] = encode_grid(self.state.best_sample.donor_mask.astype(np.float64)).model_dump()
            else:
                out["iteration"] = 0
                out["fitness_history"] = []
            return out


class _Cancelled(Exception):
    pass


def build_app(model_path=None, binning_path=None, max_jobs: int = 4, static_dir=None) -> FastAPI:
    app = FastAPI(title="dlsp")

    model = load_weights(model_path, ArchSpec()) if model_path is not None else None
    digest = hashlib.sha256(open(model_path, "rb").read()).hexdigest() if model_path is not None else None
    binning = load_binning(binning_path) if binning_path is not None else BinningSpec(0.0, 1.0)
    oracle_params = OracleParams()
    jobs: dict[str, DesignJob] = {}
    jobs_lock = threading.Lock()

    def require_model():
        if model is None:
            raise HTTPException(503, "no model loaded")
        return model

    def grid_for_model(p: GridPayload) -> np.ndarray:
        m = require_model()
        grid = decode_grid(p)
        want = m.arch.input_size
        if grid.shape != (want, want):
            raise HTTPException(400, f"model wants {want}x{want}, got {p.height}x{p.width}")
        return grid

    @app.get("/api/health")
    def health():
        return {"status": "ok", "model_digest": digest}

    @app.post("/api/predict")
    def predict_endpoint(p: GridPayload):
        grid = grid_for_model(p)
        probs = predict_proba(require_model(), grid[None, :, :, None])[0]
        return {"class": int(np.argmax(probs)), "probs": [float(v) for v in probs]}

    @app.post("/api/saliency")
    def saliency_endpoint(p: SaliencyRequest):
        grid = grid_for_model(p)
        try:
            sal = saliency(require_model(), grid, p.target)
        except ValueError as e:
            raise HTTPException(400, str(e))
        out = encode_grid(sal)
        return {"map_b64": out.grid_b64, "height": out.height, "width": out.width}

    @app.post("/api/oracle")
    def oracle_endpoint(p: GridPayload):
        grid = decode_grid(p)
        try:
            res = evaluate(Morphology(values=grid), oracle_params)
        except SolverDiverged as e:
            raise HTTPException(422, str(e))
        return {
            "jsc": res.jsc,
            "proxy": res.proxy,
            "eta_diss": res.eta_diss,
            "eta_transport": res.eta_transport,
            "class": assign_class(res.jsc, binning),
        }

    def run_job(job: DesignJob, init, params: PbilParams):
        fitness = cnn_expected_class(require_model())

        def on_iteration(state, row):
            with job.lock:
                job.state = state
            if job.cancelled.is_set():
                raise _Cancelled

        try:
            start = pbil_init(init, params, fitness)
            with job.lock:
                job.state = start
            if job.cancelled.is_set():
                raise _Cancelled
            final, _ = pbil_run(start, params, fitness, on_iteration=on_iteration)
            with job.lock:
                if job.status == "running":
                    job.state = final
                    job.status = "done"
        except _Cancelled:
            with job.lock:
                if job.status == "running":
                    job.status = "failed"
                    job.error = "cancelled"
        except Exception as e:
            with job.lock:
                if job.status == "running":
                    job.status = "failed"
                    job.error = f"{type(e).__name__}: {e}"

    @app.post("/api/design/start")
    def design_start(req: DesignRequest):
        require_model()
        if isinstance(req.init, GridPayload):
            init = Morphology(values=decode_grid(req.init))
        elif req.init == "bilayer":
            init = make_bilayer(50)
        elif req.init == "uniform":
            init = "uniform"
        else:
            raise HTTPException(400, f"init must be a grid, 'bilayer', or 'uniform', got {req.init!r}")

        known = {f.name for f in fields(PbilParams)}
        unknown = set(req.params) - known
        if unknown:
            raise HTTPException(400, f"unknown PBIL params: {sorted(unknown)}")
        try:
            params = replace(PbilParams(), **req.params)
        except (TypeError, ValueError) as e:
            raise HTTPException(400, str(e))

        with jobs_lock:
            running = sum(1 for j in jobs.values() if j.status == "running")
            if running >= max_jobs:
                raise HTTPException(429, f"{running} jobs already running (cap {max_jobs})")
            job = DesignJob(uuid.uuid4().hex[:12])
            jobs[job.id] = job
        threading.Thread(target=run_job, args=(job, init, params), daemon=True).start()
        return {"job_id": job.id}

    def get_job(job_id: str) -> DesignJob:
        with jobs_lock:
            job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"no such job: {job_id}")
        return job

    @app.get("/api/design/{job_id}")
    def design_get(job_id: str):
        return get_job(job_id).snapshot()

    @app.delete("/api/design/{job_id}")
    def design_cancel(job_id: str):
        job = get_job(job_id)
        job.cancelled.set()
        with job.lock:
            if job.status == "running":  # worker may not have noticed yet
                job.status = "failed"
                job.error = "cancelled"
        return job.snapshot()

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
