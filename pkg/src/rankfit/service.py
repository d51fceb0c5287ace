"""HTTP facade for interactive what-if exploration.

Upload a dataset once, then iterate: solve, inspect the explanation, add a
weight constraint, re-solve, and compare reports side by side.  Jobs run on a
bounded worker pool (one active solve per dataset) and are cancelable; the
report history per dataset is append-only.
"""
from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .approx import cell_solve
from .engine import SolverConfig
from .evaluate import ExplanationReport, solve_with_escalation
from .formulate import EpsilonConfig, ProblemSpec, WeightPredicate, parse_weight_predicate
from .model import GivenRanking, Relation, WeightVector, load_relation_text, parse_ranking_text

DEFAULT_MAX_ROWS = 100_000


class DatasetUpload(BaseModel):
    name: str = "dataset"
    csv: str
    ranking: str
    dedup: bool = False


class CellOptions(BaseModel):
    strategy: str = "ordreg"
    size: float = 0.01
    samples: int = 1000
    window: int | None = None
    weights: dict[str, float] | None = None


class SolveRequest(BaseModel):
    mode: str = "opt"
    k: int
    constraints: list[str] = Field(default_factory=list)
    importance: dict[str, float] = Field(default_factory=dict)
    eps: dict[str, float] = Field(default_factory=dict)
    objective: str = "sum"
    timeLimit: float | None = None
    cell: CellOptions | None = None
    label: str = ""


@dataclass
class _Dataset:
    id: str
    name: str
    relation: Relation
    ranking: GivenRanking


@dataclass
class _Job:
    id: str
    dataset_id: str
    request: SolveRequest
    status: str = "queued"
    report: dict | None = None
    error: str | None = None
    cancel: threading.Event = field(default_factory=threading.Event)


class ExplorationService:
    """In-memory dataset/job store plus the solving worker pool."""

    def __init__(self, max_rows: int = DEFAULT_MAX_ROWS, workers: int = 2):
        self.max_rows = max_rows
        self._lock = threading.Lock()
        self._datasets: dict[str, _Dataset] = {}
        self._jobs: dict[str, _Job] = {}
        self._history: dict[str, list[dict]] = {}
        self._active: dict[str, str] = {}
        self._pool = ThreadPoolExecutor(max_workers=workers)

    # -- datasets ---------------------------------------------------------

    def add_dataset(self, upload: DatasetUpload) -> _Dataset:
        try:
            relation = load_relation_text(upload.csv, dedup=upload.dedup)
            ranking = parse_ranking_text(upload.ranking)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc
        if relation.n > self.max_rows:
            raise HTTPException(400, f"dataset exceeds the {self.max_rows}-row cap")
        if set(ranking.order) != set(relation.ids):
            raise HTTPException(400, "ranking must be a permutation of the relation's ids")
        ds = _Dataset(uuid.uuid4().hex[:12], upload.name, relation, ranking)
        with self._lock:
            self._datasets[ds.id] = ds
            self._history[ds.id] = []
        return ds

    def dataset(self, dataset_id: str) -> _Dataset:
        with self._lock:
            ds = self._datasets.get(dataset_id)
        if ds is None:
            raise HTTPException(404, "unknown dataset")
        return ds

    def drop_dataset(self, dataset_id: str):
        with self._lock:
            if dataset_id not in self._datasets:
                raise HTTPException(404, "unknown dataset")
            self._datasets.pop(dataset_id)
            self._history.pop(dataset_id, None)
            active = self._active.pop(dataset_id, None)
        if active:
            self.cancel_job(active, missing_ok=True)

    # -- jobs ----------------------------------------------------------------

    def submit(self, dataset_id: str, request: SolveRequest) -> _Job:
        ds = self.dataset(dataset_id)
        spec = self._build_spec(ds, request)  # validate before queueing
        job = _Job(uuid.uuid4().hex[:12], dataset_id, request)
        with self._lock:
            active = self._active.get(dataset_id)
            if active and self._jobs[active].status in ("queued", "running"):
                raise HTTPException(409, f"job {active} still running for this dataset")
            self._jobs[job.id] = job
            self._active[dataset_id] = job.id
        self._pool.submit(self._run_job, job, ds, spec)
        return job

    def job(self, job_id: str) -> _Job:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise HTTPException(404, "unknown job")
        return job

    def cancel_job(self, job_id: str, missing_ok: bool = False):
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            if missing_ok:
                return None
            raise HTTPException(404, "unknown job")
        job.cancel.set()
        return job

    def history(self, dataset_id: str) -> list[dict]:
        self.dataset(dataset_id)
        with self._lock:
            return list(self._history[dataset_id])

    # -- internals -------------------------------------------------------

    def _build_spec(self, ds: _Dataset, request: SolveRequest) -> ProblemSpec:
        if request.mode not in ("sat", "opt", "cell"):
            raise HTTPException(400, f"unknown mode {request.mode!r}")
        try:
            predicate = (parse_weight_predicate(request.constraints, ds.relation.columns)
                         if request.constraints else WeightPredicate.empty())
            eps = EpsilonConfig(
                tau=request.eps.get("tau", 1e-9),
                eps1=request.eps.get("eps1", 1e-4),
                eps2=request.eps.get("eps2", 0.0),
            )
            return ProblemSpec(ds.relation, ds.ranking, request.k, predicate=predicate,
                               importance=request.importance, eps=eps,
                               objective=request.objective)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc

    def _run_job(self, job: _Job, ds: _Dataset, spec: ProblemSpec):
        job.status = "running"
        config = SolverConfig(time_limit=job.request.timeLimit, cancel_event=job.cancel)
        try:
            if job.request.mode == "sat":
                report = solve_with_escalation(spec, "sat", config=config)
            elif job.request.mode == "opt":
                report = solve_with_escalation(spec, "opt", config=config)
            else:
                cell = job.request.cell or CellOptions()
                weights = None
                if cell.weights is not None:
                    weights = WeightVector.normalized(
                        [cell.weights.get(c, 0.0) for c in ds.relation.columns])
                report = cell_solve(spec, strategy=cell.strategy, cell_size=cell.size,
                                    samples=cell.samples, window=cell.window,
                                    weights=weights, config=config)
            report.context.setdefault("label", job.request.label)
            report.context["constraints"] = list(job.request.constraints)
            report.context["mode"] = job.request.mode
            job.report = report.to_dict()
            job.status = "cancelled" if job.cancel.is_set() else "done"
            if job.status == "done":
                with self._lock:
                    if job.dataset_id in self._history:
                        self._history[job.dataset_id].append(job.report)
        except Exception as exc:  # surfaced via the job endpoint
            job.error = str(exc)
            job.status = "failed"


def create_app(service: ExplorationService | None = None,
               static_dir: str | Path | None = None) -> FastAPI:
    service = service or ExplorationService()
    app = FastAPI(title="rankfit exploration service")
    app.state.service = service

    @app.post("/datasets")
    def upload(body: DatasetUpload):
        ds = service.add_dataset(body)
        return {
            "id": ds.id,
            "name": ds.name,
            "columns": list(ds.relation.columns),
            "n": ds.relation.n,
            "m": ds.relation.m,
        }

    @app.get("/datasets/{dataset_id}")
    def dataset_info(dataset_id: str, preview: int = 50):
        ds = service.dataset(dataset_id)
        head = ds.ranking.order[:preview]
        return {
            "id": ds.id,
            "name": ds.name,
            "columns": list(ds.relation.columns),
            "n": ds.relation.n,
            "m": ds.relation.m,
            "ranking_preview": [
                {"id": t, "rank": ds.ranking.rank_of(t),
                 "attrs": list(ds.relation[t].attrs)}
                for t in head
            ],
        }

    @app.delete("/datasets/{dataset_id}")
    def drop(dataset_id: str):
        service.drop_dataset(dataset_id)
        return {"deleted": dataset_id}

    @app.post("/datasets/{dataset_id}/solve")
    def solve(dataset_id: str, body: SolveRequest):
        job = service.submit(dataset_id, body)
        return {"job": job.id}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = service.job(job_id)
        out = {"id": job.id, "dataset": job.dataset_id, "status": job.status}
        if job.report is not None:
            out["report"] = job.report
        if job.error is not None:
            out["error"] = job.error
        return out

    @app.delete("/jobs/{job_id}")
    def cancel(job_id: str):
        job = service.cancel_job(job_id)
        return {"id": job.id, "status": job.status, "cancelling": True}

    @app.get("/datasets/{dataset_id}/explanations")
    def explanations(dataset_id: str):
        return {"reports": service.history(dataset_id)}

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def main():  # pragma: no cover - manual launcher
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="run the exploration service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument("--static", default=None, help="directory with the built web UI")
    args = parser.parse_args()
    uvicorn.run(create_app(static_dir=args.static), host=args.host, port=args.port)


if __name__ == "__main__":  # pragma: no cover
    main()
