"""HTTP facade over the audit pipeline.

One directory per session holds every artifact; repeating a completed POST
with an identical body returns the stored artifact instead of recomputing.
Training runs in a background thread and is polled via /jobs/{job_id};
everything else is synchronous at desk scale.
"""

from __future__ import annotations

import tempfile
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .audit import ALL_MEASURES, AuditConfig, MEASURES
from .explain import ExplainError, ExplanationQuery
from .ingest import IngestError, SensitiveAttributeSpec
from .matchers import (
    BUILTIN_KINDS,
    MATCHER_DESCRIPTIONS,
    ScoreFileError,
    UntrainableError,
)
from .resolve import DEFAULT_ENUMERATION_CAP, ResolutionConfig, ResolveError
from .session import Session, SessionError, WorkflowError
from .synth import PROFILES, generate

import json


class MatchRequest(BaseModel):
    matcher_ids: list[str]
    seed: int = 0


class AuditRequest(BaseModel):
    paradigm: str = "single"
    measures: list[str] | None = None
    tau_match: float = 0.5
    theta_fair: float = 0.2
    mode: str = "subtraction"
    unfair_only: bool = False
    min_support: int = 10


class MultiworkloadRequest(BaseModel):
    k: int
    seed: int = 0
    alpha_sig: float = 0.05


class ExplainRequest(BaseModel):
    matcher_id: str
    group: str | list[str]
    measure_id: str
    paradigm: str = "single"
    sample_size: int = 5
    seed: int = 0
    split: str = "train"


class ResolveRequest(BaseModel):
    measure_id: str
    mode: str = "subtraction"
    cap: int = DEFAULT_ENUMERATION_CAP
    target_group: str | None = None
    seed: int = 0
    orientation: str | None = None


class StrategyRequest(BaseModel):
    assignment: dict[str, str]


class DemoRequest(BaseModel):
    profile: str = "faculty"
    seed: int = 0


@dataclass
class JobStatus:
    job_id: str
    kind: str
    state: str = "queued"  # queued | running | done | failed
    progress: float = 0.0
    error: str | None = None
    result: dict | None = None


_VALIDATION_ERRORS = (
    IngestError,
    ScoreFileError,
    UntrainableError,
    ExplainError,
    ResolveError,
    SessionError,
    ValueError,
    KeyError,
)


def _fail(status: int, code: str, message: str):
    raise HTTPException(status_code=status, detail={"code": code, "message": message})


def create_app(
    root: str | Path | None = None,
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
    default_theta: float = 0.2,
    default_min_support: int = 10,
) -> FastAPI:
    root = Path(root) if root else Path(tempfile.mkdtemp(prefix="matchaudit-"))
    root.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="matchaudit", version="0.1.0")
    app.add_middleware(  # the web UI is served separately and talks cross-origin
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.root = root
    app.state.jobs = {}
    app.state.executor = ThreadPoolExecutor(max_workers=2)
    app.state.locks = {}
    app.state.locks_guard = threading.Lock()

    def session_lock(sid: str) -> threading.Lock:
        with app.state.locks_guard:
            return app.state.locks.setdefault(sid, threading.Lock())

    def open_session(sid: str) -> Session:
        path = root / sid
        if not (path / "state.json").exists():
            _fail(404, "unknown_session", f"no session {sid!r}")
        return Session.open(path)

    def guarded(fn):
        try:
            return fn()
        except HTTPException:
            raise
        except WorkflowError as err:
            _fail(409, "out_of_order", str(err))
        except _VALIDATION_ERRORS as err:
            _fail(400, "validation", str(err))

    # -- sessions -------------------------------------------------------------

    @app.post("/sessions")
    def create_session():
        sid = uuid.uuid4().hex[:12]
        Session.create(root / sid)
        return {"session_id": sid}

    @app.get("/sessions/{sid}")
    def session_summary(sid: str):
        session = open_session(sid)
        state = session.state()
        if state["state"] == "created":
            return {"state": "created", "mode": None, "matchers": []}
        return guarded(session.summary)

    @app.post("/sessions/{sid}/dataset")
    def upload_dataset(
        sid: str,
        table_a: UploadFile = File(...),
        table_b: UploadFile = File(...),
        test: UploadFile = File(...),
        train: UploadFile | None = File(None),
        valid: UploadFile | None = File(None),
        scores: UploadFile | None = File(None),
        sensitive: str = Form(...),
        mode: str = Form("match-and-evaluate"),
        scores_name: str = Form("scores"),
    ):
        session = open_session(sid)
        uploads = session.root / "uploads"
        uploads.mkdir(exist_ok=True)

        def stash(upload: UploadFile | None, name: str) -> Path | None:
            if upload is None:
                return None
            path = uploads / name
            path.write_bytes(upload.file.read())
            return path

        try:
            spec = SensitiveAttributeSpec.from_json(json.loads(sensitive))
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            _fail(400, "bad_sensitive_spec", f"cannot parse sensitive-attribute spec: {err}")
        if mode == "match-and-evaluate" and (train is None or valid is None):
            _fail(400, "validation", "match-and-evaluate needs train and valid pair files")

        paths = {
            "table_a": stash(table_a, "tableA.csv"),
            "table_b": stash(table_b, "tableB.csv"),
            "train": stash(train, "train.csv"),
            "valid": stash(valid, "valid.csv"),
            "test": stash(test, "test.csv"),
            "scores": stash(scores, "scores.csv"),
        }
        # evaluate-only sessions may omit the train/valid files entirely
        if paths["train"] is None:
            paths["train"] = uploads / "train.csv"
            paths["train"].write_text("id1,id2,label\n", encoding="utf-8")
        if paths["valid"] is None:
            paths["valid"] = uploads / "valid.csv"
            paths["valid"].write_text("id1,id2,label\n", encoding="utf-8")

        with session_lock(sid):
            return guarded(
                lambda: session.ingest(
                    paths["table_a"], paths["table_b"],
                    paths["train"], paths["valid"], paths["test"],
                    sensitive=spec, mode=mode,
                    scores=paths["scores"], scores_name=scores_name,
                )
            )

    # -- matchers ---------------------------------------------------------------

    @app.get("/sessions/{sid}/matchers")
    def matcher_catalog(sid: str):
        session = open_session(sid)
        registered = {m["id"]: m for m in session.state()["matchers"]}
        catalog = [
            {
                "matcher_id": kind,
                "family": "non-neural",
                "description": MATCHER_DESCRIPTIONS[kind],
                "trained": kind in registered,
            }
            for kind in BUILTIN_KINDS
        ]
        catalog += [
            {"matcher_id": mid, "family": "external", "description": "Uploaded score file.",
             "trained": True}
            for mid in sorted(registered)
            if mid.startswith("external:")
        ]
        return {"matchers": catalog}

    @app.post("/sessions/{sid}/match")
    def start_match(sid: str, request: MatchRequest):
        session = open_session(sid)
        if session.state()["state"] == "created":
            _fail(409, "out_of_order", "ingest a dataset before matching")
        for kind in request.matcher_ids:
            if kind not in BUILTIN_KINDS:
                _fail(400, "unknown_matcher", f"unknown matcher kind {kind!r}")
        job_id = uuid.uuid4().hex[:12]
        status = JobStatus(job_id=job_id, kind="train")
        app.state.jobs[job_id] = status

        def run():
            status.state = "running"
            status.progress = 0.1
            try:
                with session_lock(sid):
                    trained = session.train(request.matcher_ids, seed=request.seed)
                status.result = {"trained": trained}
                status.progress = 1.0
                status.state = "done"
            except Exception as err:  # surfaced via job polling
                status.state = "failed"
                status.error = str(err)

        app.state.executor.submit(run)
        return {"job_id": job_id}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        status = app.state.jobs.get(job_id)
        if status is None:
            _fail(404, "unknown_job", f"no job {job_id!r}")
        return asdict(status)

    # -- audit --------------------------------------------------------------------

    @app.post("/sessions/{sid}/audit")
    def run_audit(sid: str, request: AuditRequest):
        session = open_session(sid)
        cached = session.cached_report("audit", _audit_config_json(request))
        if cached is not None:
            return cached
        config = guarded(lambda: _audit_config(request, default_min_support))
        with session_lock(sid):
            return guarded(lambda: session.run_audit(config))

    def _audit_config(request: AuditRequest, min_support_default: int) -> AuditConfig:
        measures = tuple(sorted(request.measures)) if request.measures else ALL_MEASURES
        return AuditConfig(
            paradigm=request.paradigm,
            measures=measures,
            tau_match=request.tau_match,
            theta_fair=request.theta_fair,
            mode=request.mode,
            unfair_only=request.unfair_only,
            min_support=request.min_support,
        )

    def _audit_config_json(request: AuditRequest) -> dict:
        measures = sorted(request.measures) if request.measures else list(ALL_MEASURES)
        return {
            "paradigm": request.paradigm,
            "measures": measures,
            "tau_match": request.tau_match,
            "theta_fair": request.theta_fair,
            "mode": request.mode,
            "unfair_only": request.unfair_only,
            "min_support": request.min_support,
        }

    @app.post("/sessions/{sid}/audit/multiworkload")
    def run_multiworkload(sid: str, request: MultiworkloadRequest):
        session = open_session(sid)
        cached = session.cached_report("multiworkload", request.model_dump())
        if cached is not None:
            return cached
        with session_lock(sid):
            return guarded(
                lambda: session.run_multiworkload(request.k, request.seed, request.alpha_sig)
            )

    @app.post("/sessions/{sid}/explain")
    def run_explain(sid: str, request: ExplainRequest):
        session = open_session(sid)
        group = tuple(request.group) if isinstance(request.group, list) else request.group
        cache_key = {
            "matcher": request.matcher_id, "group": request.group,
            "measure": request.measure_id, "paradigm": request.paradigm,
            "sample_size": request.sample_size, "seed": request.seed, "split": request.split,
        }
        cached = session.cached_report("explain", cache_key)
        if cached is not None:
            return cached
        query = ExplanationQuery(
            matcher_id=request.matcher_id,
            group=group,
            measure_id=request.measure_id,
            paradigm=request.paradigm,
            sample_size=request.sample_size,
            seed=request.seed,
        )
        with session_lock(sid):
            return guarded(lambda: session.run_explain(query, split=request.split))

    # -- resolution ------------------------------------------------------------------

    @app.post("/sessions/{sid}/resolve")
    def run_resolve(sid: str, request: ResolveRequest):
        session = open_session(sid)
        config = guarded(
            lambda: ResolutionConfig(
                measure_id=request.measure_id,
                mode=request.mode,
                cap=min(request.cap, enumeration_cap),
                target_group=request.target_group,
                seed=request.seed,
                orientation=request.orientation,
            )
        )
        cached = session.cached_report("resolution", config.to_json())
        if cached is not None:
            return cached
        with session_lock(sid):
            return guarded(lambda: session.run_resolve(config))

    @app.post("/sessions/{sid}/resolve/strategy")
    def run_strategy(sid: str, request: StrategyRequest):
        session = open_session(sid)
        assignment = dict(sorted(request.assignment.items()))
        cached = session.cached_report("strategy", assignment)
        if cached is not None:
            return cached
        with session_lock(sid):
            return guarded(lambda: session.run_strategy(assignment))

    # -- demo data ----------------------------------------------------------------------

    @app.post("/demo/datasets")
    def demo_dataset(request: DemoRequest):
        if request.profile not in PROFILES:
            _fail(400, "unknown_profile", f"profile must be one of {PROFILES}")
        sid = uuid.uuid4().hex[:12]
        session = Session.create(root / sid)
        gen_dir = session.root / "generated"
        meta = generate(request.profile, request.seed, gen_dir)
        files = {key: gen_dir / name for key, name in meta["files"].items()}

        def build():
            if request.profile == "scores":
                session.ingest(
                    files["table_a"], files["table_b"],
                    files["train"], files["valid"], files["test"],
                    sensitive=meta["sensitive"], mode="evaluate-only",
                    scores=files["scores_biased"], scores_name="biased",
                )
                session.add_external_scores(files["scores_fair"], name="fair")
            else:
                session.ingest(
                    files["table_a"], files["table_b"],
                    files["train"], files["valid"], files["test"],
                    sensitive=meta["sensitive"],
                )
            return {"session_id": sid, "meta": meta, "summary": session.summary()}

        with session_lock(sid):
            return guarded(build)

    @app.get("/spec")
    def spec_document():
        return JSONResponse(app.openapi())

    return app
