"""HTTP+JSON API over the evaluation service.

Endpoints:
    POST /teams                          register, returns api token
    POST /submissions                    multipart score file, bearer auth
    GET  /submissions                    own history
    GET  /submissions/{id}               own record (progress scores only)
    GET  /submissions/{id}/det           DET curve data (progress subset)
    GET  /leaderboard/progress           live board
    GET  /leaderboard/test               latest published snapshot
    GET  /leaderboard/test/{snapshot}    specific snapshot
    POST /admin/snapshot                 publish test snapshot (admin token)

Errors carry {"code", "message", "detail"} with codes QUOTA_EXCEEDED,
VALIDATION_FAILED, PARSE_FAILED, UNAUTHORIZED, DUPLICATE_TEAM, NOT_FOUND.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import asdict, dataclass

from fastapi import FastAPI, File, Header, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .. import detplot
from ..metrics import CostParams
from ..trialset import SOURCES, load_trials
from .core import EvalService, ServiceError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class ServiceConfig:
    key_path: str
    data_dir: str = "ctseval-data"
    quota_per_day: int = 3
    admin_token: str = ""
    host: str = "127.0.0.1"
    port: int = 8000
    frontend_dir: str = ""
    c_miss: float = 1.0
    c_fa: float = 1.0
    p_target: float = 0.05

    @property
    def params(self) -> CostParams:
        return CostParams(self.c_miss, self.c_fa, self.p_target)


_ENV_KEYS = {
    "CTSEVAL_KEY_PATH": ("key_path", str),
    "CTSEVAL_DATA_DIR": ("data_dir", str),
    "CTSEVAL_QUOTA": ("quota_per_day", int),
    "CTSEVAL_ADMIN_TOKEN": ("admin_token", str),
    "CTSEVAL_HOST": ("host", str),
    "CTSEVAL_PORT": ("port", int),
    "CTSEVAL_FRONTEND_DIR": ("frontend_dir", str),
}


def load_config(path: str | None = None, env: dict | None = None) -> ServiceConfig:
    """Config file (TOML) with environment overrides."""
    values: dict = {}
    if path:
        with open(path, "rb") as f:
            values.update(tomllib.load(f))
    env = os.environ if env is None else env
    for env_key, (field_name, cast) in _ENV_KEYS.items():
        if env_key in env:
            values[field_name] = cast(env[env_key])
    if "key_path" not in values:
        raise ValueError("service config requires key_path (or CTSEVAL_KEY_PATH)")
    return ServiceConfig(**values)


class TeamRequest(BaseModel):
    name: str


def _bearer(authorization: str | None) -> str:
    if authorization and authorization.startswith("Bearer "):
        return authorization[len("Bearer "):]
    return authorization or ""


def create_app(service: EvalService, frontend_dir: str = "") -> FastAPI:
    app = FastAPI(title="ctseval leaderboard service")
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def service_error_handler(_, exc: ServiceError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"code": exc.code, "message": str(exc), "detail": exc.detail},
        )

    @app.post("/teams", status_code=201)
    def register_team(body: TeamRequest):
        team = service.register_team(body.name)
        return {
            "team_id": team.team_id,
            "name": team.name,
            "api_token": team.token,
            "registered_at": team.registered_at,
        }

    @app.post("/submissions", status_code=201)
    def submit(file: UploadFile = File(...), authorization: str | None = Header(None)):
        data = file.file.read()
        rec = service.submit(_bearer(authorization), data, filename=file.filename or "scores.tsv")
        return rec.public_view()

    @app.get("/submissions")
    def list_submissions(authorization: str | None = Header(None)):
        recs = service.list_submissions(_bearer(authorization))
        return {"submissions": [r.public_view() for r in recs]}

    @app.get("/submissions/{submission_id}")
    def get_submission(submission_id: str, authorization: str | None = Header(None)):
        return service.get_submission(_bearer(authorization), submission_id).public_view()

    @app.get("/submissions/{submission_id}/det")
    def get_det(submission_id: str, by: str = "source",
                authorization: str | None = Header(None)):
        llr = service.submission_scores(_bearer(authorization), submission_id)
        manifest = service.progress_manifest
        groups: list[tuple[str, object]] = []
        if by == "all":
            groups.append(("all", manifest))
        elif by == "source":
            for src in SOURCES:
                sub = manifest.filter(source=src)
                if len(sub):
                    groups.append((src, sub))
        else:
            raise ServiceError("VALIDATION_FAILED", f"unsupported grouping {by!r}", 422)
        def finite_or_none(v: float) -> float | None:
            return float(v) if math.isfinite(v) else None  # JSON has no infinity

        def clamped_probit(p: float, n: int) -> float:
            lo = 1.0 / (2.0 * n)
            return detplot.probit(min(max(p, lo), 1.0 - lo))

        curves = []
        for name, sub in groups:
            mask = (
                slice(None)
                if sub is manifest
                else (manifest.source_code == SOURCES.index(name))
            )
            curve = detplot.det_points(llr[mask], sub.is_target, service.params)
            markers = [
                {
                    **asdict(m),
                    "theta": finite_or_none(m.theta),
                    "probit_fa": clamped_probit(m.p_fa, curve.n_nontarget),
                    "probit_miss": clamped_probit(m.p_miss, curve.n_target),
                }
                for m in curve.markers
            ]
            contours = []
            for m in curve.markers:
                if m.c_norm <= 0.0:
                    continue  # zero-cost contour degenerates to the origin
                pts = detplot.equi_cost_contour(m.c_norm, service.params, n_points=120)
                if pts.shape[0] == 0:
                    continue
                contours.append(
                    {
                        "level": m.c_norm,
                        "kind": m.kind,
                        "p_fa": pts[:, 0].tolist(),
                        "p_miss": pts[:, 1].tolist(),
                        "probit_fa": [
                            clamped_probit(v, curve.n_nontarget) for v in pts[:, 0]
                        ],
                        "probit_miss": [
                            clamped_probit(v, curve.n_target) for v in pts[:, 1]
                        ],
                    }
                )
            curves.append(
                {
                    "group": name,
                    "theta": [finite_or_none(v) for v in curve.thresholds],
                    "p_fa": curve.p_fa.tolist(),
                    "p_miss": curve.p_miss.tolist(),
                    "probit_fa": curve.probit_fa.tolist(),
                    "probit_miss": curve.probit_miss.tolist(),
                    "markers": markers,
                    "contours": contours,
                }
            )
        return {"submission_id": submission_id, "by": by, "curves": curves,
                "beta": service.params.beta}

    @app.get("/leaderboard/progress")
    def progress_board():
        rows = [asdict(e) for e in service.progress_leaderboard()]
        return {"subset": "progress", "rows": rows}

    @app.get("/leaderboard/test")
    def test_board():
        snap = service.test_leaderboard()
        if snap is None:
            return {"subset": "test", "snapshot_id": None, "published_at": None, "rows": []}
        return {"subset": "test", "snapshot_id": snap.snapshot_id,
                "published_at": snap.published_at, "rows": snap.rows}

    @app.get("/leaderboard/test/{snapshot_id}")
    def test_board_at(snapshot_id: str):
        snap = service.test_leaderboard(snapshot_id)
        return {"subset": "test", "snapshot_id": snap.snapshot_id,
                "published_at": snap.published_at, "rows": snap.rows}

    @app.post("/admin/snapshot", status_code=201)
    def publish_snapshot(authorization: str | None = Header(None)):
        snap = service.publish_test_snapshot(_bearer(authorization))
        return {"snapshot_id": snap.snapshot_id, "published_at": snap.published_at,
                "rows": snap.rows}

    if frontend_dir and os.path.isdir(frontend_dir):
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="frontend")

    return app


def app_from_config(config: ServiceConfig) -> FastAPI:
    manifest = load_trials(config.key_path)
    service = EvalService(
        manifest,
        data_dir=config.data_dir,
        params=config.params,
        quota_per_day=config.quota_per_day,
        admin_token=config.admin_token,
    )
    return create_app(service, frontend_dir=config.frontend_dir)
