"""HTTP facade over a workspace for the scenario-explorer UI.

The service is a read-only view of the baseline workspace plus an
in-memory scenario engine; nothing it does mutates the files on disk.
Scenario sessions are kept in memory with TTL eviction.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse

from lumen import causal, render, scenario, store, workspace
from lumen.assess import (
    InfluenceParams,
    ResidentialArea,
    extract_areas,
    member_influences,
)
from lumen.cluster import LevelModel
from lumen.ingest import CATEGORIES, CityDataset


@dataclass
class ScenarioSession:
    session_id: str
    spec: scenario.InterventionSpec
    intervened: CityDataset
    report_json: str
    last_access: float = field(default_factory=time.monotonic)


class ServiceState:
    """Immutable baseline view plus the session registry."""

    def __init__(self, ws: workspace.Workspace, max_scenario_areas: int, session_ttl_s: float):
        self.ws = ws
        self.max_scenario_areas = max_scenario_areas
        self.session_ttl_s = session_ttl_s
        self.dataset: CityDataset | None = None
        self.areas: list[ResidentialArea] = []
        self.params = InfluenceParams()
        self.indices = {}
        self.level_model: LevelModel | None = None
        self.levels: dict[str, int] = {}
        self.ate_rows: dict[str, list[dict]] = {}
        self.ready = False
        self.sessions: dict[str, ScenarioSession] = {}
        self._session_lock = threading.Lock()
        self._load()

    def _load(self) -> None:
        try:
            self.dataset = store.load_dataset(self.ws)
            self.areas, self.params = store.load_areas(self.ws)
            self.indices = store.load_indices(self.ws)
            self.level_model, self.levels = store.load_levels(self.ws)
            self.ready = True
        except (FileNotFoundError, ValueError, KeyError):
            self.ready = False
        try:
            text = self.ws.read_artifact_text(workspace.ATE_CSV)
            self.ate_rows = causal.ate_table_from_csv(text)
        except (FileNotFoundError, ValueError):
            self.ate_rows = {}

    def area_by_id(self, area_id: str) -> ResidentialArea | None:
        for area in self.areas:
            if area.center_poi_id == area_id:
                return area
        return None

    # -- sessions -------------------------------------------------------------

    def put_session(self, session: ScenarioSession) -> None:
        with self._session_lock:
            self._evict_locked()
            self.sessions[session.session_id] = session

    def get_session(self, session_id: str) -> ScenarioSession | None:
        with self._session_lock:
            self._evict_locked()
            session = self.sessions.get(session_id)
            if session is not None:
                session.last_access = time.monotonic()
            return session

    def _evict_locked(self) -> None:
        cutoff = time.monotonic() - self.session_ttl_s
        for sid in [s for s, sess in self.sessions.items() if sess.last_access < cutoff]:
            del self.sessions[sid]


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def build_app(
    workspace_dir,
    cors_origin: str | None = None,
    max_scenario_areas: int = 2000,
    session_ttl_s: float = 1800.0,
) -> FastAPI:
    ws = workspace.Workspace(workspace_dir)
    state = ServiceState(ws, max_scenario_areas, session_ttl_s)
    app = FastAPI(title="lumen", docs_url=None, redoc_url=None)
    app.state.lumen = state

    if cors_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.get("/api/areas")
    def list_areas():
        if not state.ready:
            return _error(503, "not assessed")
        payload = []
        for area in sorted(state.areas, key=lambda a: a.center_poi_id):
            ind = state.indices[area.center_poi_id]
            payload.append(
                {
                    "area_id": area.center_poi_id,
                    "center_lon": area.center_lon,
                    "center_lat": area.center_lat,
                    "score": ind.score,
                    "level": state.levels.get(area.center_poi_id),
                }
            )
        return payload

    @app.get("/api/areas/{area_id}/assessment")
    def area_assessment(area_id: str):
        if not state.ready:
            return _error(503, "not assessed")
        area = state.area_by_id(area_id)
        if area is None:
            return _error(404, f"unknown area '{area_id}'")
        ind = state.indices[area_id]
        infl = member_influences(area, state.dataset, state.params)
        members = []
        for k, pid in enumerate(area.members):
            poi = state.dataset.poi(pid)
            members.append(
                {
                    "poi_id": pid,
                    "category": poi.category,
                    "ntl": poi.ntl,
                    "influence": float(infl[k]),
                }
            )
        return {
            "area_id": area_id,
            "tnl": ind.tnl,
            "nld": ind.nld,
            "nlsd": ind.nlsd,
            "score": ind.score,
            "level": state.levels.get(area_id),
            "members": members,
        }

    @app.post("/api/scenario")
    async def post_scenario(request: Request):
        if not state.ready:
            return _error(503, "not assessed")
        if len(state.areas) > state.max_scenario_areas:
            return _error(413, f"city too large for synchronous scenarios (> {state.max_scenario_areas} areas)")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body must be JSON")
        if not isinstance(body, dict):
            return _error(400, "body must be a JSON object")
        try:
            spec = scenario.spec_from_json(body)
        except (ValueError, KeyError, TypeError) as exc:
            return _error(400, str(exc))
        area_filter = body.get("areas")
        if area_filter is not None and not isinstance(area_filter, list):
            return _error(400, "'areas' must be a list of area ids")
        try:
            report = scenario.run_scenario(
                state.dataset,
                spec,
                state.params,
                state.level_model,
                map_areas=area_filter,
                map_size=int(body.get("map_size", 64)),
            )
        except ValueError as exc:
            return _error(400, str(exc))
        session = ScenarioSession(
            session_id=uuid.uuid4().hex,
            spec=spec,
            intervened=scenario.apply_intervention(state.dataset, spec),
            report_json=scenario.report_to_json(report),
        )
        state.put_session(session)
        payload = {"session_id": session.session_id}
        payload.update(json.loads(session.report_json))
        return payload

    @app.get("/api/areas/{area_id}/map")
    def area_map(
        area_id: str,
        request: Request,
        scenario_token: str | None = Query(default=None, alias="scenario"),
    ):
        if not state.ready:
            return _error(503, "not assessed")
        session = None
        if scenario_token:
            session = state.get_session(scenario_token)
            if session is None:
                return _error(404, f"unknown scenario session '{scenario_token}'")
        area = state.area_by_id(area_id)
        if area is None:
            return _error(404, f"unknown area '{area_id}'")
        dataset = state.dataset if session is None else session.intervened
        if session is not None:
            # membership can change under intervention; re-extract this area
            candidates = [
                a
                for a in extract_areas(dataset, state.params)
                if a.center_poi_id == area_id
            ]
            if not candidates:
                return _error(404, f"area '{area_id}' absent in scenario")
            area = candidates[0]
        area_map_obj = render.render_area(area, dataset, state.params)
        data = render.ppm_bytes(area_map_obj)
        accept = request.headers.get("accept", "")
        if "image/png" in accept:
            png = _encode_png(area_map_obj.pixels)
            if png is not None:
                return Response(content=png, media_type="image/png")
        return Response(content=data, media_type="image/x-portable-pixmap")

    @app.get("/api/ate")
    def get_ate(category: str):
        if category not in CATEGORIES:
            return _error(400, f"unknown category '{category}'")
        rows = state.ate_rows.get(category)
        if not rows:
            return _error(404, f"no effect estimates for '{category}'; run the dml command")
        treatments = list(dict.fromkeys(r["treatment_var"] for r in rows))
        outcomes = list(dict.fromkeys(r["outcome"] for r in rows))
        cell = {(r["treatment_var"], r["outcome"]): r for r in rows}

        def block(key):
            return [[cell[(t, o)][key] for o in outcomes] for t in treatments]

        return {
            "category": category,
            "treatment_names": treatments,
            "outcome_names": outcomes,
            "theta": block("theta"),
            "stderr": block("stderr"),
            "p": block("p"),
            "ci_low": block("ci_low"),
            "ci_high": block("ci_high"),
            "stars": block("stars"),
        }

    return app


def _encode_png(pixels: np.ndarray) -> bytes | None:
    try:
        from io import BytesIO

        from PIL import Image
    except ImportError:
        return None
    buf = BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
