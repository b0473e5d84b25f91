"""Deterministic what-if engine over a baseline city.

An intervention is a list of edits (scale/set intensities, remove a
category, add a POI) applied left to right to produce a new dataset; the
report recomputes assessment and levels for both datasets with the same
frozen level model, so levels stay comparable before and after.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from lumen import render
from lumen.assess import (
    InfluenceParams,
    PollutionIndices,
    assess_city,
    extract_areas,
)
from lumen.cluster import LevelModel, assign_levels
from lumen.ingest import CATEGORIES, CityDataset, Poi


@dataclass(frozen=True)
class ScaleNtl:
    category: str
    factor: float


@dataclass(frozen=True)
class SetNtl:
    category: str
    value: float


@dataclass(frozen=True)
class RemoveCategory:
    category: str


@dataclass(frozen=True)
class AddPoi:
    poi: Poi


Action = ScaleNtl | SetNtl | RemoveCategory | AddPoi


@dataclass(frozen=True)
class InterventionSpec:
    actions: tuple[Action, ...]

    def __post_init__(self):
        for action in self.actions:
            if isinstance(action, (ScaleNtl, SetNtl, RemoveCategory)):
                if action.category not in CATEGORIES:
                    raise ValueError(f"unknown category '{action.category}'")
            if isinstance(action, ScaleNtl) and action.factor < 0:
                raise ValueError("scale factor must be >= 0")
            if isinstance(action, SetNtl) and action.value < 0:
                raise ValueError("ntl value must be >= 0")


def spec_from_json(text: str | dict) -> InterventionSpec:
    """Parse {"actions":[{"op":...,...}]} with field-level error messages."""
    payload = json.loads(text) if isinstance(text, str) else text
    if not isinstance(payload, dict) or "actions" not in payload:
        raise ValueError("spec must be an object with an 'actions' list")
    raw_actions = payload["actions"]
    if not isinstance(raw_actions, list):
        raise ValueError("'actions' must be a list")
    actions: list[Action] = []
    for idx, item in enumerate(raw_actions):
        if not isinstance(item, dict) or "op" not in item:
            raise ValueError(f"action {idx} must be an object with an 'op' field")
        op = item["op"]
        if op == "scale_ntl":
            actions.append(ScaleNtl(str(item["category"]), float(item["factor"])))
        elif op == "set_ntl":
            actions.append(SetNtl(str(item["category"]), float(item["value"])))
        elif op == "remove_category":
            actions.append(RemoveCategory(str(item["category"])))
        elif op == "add_poi":
            p = item["poi"]
            actions.append(
                AddPoi(
                    Poi(
                        id=str(p["id"]),
                        lon=float(p["lon"]),
                        lat=float(p["lat"]),
                        category=str(p["category"]),
                        ntl=float(p["ntl"]) if p.get("ntl") is not None else None,
                    )
                )
            )
        else:
            raise ValueError(f"unknown action '{op}'")
    return InterventionSpec(actions=tuple(actions))


def spec_to_json(spec: InterventionSpec) -> str:
    items = []
    for action in spec.actions:
        if isinstance(action, ScaleNtl):
            items.append({"op": "scale_ntl", "category": action.category, "factor": action.factor})
        elif isinstance(action, SetNtl):
            items.append({"op": "set_ntl", "category": action.category, "value": action.value})
        elif isinstance(action, RemoveCategory):
            items.append({"op": "remove_category", "category": action.category})
        else:
            poi = action.poi
            items.append(
                {
                    "op": "add_poi",
                    "poi": {
                        "id": poi.id,
                        "lon": poi.lon,
                        "lat": poi.lat,
                        "category": poi.category,
                        "ntl": poi.ntl,
                    },
                }
            )
    return json.dumps({"actions": items}, separators=(",", ":"), sort_keys=True)


def apply_intervention(dataset: CityDataset, spec: InterventionSpec) -> CityDataset:
    """New dataset with the actions applied in order; the input is untouched."""
    pois = list(dataset.pois)
    for action in spec.actions:
        if isinstance(action, ScaleNtl):
            pois = [
                _with_ntl(p, p.ntl * action.factor) if p.category == action.category else p
                for p in pois
            ]
        elif isinstance(action, SetNtl):
            pois = [
                _with_ntl(p, action.value) if p.category == action.category else p
                for p in pois
            ]
        elif isinstance(action, RemoveCategory):
            pois = [p for p in pois if p.category != action.category]
        else:
            if any(p.id == action.poi.id for p in pois):
                raise ValueError(f"duplicate poi id '{action.poi.id}'")
            pois.append(action.poi)
    return CityDataset(name=dataset.name, pois=tuple(pois), raster=dataset.raster)


def _with_ntl(poi: Poi, ntl: float) -> Poi:
    if poi.ntl is None:
        raise ValueError(f"poi '{poi.id}' has no sampled ntl")
    return replace(poi, ntl=float(ntl))


def level_kl(p_hist, q_hist) -> float:
    """KL divergence of level histograms; q is add-1e-9 smoothed.

    Exactly zero for identical histograms; float cancellation noise is
    clamped away (the exact value is non-negative by Gibbs' inequality).
    """
    p = np.asarray(p_hist, dtype=np.float64)
    q = np.asarray(q_hist, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("histograms must have the same number of levels")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("histogram counts must be >= 0")
    if np.array_equal(p, q):
        return 0.0
    q = q + 1e-9
    p_sum = p.sum()
    if p_sum == 0:
        return 0.0
    p = p / p_sum
    q = q / q.sum()
    mask = p > 0
    return max(0.0, float(np.sum(p[mask] * np.log(p[mask] / q[mask]))))


def map_metrics(a, b) -> dict[str, float]:
    """MAE / PSNR / RASE between two images with channels in [0, 1].

    uint8 inputs are normalized by 255. PSNR uses peak 1.0 and is +inf for
    identical images.
    """
    a = _as_unit_image(a)
    b = _as_unit_image(b)
    if a.shape != b.shape:
        raise ValueError(f"image dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    mae = float(np.mean(np.abs(diff)))
    mse = float(np.mean(diff * diff))
    psnr = math.inf if mse == 0.0 else 10.0 * math.log10(1.0 / mse)
    channel_mse = np.mean(diff * diff, axis=tuple(range(diff.ndim - 1)))
    rms = math.sqrt(float(np.mean(channel_mse)))
    mean_a = float(np.mean(a))
    if rms == 0.0:
        rase = 0.0
    elif mean_a == 0.0:
        rase = math.inf
    else:
        rase = 100.0 / mean_a * rms
    return {"mae": mae, "psnr": psnr, "rase": rase}


def _as_unit_image(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    else:
        arr = arr.astype(np.float64)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("float image channels must lie in [0, 1]")
    return arr


@dataclass
class AreaDelta:
    area_id: str
    before: PollutionIndices
    after: PollutionIndices | None
    # deltas are after - before exactly; None when the area vanished
    d_tnl: float | None
    d_nld: float | None
    d_nlsd: float | None
    d_score: float | None


@dataclass
class ScenarioReport:
    areas: list[AreaDelta]
    hist_before: list[int]
    hist_after: list[int]
    kl: float
    map_metrics: dict[str, dict[str, float]]


def run_scenario(
    dataset: CityDataset,
    spec: InterventionSpec,
    params: InfluenceParams,
    level_model: LevelModel,
    map_areas: list[str] | None = None,
    map_size: int = 64,
) -> ScenarioReport:
    """Assess baseline and intervened datasets and report the differences.

    Levels on both sides come from the frozen baseline model. map_areas
    selects which areas get rendered for image metrics (None = all areas
    present on both sides).
    """
    before_areas = extract_areas(dataset, params)
    before = assign_levels(level_model, assess_city(dataset, params, areas=before_areas))
    intervened = apply_intervention(dataset, spec)
    after_areas = extract_areas(intervened, params)
    after = assign_levels(level_model, assess_city(intervened, params, areas=after_areas))

    deltas: list[AreaDelta] = []
    for area_id in sorted(before):
        b = before[area_id]
        a = after.get(area_id)
        if a is None:
            deltas.append(AreaDelta(area_id, b, None, None, None, None, None))
        else:
            deltas.append(
                AreaDelta(
                    area_id,
                    b,
                    a,
                    a.tnl - b.tnl,
                    a.nld - b.nld,
                    a.nlsd - b.nlsd,
                    a.score - b.score,
                )
            )

    k = level_model.k
    hist_before = [0] * k
    hist_after = [0] * k
    for ind in before.values():
        hist_before[ind.level] += 1
    for ind in after.values():
        hist_after[ind.level] += 1
    kl = level_kl(hist_before, hist_after)

    if map_areas is None:
        selected = [aid for aid in sorted(before) if aid in after]
    else:
        selected = [aid for aid in map_areas if aid in before and aid in after]
    by_id_before = {a.center_poi_id: a for a in before_areas}
    by_id_after = {a.center_poi_id: a for a in after_areas}
    metrics: dict[str, dict[str, float]] = {}
    for aid in selected:
        img_b = render.render_area(
            by_id_before[aid], dataset, params, width=map_size, height=map_size
        )
        img_a = render.render_area(
            by_id_after[aid], intervened, params, width=map_size, height=map_size
        )
        metrics[aid] = map_metrics(img_b.pixels, img_a.pixels)
    return ScenarioReport(
        areas=deltas,
        hist_before=hist_before,
        hist_after=hist_after,
        kl=kl,
        map_metrics=metrics,
    )


def _json_float(v):
    if v is None:
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def report_to_json(report: ScenarioReport) -> str:
    def indices_payload(ind: PollutionIndices | None):
        if ind is None:
            return None
        return {
            "tnl": ind.tnl,
            "nld": ind.nld,
            "nlsd": ind.nlsd,
            "score": ind.score,
            "level": ind.level,
        }

    payload = {
        "areas": [
            {
                "area_id": d.area_id,
                "before": indices_payload(d.before),
                "after": indices_payload(d.after),
                "delta": {
                    "tnl": d.d_tnl,
                    "nld": d.d_nld,
                    "nlsd": d.d_nlsd,
                    "score": d.d_score,
                    "level": (
                        None
                        if d.after is None
                        else d.after.level - d.before.level
                    ),
                },
            }
            for d in report.areas
        ],
        "hist_before": report.hist_before,
        "hist_after": report.hist_after,
        "kl": report.kl,
        "map_metrics": {
            aid: {k: _json_float(v) for k, v in m.items()}
            for aid, m in report.map_metrics.items()
        },
    }
    return json.dumps(payload, separators=(",", ":"), sort_keys=True)
