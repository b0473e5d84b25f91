"""Domain objects <-> workspace artifacts."""

from __future__ import annotations

import json

from lumen import assess, cluster, workspace
from lumen.ingest import CityDataset, parse_poi_csv_text


def load_dataset(ws: workspace.Workspace) -> CityDataset:
    text = ws.read_artifact_text(workspace.DATASET_CSV)
    pois = parse_poi_csv_text(text, workspace.DATASET_CSV)
    return CityDataset(name=ws.manifest.get("name", ws.root.name), pois=tuple(pois))


def load_areas(ws: workspace.Workspace):
    text = ws.read_artifact_text(workspace.AREAS_JSON)
    return assess.areas_from_json(text)


def load_indices(ws: workspace.Workspace) -> dict[str, assess.PollutionIndices]:
    return assess.indices_from_csv(ws.read_artifact_text(workspace.INDICES_CSV))


def load_levels(ws: workspace.Workspace) -> tuple[cluster.LevelModel, dict[str, int]]:
    payload = json.loads(ws.read_artifact_text(workspace.LEVELS_JSON))
    model = cluster.model_from_json(json.dumps(payload["model"]))
    return model, {k: int(v) for k, v in payload["levels"].items()}


def levels_payload(model: cluster.LevelModel, levels: dict[str, int]) -> str:
    return json.dumps(
        {
            "model": json.loads(cluster.model_to_json(model)),
            "levels": dict(sorted(levels.items())),
        },
        separators=(",", ":"),
        sort_keys=True,
    )
