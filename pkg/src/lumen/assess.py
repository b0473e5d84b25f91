"""Residential-area extraction and light-pollution indices.

Each residential POI anchors a square neighborhood. Every POI inside the
square (the center included) is a light source whose contribution decays
with a Gaussian kernel of the distance to the area center:

    contribution = ntl / (sqrt(2*pi) * D) * exp(-d^2 / (2 * D^2))

The three indices summarize those contributions: tnl is their sum
(over-illumination), nld excludes the center's own term (trespass), and
nlsd is their population standard deviation (clutter).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from lumen import geometry
from lumen.ingest import CityDataset

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class InfluenceParams:
    """Kernel bandwidth and neighborhood side length, both in meters."""

    bandwidth_m: float = 1500.0
    side_m: float = 2000.0

    def __post_init__(self):
        if self.bandwidth_m <= 0:
            raise ValueError("bandwidth_m must be > 0")
        if self.side_m <= 0:
            raise ValueError("side_m must be > 0")


@dataclass
class ResidentialArea:
    """Square neighborhood around one residential POI.

    members holds the ids of every POI inside the bbox, sorted by id so
    that all downstream sums are independent of input file order. plots
    (the Voronoi partition of the members) is filled lazily by
    :func:`compute_plots`.
    """

    center_poi_id: str
    center_lon: float
    center_lat: float
    side_m: float
    members: list[str]
    plots: list[dict] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class PollutionIndices:
    tnl: float
    nld: float
    nlsd: float
    score: float
    level: int | None = None

    def with_level(self, level: int) -> "PollutionIndices":
        return PollutionIndices(self.tnl, self.nld, self.nlsd, self.score, level)


def influence(ntl, d, bandwidth_m):
    """Gaussian-kernel contribution of a source; accepts scalars or arrays.

    d and bandwidth_m must share one unit (meters everywhere in this
    package).
    """
    ntl_a = np.asarray(ntl, dtype=np.float64)
    d_a = np.asarray(d, dtype=np.float64)
    if np.any(ntl_a < 0):
        raise ValueError("ntl must be >= 0")
    if np.any(d_a < 0):
        raise ValueError("distance must be >= 0")
    bw = float(bandwidth_m)
    if bw <= 0:
        raise ValueError("bandwidth must be > 0")
    out = ntl_a / (SQRT_2PI * bw) * np.exp(-(d_a * d_a) / (2.0 * bw * bw))
    if out.ndim == 0:
        return float(out)
    return out


def extract_areas(
    dataset: CityDataset,
    params: InfluenceParams = InfluenceParams(),
    method: str = "kdtree",
) -> list[ResidentialArea]:
    """One area per residential POI, sorted by center id.

    Membership: |x| <= side/2 and |y| <= side/2 in the local projection
    centered on the area. method "kdtree" prunes candidates with a spatial
    index; "naive" scans all pairs. Both apply the identical membership
    test, so their outputs match bit for bit.
    """
    if method not in ("kdtree", "naive"):
        raise ValueError(f"unknown method '{method}'")
    pois = dataset.pois
    n = len(pois)
    ids = [p.id for p in pois]
    lons = np.array([p.lon for p in pois], dtype=np.float64)
    lats = np.array([p.lat for p in pois], dtype=np.float64)
    id_rank = np.empty(n, dtype=np.int64)
    id_rank[np.argsort(np.array(ids, dtype=object), kind="stable")] = np.arange(n)

    centers = [i for i in range(n) if pois[i].category == "residential"]
    centers.sort(key=lambda i: ids[i])
    half = params.side_m / 2.0

    tree = None
    if method == "kdtree" and centers:
        tree = cKDTree(np.column_stack([lons, lats]))

    areas: list[ResidentialArea] = []
    for ci in centers:
        lon_c, lat_c = lons[ci], lats[ci]
        if tree is not None:
            coslat = math.cos(math.radians(lat_c))
            r_lon = half / max(coslat, 1e-12) / geometry.M_PER_DEG
            r_lat = half / geometry.M_PER_DEG
            radius = min(math.hypot(r_lon, r_lat), 360.0)
            cand = np.sort(np.array(tree.query_ball_point([lon_c, lat_c], radius), dtype=np.int64))
        else:
            cand = np.arange(n)
        x, y = geometry.local_xy(lons[cand], lats[cand], lon_c, lat_c)
        inside = cand[(np.abs(x) <= half) & (np.abs(y) <= half)]
        inside = inside[np.argsort(id_rank[inside], kind="stable")]
        areas.append(
            ResidentialArea(
                center_poi_id=ids[ci],
                center_lon=float(lon_c),
                center_lat=float(lat_c),
                side_m=params.side_m,
                members=[ids[i] for i in inside],
            )
        )
    return areas


def member_influences(
    area: ResidentialArea, dataset: CityDataset, params: InfluenceParams
) -> np.ndarray:
    """Influence of each member on the area center, in member order."""
    ntls = np.empty(len(area.members))
    lons = np.empty(len(area.members))
    lats = np.empty(len(area.members))
    for k, pid in enumerate(area.members):
        poi = dataset.poi(pid)
        if poi.ntl is None:
            raise ValueError(f"poi '{pid}' has no sampled ntl")
        ntls[k] = poi.ntl
        lons[k] = poi.lon
        lats[k] = poi.lat
    x, y = geometry.local_xy(lons, lats, area.center_lon, area.center_lat)
    d = np.hypot(x, y)
    return influence(ntls, d, params.bandwidth_m)


def compute_indices(
    area: ResidentialArea, dataset: CityDataset, params: InfluenceParams
) -> PollutionIndices:
    """tnl/nld/nlsd/score for one area; distances run center to member.

    Sums use exact (fsum) accumulation, so the indices are independent of
    member order down to the last bit.
    """
    infl = member_influences(area, dataset, params)
    center = dataset.poi(area.center_poi_id)
    if center.ntl is None:
        raise ValueError(f"poi '{center.id}' has no sampled ntl")
    self_influence = influence(center.ntl, 0.0, params.bandwidth_m)
    tnl = math.fsum(infl)
    nld = tnl - self_influence
    if infl.size:
        mean = math.fsum(infl) / infl.size
        nlsd = math.sqrt(math.fsum((infl - mean) ** 2) / infl.size)
    else:
        nlsd = 0.0
    score = tnl + nld + nlsd
    return PollutionIndices(tnl=tnl, nld=nld, nlsd=nlsd, score=score)


def assess_city(
    dataset: CityDataset,
    params: InfluenceParams = InfluenceParams(),
    method: str = "kdtree",
    areas: list[ResidentialArea] | None = None,
) -> dict[str, PollutionIndices]:
    """Indices for every residential area, keyed and ordered by area id."""
    if areas is None:
        areas = extract_areas(dataset, params, method=method)
    return {a.center_poi_id: compute_indices(a, dataset, params) for a in areas}


def compute_plots(area: ResidentialArea, dataset: CityDataset) -> list[dict]:
    """Voronoi partition of the members, clipped to the bbox; cached on the area.

    Each plot is {"poi_id": str, "polygon": [[x, y], ...]} in local metric
    meters. Plots with an empty polygon (exact duplicate locations) are
    kept so the partition stays aligned with the member list.
    """
    if area.plots is not None:
        return area.plots
    lons = np.array([dataset.poi(pid).lon for pid in area.members])
    lats = np.array([dataset.poi(pid).lat for pid in area.members])
    x, y = geometry.local_xy(lons, lats, area.center_lon, area.center_lat)
    cells = geometry.voronoi_cells(np.column_stack([x, y]), area.side_m / 2.0)
    plots = [
        {"poi_id": pid, "polygon": [[float(vx), float(vy)] for vx, vy in cell]}
        for pid, cell in zip(area.members, cells)
    ]
    area.plots = plots
    return plots


def plots_to_json(area: ResidentialArea, dataset: CityDataset) -> str:
    """Plot partition as a JSON list of polygons in local metric meters."""
    plots = compute_plots(area, dataset)
    return json.dumps(plots, separators=(",", ":"), sort_keys=True)


# -- CSV / JSON round-trips used by the workspace and the HTTP facade -------

INDICES_CSV_HEADER = "area_id,tnl,nld,nlsd,score,level"


def indices_to_csv(table: dict[str, PollutionIndices]) -> str:
    """CSV with 9 significant digits per index; level empty until assigned."""
    lines = [INDICES_CSV_HEADER]
    for area_id in sorted(table):
        ind = table[area_id]
        level = "" if ind.level is None else str(ind.level)
        lines.append(
            f"{area_id},{ind.tnl:.9g},{ind.nld:.9g},{ind.nlsd:.9g},{ind.score:.9g},{level}"
        )
    return "\n".join(lines) + "\n"


def indices_from_csv(text: str) -> dict[str, PollutionIndices]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != INDICES_CSV_HEADER:
        raise ValueError(f"expected header '{INDICES_CSV_HEADER}'")
    table: dict[str, PollutionIndices] = {}
    for ln in lines[1:]:
        area_id, tnl, nld, nlsd, score, level = ln.split(",")
        table[area_id] = PollutionIndices(
            tnl=float(tnl),
            nld=float(nld),
            nlsd=float(nlsd),
            score=float(score),
            level=int(level) if level else None,
        )
    return table


def areas_to_json(areas: list[ResidentialArea], params: InfluenceParams) -> str:
    payload = {
        "bandwidth_m": params.bandwidth_m,
        "side_m": params.side_m,
        "areas": [
            {
                "id": a.center_poi_id,
                "center_lon": a.center_lon,
                "center_lat": a.center_lat,
                "members": a.members,
            }
            for a in areas
        ],
    }
    return json.dumps(payload, separators=(",", ":"), sort_keys=True)


def areas_from_json(text: str) -> tuple[list[ResidentialArea], InfluenceParams]:
    payload = json.loads(text)
    params = InfluenceParams(
        bandwidth_m=payload["bandwidth_m"], side_m=payload["side_m"]
    )
    areas = [
        ResidentialArea(
            center_poi_id=a["id"],
            center_lon=a["center_lon"],
            center_lat=a["center_lat"],
            side_m=params.side_m,
            members=list(a["members"]),
        )
        for a in payload["areas"]
    ]
    return areas, params
