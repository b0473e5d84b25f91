"""POI tables, nighttime-light rasters, and synthetic city generation.

All ingestion is file based: POIs arrive as CSV, light intensity as an
ESRI ASCII grid. Parsed datasets are immutable and safe to share across
threads.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

CATEGORIES = (
    "brownfield",
    "commercial",
    "construction",
    "farmland",
    "forest",
    "grass",
    "industrial",
    "residential",
    "retail",
)

POI_CSV_HEADER = ("id", "lon", "lat", "category", "ntl")


class ParseError(ValueError):
    """Malformed input file."""


@dataclass(frozen=True)
class Poi:
    """One point of interest with an optional sampled light intensity."""

    id: str
    lon: float
    lat: float
    category: str
    ntl: float | None = None

    def __post_init__(self):
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon out of range for poi '{self.id}': {self.lon}")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat out of range for poi '{self.id}': {self.lat}")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category '{self.category}' for poi '{self.id}'")
        if self.ntl is not None and not self.ntl >= 0.0:
            raise ValueError(f"ntl must be >= 0 for poi '{self.id}': {self.ntl}")


@dataclass
class NtlRaster:
    """Gridded light intensity, row-major with the northernmost row first."""

    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata: float
    values: np.ndarray  # shape (nrows, ncols), float64

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(
            self.nrows, self.ncols
        )
        if self.ncols <= 0 or self.nrows <= 0:
            raise ValueError("raster dimensions must be positive")
        if self.cellsize <= 0:
            raise ValueError("cellsize must be positive")
        valid = self.values[self.values != self.nodata]
        if valid.size and valid.min() < 0:
            raise ValueError("raster contains negative intensity values")

    @property
    def lon_max(self) -> float:
        return self.xllcorner + self.ncols * self.cellsize

    @property
    def lat_max(self) -> float:
        return self.yllcorner + self.nrows * self.cellsize


@dataclass(frozen=True)
class CityDataset:
    """A named collection of POIs plus the raster they were sampled from."""

    name: str
    pois: tuple[Poi, ...]
    raster: NtlRaster | None = None
    crs_note: str = "WGS84"
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        by_id = {}
        for poi in self.pois:
            if poi.id in by_id:
                raise ValueError(f"duplicate poi id '{poi.id}'")
            by_id[poi.id] = poi
        object.__setattr__(self, "_by_id", by_id)

    def poi(self, poi_id: str) -> Poi:
        return self._by_id[poi_id]

    def __len__(self) -> int:
        return len(self.pois)


def parse_poi_csv(path) -> list[Poi]:
    """Parse a POI CSV with header ``id,lon,lat,category,ntl``.

    An empty ntl field leaves the intensity unset. Errors carry the
    1-based line number of the offending row.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_poi_rows(fh, str(path))


def parse_poi_csv_text(text: str, source: str = "<string>") -> list[Poi]:
    return _parse_poi_rows(io.StringIO(text), source)


def _parse_poi_rows(fh, source: str) -> list[Poi]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{source}: empty file") from None
    header = tuple(h.strip() for h in header)
    if header != POI_CSV_HEADER:
        raise ParseError(
            f"{source}: expected header {','.join(POI_CSV_HEADER)}, got {','.join(header)}"
        )
    pois: list[Poi] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 5:
            raise ParseError(f"malformed row, line {lineno}: expected 5 fields, got {len(row)}")
        pid, lon_s, lat_s, category, ntl_s = (c.strip() for c in row)
        if pid in seen:
            raise ParseError(f"duplicate id '{pid}', line {lineno}")
        try:
            lon = float(lon_s)
            lat = float(lat_s)
        except ValueError:
            raise ParseError(f"malformed coordinates, line {lineno}") from None
        if not -180.0 <= lon <= 180.0:
            raise ParseError(f"lon out of range, line {lineno}")
        if not -90.0 <= lat <= 90.0:
            raise ParseError(f"lat out of range, line {lineno}")
        if category not in CATEGORIES:
            raise ParseError(f"unknown category '{category}', line {lineno}")
        ntl: float | None
        if ntl_s == "":
            ntl = None
        else:
            try:
                ntl = float(ntl_s)
            except ValueError:
                raise ParseError(f"malformed ntl value, line {lineno}") from None
            if not ntl >= 0.0:
                raise ParseError(f"ntl must be >= 0, line {lineno}")
        seen.add(pid)
        pois.append(Poi(pid, lon, lat, category, ntl))
    return pois


def write_poi_csv(pois, path) -> None:
    """Write POIs in the canonical CSV form accepted by :func:`parse_poi_csv`."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(poi_csv_text(pois))


def poi_csv_text(pois) -> str:
    out = [",".join(POI_CSV_HEADER)]
    for poi in pois:
        ntl = "" if poi.ntl is None else repr(float(poi.ntl))
        out.append(f"{poi.id},{poi.lon!r},{poi.lat!r},{poi.category},{ntl}")
    return "\n".join(out) + "\n"


_GRID_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def parse_ascii_grid(path) -> NtlRaster:
    """Parse an ESRI ASCII grid: six header lines then nrows data rows."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_ascii_grid_text(text, str(path))


def parse_ascii_grid_text(text: str, source: str = "<string>") -> NtlRaster:
    lines = text.splitlines()
    header: dict[str, float] = {}
    idx = 0
    while idx < len(lines) and len(header) < 6:
        line = lines[idx].strip()
        if not line:
            idx += 1
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0].lower() not in _GRID_HEADER_KEYS:
            break  # data rows start here; completeness is checked below
        key = parts[0].lower()
        try:
            header[key] = float(parts[1])
        except ValueError:
            raise ParseError(f"{source}: non-numeric header value for '{parts[0]}'") from None
        idx += 1
    for key in _GRID_HEADER_KEYS:
        if key not in header:
            raise ParseError(f"{source}: missing header key '{key}'")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    cells = " ".join(lines[idx:]).split()
    expected = ncols * nrows
    if len(cells) != expected:
        raise ParseError(f"{source}: expected {expected} cells, found {len(cells)}")
    values = np.array([float(c) for c in cells], dtype=np.float64).reshape(nrows, ncols)
    return NtlRaster(
        ncols=ncols,
        nrows=nrows,
        xllcorner=header["xllcorner"],
        yllcorner=header["yllcorner"],
        cellsize=header["cellsize"],
        nodata=header["nodata_value"],
        values=values,
    )


def write_ascii_grid(raster: NtlRaster, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(ascii_grid_text(raster))


def ascii_grid_text(raster: NtlRaster) -> str:
    out = [
        f"ncols {raster.ncols}",
        f"nrows {raster.nrows}",
        f"xllcorner {raster.xllcorner!r}",
        f"yllcorner {raster.yllcorner!r}",
        f"cellsize {raster.cellsize!r}",
        f"NODATA_value {raster.nodata!r}",
    ]
    for row in raster.values:
        out.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(out) + "\n"


def sample_ntl(raster: NtlRaster, lon: float, lat: float) -> float | None:
    """Value of the raster cell containing (lon, lat); None on a nodata cell.

    Cell index is floor((coord - llcorner) / cellsize); a point exactly on
    the upper edge belongs to the last cell.
    """
    if not (raster.xllcorner <= lon <= raster.lon_max) or not (
        raster.yllcorner <= lat <= raster.lat_max
    ):
        raise ValueError(
            f"point ({lon}, {lat}) outside raster bounds "
            f"[{raster.xllcorner}, {raster.lon_max}] x [{raster.yllcorner}, {raster.lat_max}]"
        )
    col = int(np.floor((lon - raster.xllcorner) / raster.cellsize))
    row_s = int(np.floor((lat - raster.yllcorner) / raster.cellsize))
    col = min(col, raster.ncols - 1)
    row_s = min(row_s, raster.nrows - 1)
    value = float(raster.values[raster.nrows - 1 - row_s, col])
    if value == raster.nodata:
        return None
    return value


def sample_dataset(dataset: CityDataset, raster: NtlRaster | None = None) -> CityDataset:
    """Fill unset POI intensities from the raster; sampled values stay as-is.

    Raises if a POI lacks intensity and no raster (or a nodata cell) can
    supply one.
    """
    raster = raster if raster is not None else dataset.raster
    pois = []
    for poi in dataset.pois:
        if poi.ntl is not None:
            pois.append(poi)
            continue
        if raster is None:
            raise ValueError(f"poi '{poi.id}' has no ntl and no raster was provided")
        value = sample_ntl(raster, poi.lon, poi.lat)
        if value is None:
            raise ValueError(f"poi '{poi.id}' samples a nodata raster cell")
        if value < 0:
            raise ValueError(f"poi '{poi.id}' sampled negative intensity {value}")
        pois.append(replace(poi, ntl=value))
    return CityDataset(name=dataset.name, pois=tuple(pois), raster=raster)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a deterministic synthetic city.

    per_category_counts covers the non-residential categories; residential
    POIs are controlled by n_residential. Intensities are drawn from a
    normal around the category mean (negatives clamped to zero).
    """

    seed: int
    n_residential: int
    per_category_counts: dict[str, int]
    per_category_ntl_means: dict[str, float]
    area_extent: tuple[float, float, float, float]  # lon_min, lat_min, lon_max, lat_max
    ntl_sd: float = 5.0
    name: str = "synthetic"

    def __post_init__(self):
        lon_min, lat_min, lon_max, lat_max = self.area_extent
        if not (lon_max > lon_min and lat_max > lat_min):
            raise ValueError("empty extent")
        if self.n_residential < 0:
            raise ValueError("n_residential must be >= 0")
        for cat, count in self.per_category_counts.items():
            if cat not in CATEGORIES:
                raise ValueError(f"unknown category '{cat}'")
            if count < 0:
                raise ValueError(f"count for '{cat}' must be >= 0")
        for cat, mean in self.per_category_ntl_means.items():
            if cat not in CATEGORIES:
                raise ValueError(f"unknown category '{cat}'")
            if mean < 0:
                raise ValueError(f"ntl mean for '{cat}' must be >= 0")
        if self.ntl_sd < 0:
            raise ValueError("ntl_sd must be >= 0")


def generate_synthetic_city(spec: SyntheticSpec) -> CityDataset:
    """Deterministic city: POIs uniform in the extent, category-mean lighting."""
    rng = np.random.default_rng(spec.seed)
    lon_min, lat_min, lon_max, lat_max = spec.area_extent
    counts = dict(spec.per_category_counts)
    counts["residential"] = counts.get("residential", 0) + spec.n_residential
    pois: list[Poi] = []
    for cat in CATEGORIES:
        n = counts.get(cat, 0)
        if n == 0:
            continue
        lons = rng.uniform(lon_min, lon_max, size=n)
        lats = rng.uniform(lat_min, lat_max, size=n)
        mean = spec.per_category_ntl_means.get(cat, 0.0)
        if spec.ntl_sd == 0.0:
            ntls = np.full(n, mean)
        else:
            ntls = np.clip(rng.normal(mean, spec.ntl_sd, size=n), 0.0, None)
        for i in range(n):
            pois.append(
                Poi(
                    id=f"{cat}-{i:06d}",
                    lon=float(lons[i]),
                    lat=float(lats[i]),
                    category=cat,
                    ntl=float(ntls[i]),
                )
            )
    return CityDataset(name=spec.name, pois=tuple(pois))
