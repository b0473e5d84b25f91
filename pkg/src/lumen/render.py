"""Rasterize an area's plot partition into a color-coded pollution map.

Pixels are colored by the influence of the plot (Voronoi cell) that
contains them, normalized by the area's maximum influence; plot
boundaries and the bbox frame are 1-px black. Output is binary PPM (P6)
for bit-exact comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lumen import geometry
from lumen.assess import InfluenceParams, ResidentialArea, member_influences
from lumen.ingest import CityDataset

# dark blue -> blue -> teal -> yellow -> red
DEFAULT_STOPS = (
    (8, 16, 72),
    (24, 96, 192),
    (16, 192, 144),
    (240, 224, 48),
    (208, 32, 32),
)


@dataclass(frozen=True)
class ColorRamp:
    """Piecewise-linear ramp over equally spaced stops; monotone in position."""

    stops: tuple[tuple[int, int, int], ...] = DEFAULT_STOPS

    def __call__(self, t: np.ndarray) -> np.ndarray:
        """Map values in [0, 1] to uint8 RGB rows."""
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
        stops = np.asarray(self.stops, dtype=np.float64)
        n_seg = len(stops) - 1
        pos = t * n_seg
        seg = np.minimum(pos.astype(np.int64), n_seg - 1)
        frac = (pos - seg)[..., None]
        rgb = stops[seg] * (1.0 - frac) + stops[seg + 1] * frac
        return np.rint(rgb).astype(np.uint8)


@dataclass
class AreaMap:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8
    legend: dict[str, dict] = field(default_factory=dict)


def render_area(
    area: ResidentialArea,
    dataset: CityDataset,
    params: InfluenceParams = InfluenceParams(),
    style: ColorRamp = ColorRamp(),
    width: int = 256,
    height: int = 256,
) -> AreaMap:
    """Deterministic map of the area's plots, colored by influence."""
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    infl = member_influences(area, dataset, params)
    max_infl = float(infl.max()) if infl.size else 0.0
    norm = infl / max_infl if max_infl > 0 else np.zeros_like(infl)
    colors = style(norm)

    lons = np.array([dataset.poi(pid).lon for pid in area.members])
    lats = np.array([dataset.poi(pid).lat for pid in area.members])
    px, py = geometry.local_xy(lons, lats, area.center_lon, area.center_lat)
    pts = np.column_stack([px, py])

    half = area.side_m / 2.0
    xs = (np.arange(width) + 0.5) / width * area.side_m - half
    ys = half - (np.arange(height) + 0.5) / height * area.side_m
    gx, gy = np.meshgrid(xs, ys)

    if len(pts):
        # nearest member per pixel; argmin takes the first (lowest) index on ties
        cell = np.empty((height, width), dtype=np.int64)
        chunk = max(1, int(2_000_000 / max(1, len(pts))))
        flat_x, flat_y = gx.reshape(-1), gy.reshape(-1)
        out = np.empty(flat_x.size, dtype=np.int64)
        for start in range(0, flat_x.size, chunk):
            sl = slice(start, start + chunk)
            dx = flat_x[sl, None] - pts[None, :, 0]
            dy = flat_y[sl, None] - pts[None, :, 1]
            out[sl] = np.argmin(dx * dx + dy * dy, axis=1)
        cell = out.reshape(height, width)
        pixels = colors[cell]
        boundary = np.zeros((height, width), dtype=bool)
        boundary[:, :-1] |= cell[:, :-1] != cell[:, 1:]
        boundary[:-1, :] |= cell[:-1, :] != cell[1:, :]
    else:
        pixels = np.tile(np.asarray(style(np.zeros(1))[0]), (height, width, 1))
        boundary = np.zeros((height, width), dtype=bool)
    boundary[0, :] = boundary[-1, :] = True
    boundary[:, 0] = boundary[:, -1] = True
    pixels = pixels.copy()
    pixels[boundary] = 0

    legend = {
        pid: {
            "influence": float(infl[k]),
            "color": [int(c) for c in colors[k]],
        }
        for k, pid in enumerate(area.members)
    }
    return AreaMap(width=width, height=height, pixels=pixels, legend=legend)


def ppm_bytes(area_map: AreaMap) -> bytes:
    header = f"P6\n{area_map.width} {area_map.height}\n255\n".encode("ascii")
    return header + area_map.pixels.tobytes()


def write_ppm(area_map: AreaMap, path) -> None:
    """Binary PPM: 'P6\\n<w> <h>\\n255\\n' then raw RGB bytes."""
    try:
        with open(path, "wb") as fh:
            fh.write(ppm_bytes(area_map))
    except OSError as exc:
        raise OSError(f"failed writing PPM to '{path}': {exc}") from exc


def read_ppm(path) -> AreaMap:
    """Minimal P6 reader for round-trips and the metrics command."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise ValueError(f"'{path}' is not a binary PPM (P6) file")
    parts = data.split(b"\n", 3)
    if len(parts) < 4:
        raise ValueError(f"'{path}': truncated PPM header")
    dims = parts[1].split()
    width, height = int(dims[0]), int(dims[1])
    maxval = int(parts[2])
    if maxval != 255:
        raise ValueError(f"'{path}': unsupported max value {maxval}")
    raw = parts[3]
    expected = width * height * 3
    if len(raw) != expected:
        raise ValueError(f"'{path}': expected {expected} pixel bytes, found {len(raw)}")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return AreaMap(width=width, height=height, pixels=pixels.copy())
