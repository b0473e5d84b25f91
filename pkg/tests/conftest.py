import math

import numpy as np
import pytest

from lumen import assess
from lumen.geometry import M_PER_DEG
from lumen.ingest import CityDataset, Poi, SyntheticSpec, generate_synthetic_city

CENTER_LON = 2.33
CENTER_LAT = 48.85


def poi_at_offset(pid, category, ntl, x_m=0.0, y_m=0.0, lon_c=CENTER_LON, lat_c=CENTER_LAT):
    """POI placed at a local metric offset from (lon_c, lat_c)."""
    coslat = math.cos(math.radians(lat_c))
    return Poi(
        id=pid,
        lon=lon_c + x_m / (coslat * M_PER_DEG),
        lat=lat_c + y_m / M_PER_DEG,
        category=category,
        ntl=ntl,
    )


def city_of(*pois):
    return CityDataset(name="test", pois=tuple(pois))


@pytest.fixture
def params():
    return assess.InfluenceParams()


@pytest.fixture(scope="session")
def small_city():
    """~265 POIs across all nine categories, 30 residential centers."""
    spec = SyntheticSpec(
        seed=7,
        n_residential=30,
        per_category_counts={
            "commercial": 60,
            "grass": 60,
            "industrial": 40,
            "retail": 30,
            "brownfield": 10,
            "construction": 15,
            "farmland": 10,
            "forest": 10,
        },
        per_category_ntl_means={
            "residential": 40,
            "commercial": 90,
            "grass": 25,
            "industrial": 70,
            "retail": 55,
            "brownfield": 5,
            "construction": 35,
            "farmland": 6,
            "forest": 2,
        },
        area_extent=(2.30, 48.80, 2.36, 48.86),
    )
    return generate_synthetic_city(spec)


@pytest.fixture(scope="session")
def fixture_city_50():
    """Exactly 50 POIs, dense enough that areas overlap."""
    spec = SyntheticSpec(
        seed=11,
        n_residential=8,
        per_category_counts={"commercial": 14, "grass": 14, "industrial": 8, "retail": 6},
        per_category_ntl_means={
            "residential": 40,
            "commercial": 90,
            "grass": 25,
            "industrial": 70,
            "retail": 55,
        },
        area_extent=(2.32, 48.84, 2.345, 48.86),
    )
    city = generate_synthetic_city(spec)
    assert len(city.pois) == 50
    return city


def brute_force_indices(dataset, params):
    """All-pairs oracle for the assessment table, no spatial index, no reuse
    of the library's membership helper."""
    out = {}
    for center in dataset.pois:
        if center.category != "residential":
            continue
        coslat = math.cos(math.radians(center.lat))
        infl = []
        for poi in sorted(dataset.pois, key=lambda p: p.id):
            x = (poi.lon - center.lon) * coslat * M_PER_DEG
            y = (poi.lat - center.lat) * M_PER_DEG
            if abs(x) <= params.side_m / 2 and abs(y) <= params.side_m / 2:
                d = math.hypot(x, y)
                infl.append(
                    poi.ntl
                    / (math.sqrt(2 * math.pi) * params.bandwidth_m)
                    * math.exp(-(d * d) / (2 * params.bandwidth_m**2))
                )
        infl = np.array(infl)
        tnl = math.fsum(infl)
        self_i = center.ntl / (math.sqrt(2 * math.pi) * params.bandwidth_m)
        mean = math.fsum(infl) / len(infl)
        nlsd = math.sqrt(math.fsum((infl - mean) ** 2) / len(infl))
        out[center.id] = (tnl, tnl - self_i, nlsd)
    return out
