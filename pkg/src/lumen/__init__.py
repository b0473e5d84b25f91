"""Light-pollution toolkit: ingest, assess, cluster, causal effects, what-if."""

__version__ = "0.1.0"

from lumen.ingest import (
    CATEGORIES,
    CityDataset,
    NtlRaster,
    Poi,
    SyntheticSpec,
    generate_synthetic_city,
    parse_ascii_grid,
    parse_poi_csv,
    sample_ntl,
)

__all__ = [
    "CATEGORIES",
    "CityDataset",
    "NtlRaster",
    "Poi",
    "SyntheticSpec",
    "generate_synthetic_city",
    "parse_ascii_grid",
    "parse_poi_csv",
    "sample_ntl",
    "__version__",
]
