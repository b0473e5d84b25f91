"""Command-line pipeline: synth -> ingest -> assess -> cluster -> dml -> whatif.

Every command exits 0 on success and nonzero on any error, writes
artifacts atomically, and is deterministic given its seeds. The
workspace directory defaults to the LUMEN_WORKSPACE environment
variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from lumen import assess, causal, cluster, losses, render, scenario, store, workspace
from lumen.ingest import (
    CATEGORIES,
    CityDataset,
    SyntheticSpec,
    generate_synthetic_city,
    parse_ascii_grid,
    parse_poi_csv,
    poi_csv_text,
    sample_dataset,
)


def _workspace_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--workspace",
        default=os.environ.get("LUMEN_WORKSPACE"),
        help="workspace directory (default: $LUMEN_WORKSPACE)",
    )


def _open_workspace(args) -> workspace.Workspace:
    if not args.workspace:
        raise ValueError("no workspace given: pass --workspace or set LUMEN_WORKSPACE")
    ws = workspace.Workspace(args.workspace)
    if not (ws.root / workspace.MANIFEST_NAME).exists():
        raise FileNotFoundError(f"no manifest in '{ws.root}'; run ingest first")
    return ws


def _parse_kv_floats(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    if not text:
        return out
    for item in text.split(","):
        key, _, value = item.partition("=")
        out[key.strip()] = float(value)
    return out


def cmd_synth(args) -> int:
    counts = {k: int(v) for k, v in _parse_kv_floats(args.counts).items()}
    means = _parse_kv_floats(args.means)
    extent = tuple(float(v) for v in args.extent.split(","))
    if len(extent) != 4:
        raise ValueError("--extent must be lon_min,lat_min,lon_max,lat_max")
    spec = SyntheticSpec(
        seed=args.seed,
        n_residential=args.n_residential,
        per_category_counts=counts,
        per_category_ntl_means=means,
        area_extent=extent,
        ntl_sd=args.sd,
    )
    dataset = generate_synthetic_city(spec)
    workspace.atomic_write_text(args.out, poi_csv_text(dataset.pois))
    print(f"wrote {len(dataset.pois)} POIs to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    pois = parse_poi_csv(args.poi)
    raster = parse_ascii_grid(args.ntl) if args.ntl else None
    dataset = CityDataset(name="city", pois=tuple(pois), raster=raster)
    sampled = sample_dataset(dataset)
    ws = workspace.Workspace.create(args.out)
    with ws.lock():
        inputs = {"poi": workspace.sha256_file(args.poi)}
        manifest_inputs = {"poi": {"path": str(args.poi), "sha256": inputs["poi"]}}
        if args.ntl:
            inputs["ntl"] = workspace.sha256_file(args.ntl)
            manifest_inputs["ntl"] = {"path": str(args.ntl), "sha256": inputs["ntl"]}
        ws.manifest["inputs"] = manifest_inputs
        ws.write_artifact(workspace.DATASET_CSV, poi_csv_text(sampled.pois), inputs)
    print(f"workspace ready: {ws.root}")
    return 0


def cmd_assess(args) -> int:
    ws = _open_workspace(args)
    with ws.lock():
        dataset = store.load_dataset(ws)
        params = assess.InfluenceParams(bandwidth_m=args.bandwidth, side_m=args.side)
        areas = assess.extract_areas(dataset, params, method=args.method)
        table = assess.assess_city(dataset, params, areas=areas)
        dataset_sha = ws.artifact_sha(workspace.DATASET_CSV)
        ws.manifest["params"]["bandwidth_m"] = params.bandwidth_m
        ws.manifest["params"]["side_m"] = params.side_m
        ws.write_artifact(
            workspace.AREAS_JSON,
            assess.areas_to_json(areas, params),
            {workspace.DATASET_CSV: dataset_sha},
        )
        ws.write_artifact(
            workspace.INDICES_CSV,
            assess.indices_to_csv(table),
            {workspace.DATASET_CSV: dataset_sha},
        )
    print(f"assessed {len(table)} areas")
    return 0


def cmd_cluster(args) -> int:
    ws = _open_workspace(args)
    with ws.lock():
        table = store.load_indices(ws)
        if not table:
            raise ValueError("no areas to cluster")
        area_ids = sorted(table)
        points = np.array([[table[a].tnl, table[a].nld, table[a].nlsd] for a in area_ids])
        model = cluster.fit_kmeans(points, k=args.k, seed=args.seed)
        levels = {a: cluster.assign_level(model, table[a]) for a in area_ids}
        ws.manifest["seeds"]["cluster"] = args.seed
        ws.write_artifact(
            workspace.LEVELS_JSON,
            store.levels_payload(model, levels),
            {workspace.INDICES_CSV: ws.artifact_sha(workspace.INDICES_CSV)},
        )
    print(f"clustered into {args.k} levels")
    return 0


def _holdout_diagnostic(design, split, seed, alpha_grid, l1_ratio) -> None:
    fractions = [float(v) for v in split.split(":" if ":" in split else ",")]
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("--split must be three fractions summing to 1")
    n = len(design.y)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    train, val, test = perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]
    if len(train) < 2 or len(val) < 1 or len(test) < 1:
        return
    best, best_mse = None, np.inf
    for alpha in sorted(alpha_grid):
        model = causal.fit_multitask_elastic_net(
            design.x[train], design.y[train], alpha, l1_ratio
        )
        resid = design.y[val] - model.predict(design.x[val])
        mse = float(np.mean(resid * resid))
        if mse < best_mse:
            best, best_mse = model, mse
    resid = design.y[test] - best.predict(design.x[test])
    print(
        f"holdout {split}: n={n} val_mse={best_mse:.6g} "
        f"test_mse={float(np.mean(resid * resid)):.6g}",
        file=sys.stderr,
    )


def cmd_dml(args) -> int:
    ws = _open_workspace(args)
    with ws.lock():
        table = store.load_indices(ws)
        areas, _ = store.load_areas(ws)
        dataset = store.load_dataset(ws)
        alpha_grid = tuple(float(v) for v in args.alpha_grid.split(","))
        config = causal.DmlConfig(
            folds=args.folds,
            alpha_grid=alpha_grid,
            l1_ratio=args.l1_ratio,
            seed=args.seed,
            winsorize=args.winsorize,
            drop_missing=args.drop_missing,
        )
        categories = list(CATEGORIES) if args.category == "all" else [args.category]
        for cat in categories:
            if cat not in CATEGORIES:
                raise ValueError(f"unknown category '{cat}'")
        estimates: dict[str, causal.AteEstimate] = {}
        ate_path = ws.path(workspace.ATE_CSV)
        existing_rows: dict[str, list[str]] = {}
        if ate_path.exists():
            text = ate_path.read_text(encoding="utf-8")
            for line in text.splitlines()[1:]:
                if line.strip():
                    existing_rows.setdefault(line.split(",", 1)[0], []).append(line)
        for cat in categories:
            est = causal.run_dml(dataset, areas, table, cat, config)
            estimates[cat] = est
            if args.split:
                design = causal.build_design(table, dataset, areas, cat)
                _holdout_diagnostic(design, args.split, args.seed, alpha_grid, args.l1_ratio)
        lines = [causal.ATE_CSV_HEADER]
        all_cats = sorted(set(existing_rows) | set(estimates))
        for cat in all_cats:
            if cat in estimates:
                lines.extend(causal.ate_to_csv_rows(estimates[cat]))
            else:
                lines.extend(existing_rows[cat])
        ws.manifest["seeds"]["dml"] = args.seed
        ws.write_artifact(
            workspace.ATE_CSV,
            "\n".join(lines) + "\n",
            {
                workspace.INDICES_CSV: ws.artifact_sha(workspace.INDICES_CSV),
                workspace.AREAS_JSON: ws.artifact_sha(workspace.AREAS_JSON),
            },
        )
    print(f"estimated effects for {', '.join(categories)}")
    return 0


def cmd_whatif(args) -> int:
    ws = _open_workspace(args)
    with ws.lock():
        dataset = store.load_dataset(ws)
        _, params = store.load_areas(ws)
        model, _ = store.load_levels(ws)
        spec_text = open(args.spec, "r", encoding="utf-8").read()
        spec = scenario.spec_from_json(spec_text)
        if args.map_areas == "all":
            map_areas = None
        elif args.map_areas == "none":
            map_areas = []
        else:
            map_areas = args.map_areas.split(",")
        report = scenario.run_scenario(
            dataset, spec, params, model, map_areas=map_areas, map_size=args.map_size
        )
        ws.write_artifact(
            workspace.WHATIF_JSON,
            scenario.report_to_json(report),
            {
                workspace.DATASET_CSV: ws.artifact_sha(workspace.DATASET_CSV),
                workspace.LEVELS_JSON: ws.artifact_sha(workspace.LEVELS_JSON),
            },
        )
    print(f"scenario evaluated over {len(report.areas)} areas")
    return 0


def cmd_render(args) -> int:
    ws = _open_workspace(args)
    with ws.lock():
        dataset = store.load_dataset(ws)
        areas, params = store.load_areas(ws)
        matches = [a for a in areas if a.center_poi_id == args.area]
        if not matches:
            raise ValueError(f"unknown area '{args.area}'")
        area_map = render.render_area(
            matches[0], dataset, params, width=args.size, height=args.size
        )
        data = render.ppm_bytes(area_map)
        if args.out:
            workspace.atomic_write_bytes(args.out, data)
            out_path = args.out
        else:
            name = f"{workspace.MAPS_DIR}/{args.area}.ppm"
            ws.write_artifact(
                name, data, {workspace.DATASET_CSV: ws.artifact_sha(workspace.DATASET_CSV)}
            )
            out_path = ws.path(name)
    print(f"wrote {out_path}")
    return 0


def cmd_metrics(args) -> int:
    img_a = render.read_ppm(args.a)
    img_b = render.read_ppm(args.b)
    metrics = scenario.map_metrics(img_a.pixels, img_b.pixels)
    payload = {k: scenario._json_float(v) for k, v in metrics.items()}
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_losses(args) -> int:
    if not args.selftest:
        raise ValueError("nothing to do: pass --selftest")
    ok, table = losses.selftest(seed=args.seed)
    print(table)
    return 0 if ok else 1


def cmd_serve(args) -> int:
    import uvicorn

    from lumen.service import build_app

    app = build_app(
        args.workspace,
        cors_origin=args.cors_origin,
        max_scenario_areas=args.max_scenario_areas,
        session_ttl_s=args.session_ttl,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lumen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic POI table")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-residential", type=int, default=50)
    p.add_argument("--counts", default="commercial=100,grass=100,industrial=60")
    p.add_argument("--means", default="residential=40,commercial=90,grass=25,industrial=70")
    p.add_argument("--sd", type=float, default=5.0)
    p.add_argument("--extent", default="2.20,48.75,2.50,48.95")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="build a workspace from POI CSV (+ raster)")
    p.add_argument("--poi", required=True)
    p.add_argument("--ntl")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("assess", help="extract areas and compute indices")
    _workspace_arg(p)
    p.add_argument("--bandwidth", type=float, default=1500.0)
    p.add_argument("--side", type=float, default=2000.0)
    p.add_argument("--method", choices=["kdtree", "naive"], default="kdtree")
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("cluster", help="fit pollution levels")
    _workspace_arg(p)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("dml", help="estimate category treatment effects")
    _workspace_arg(p)
    p.add_argument("--category", required=True, help="one of the nine categories, or 'all'")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l1-ratio", type=float, default=0.5)
    p.add_argument(
        "--alpha-grid",
        default=",".join(repr(a) for a in causal.DEFAULT_ALPHA_GRID),
    )
    p.add_argument("--split", default="0.7,0.15,0.15", help="holdout diagnostic fractions")
    p.add_argument("--winsorize", action="store_true")
    p.add_argument("--drop-missing", action="store_true")
    p.set_defaults(func=cmd_dml)

    p = sub.add_parser("whatif", help="evaluate an intervention spec")
    _workspace_arg(p)
    p.add_argument("--spec", required=True)
    p.add_argument("--map-areas", default="all", help="'all', 'none', or comma-separated ids")
    p.add_argument("--map-size", type=int, default=64)
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("render", help="rasterize one area's plot map")
    _workspace_arg(p)
    p.add_argument("--area", required=True)
    p.add_argument("--out")
    p.add_argument("--size", type=int, default=256)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("metrics", help="compare two PPM images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("losses", help="loss-kernel utilities")
    p.add_argument("--selftest", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_losses)

    p = sub.add_parser("serve", help="serve the scenario API over HTTP")
    _workspace_arg(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--cors-origin", default=None)
    p.add_argument("--max-scenario-areas", type=int, default=2000)
    p.add_argument("--session-ttl", type=float, default=1800.0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except (ValueError, KeyError, OSError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
