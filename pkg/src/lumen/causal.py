"""Debiased treatment-effect estimation for building categories.

Two stages: cross-fitted nuisance regressions strip the confounders out
of both the outcome indices and the treatment features, then a low
dimensional least squares of residual on residual yields the average
treatment effect with heteroskedasticity-robust standard errors.

The nuisance learner is a multi-task elastic net solved by block
coordinate descent: rows of the coefficient matrix are soft-thresholded
as groups, which couples the tasks through a shared sparsity pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lumen import geometry
from lumen.assess import PollutionIndices, ResidentialArea
from lumen.ingest import CATEGORIES, CityDataset

Z95 = 1.959964  # two-sided 95% normal quantile as pinned in the interfaces

TREATMENT_NAMES = ("count", "mean_ntl", "mean_dist")
OUTCOME_NAMES = ("tnl", "nld", "nlsd")

DEFAULT_ALPHA_GRID = tuple(float(a) for a in np.logspace(-4.0, 1.0, 10))


@dataclass
class CausalDesign:
    """Aligned outcome/treatment/confounder blocks for one treated category.

    Row i of y, t, x describes the same residential area. Blocks are
    standardized; (mean, sd) pairs are kept so effects can be mapped back
    to raw units.
    """

    category: str
    y: np.ndarray  # (n, 3)
    t: np.ndarray  # (n, 3)
    x: np.ndarray  # (n, p)
    area_ids: list[str] | None = None
    outcome_names: tuple[str, ...] = OUTCOME_NAMES
    treatment_names: tuple[str, ...] = TREATMENT_NAMES
    confounder_names: tuple[str, ...] = ()
    y_stats: tuple[np.ndarray, np.ndarray] | None = None
    t_stats: tuple[np.ndarray, np.ndarray] | None = None
    x_stats: tuple[np.ndarray, np.ndarray] | None = None


@dataclass
class ElasticNetModel:
    coef: np.ndarray  # (p, m)
    intercepts: np.ndarray  # (m,)
    alpha: float
    l1_ratio: float
    max_iter: int
    tol: float
    converged: bool
    n_sweeps: int
    objective_trace: list[float] = field(repr=False, default_factory=list)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercepts


def _enet_objective(Xc, Yc, W, alpha, l1_ratio) -> float:
    n = len(Xc)
    R = Yc - Xc @ W
    row_norms = np.sqrt(np.sum(W * W, axis=1))
    return float(
        np.sum(R * R) / (2.0 * n)
        + alpha * l1_ratio * row_norms.sum()
        + 0.5 * alpha * (1.0 - l1_ratio) * np.sum(W * W)
    )


def fit_multitask_elastic_net(
    X,
    Y,
    alpha: float,
    l1_ratio: float = 0.5,
    max_iter: int = 2000,
    tol: float = 1e-5,
    w_init: np.ndarray | None = None,
) -> ElasticNetModel:
    """Minimize (1/2n)||Y - XW - b||_F^2 + a*r*sum_j ||W_j||_2 + a(1-r)/2 ||W||_F^2.

    Block coordinate descent over coefficient rows with the group
    soft-threshold update; the objective is checked non-increasing every
    sweep. Converges when the largest coordinate update in a sweep drops
    below tol.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
        raise ValueError("non-finite values in design or targets")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if not 0.0 <= l1_ratio <= 1.0:
        raise ValueError("l1_ratio must be in [0, 1]")
    n, p = X.shape
    m = Y.shape[1]
    if n < 2:
        raise ValueError("need at least 2 rows")

    x_mean = X.mean(axis=0)
    y_mean = Y.mean(axis=0)
    Xc = X - x_mean
    Yc = Y - y_mean
    col_sq = np.sum(Xc * Xc, axis=0) / n
    lam1 = alpha * l1_ratio
    lam2 = alpha * (1.0 - l1_ratio)

    W = np.zeros((p, m)) if w_init is None else np.array(w_init, dtype=np.float64)
    R = Yc - Xc @ W
    trace = [_enet_objective(Xc, Yc, W, alpha, l1_ratio)]
    converged = False
    sweep = 0
    for sweep in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(p):
            denom = col_sq[j] + lam2
            if denom == 0.0:
                continue
            w_j = W[j]
            u = Xc[:, j] @ R / n + col_sq[j] * w_j
            norm_u = math.sqrt(float(u @ u))
            if norm_u <= lam1:
                w_new = np.zeros(m)
            else:
                w_new = u * ((1.0 - lam1 / norm_u) / denom)
            delta = w_new - w_j
            step = float(np.max(np.abs(delta)))
            if step > 0.0:
                R -= np.outer(Xc[:, j], delta)
                W[j] = w_new
                max_delta = max(max_delta, step)
        obj = _enet_objective(Xc, Yc, W, alpha, l1_ratio)
        if obj > trace[-1] + 1e-10 * max(1.0, abs(trace[-1])):
            raise AssertionError(
                f"objective increased in sweep {sweep}: {trace[-1]} -> {obj}"
            )
        trace.append(obj)
        if max_delta < tol:
            converged = True
            break

    intercepts = y_mean - x_mean @ W
    return ElasticNetModel(
        coef=W,
        intercepts=intercepts,
        alpha=alpha,
        l1_ratio=l1_ratio,
        max_iter=max_iter,
        tol=tol,
        converged=converged,
        n_sweeps=sweep,
        objective_trace=trace,
    )


def _fit_alpha_path(X, Y, alphas_desc, l1_ratio, max_iter, tol):
    """Warm-started fits along a descending alpha path; returns {alpha: model}."""
    models = {}
    w = None
    for alpha in alphas_desc:
        model = fit_multitask_elastic_net(
            X, Y, alpha, l1_ratio, max_iter=max_iter, tol=tol, w_init=w
        )
        w = model.coef
        models[alpha] = model
    return models


def _select_alpha(X, Y, inner_folds, alpha_grid, l1_ratio, max_iter, tol):
    """Pooled held-out MSE over the inner folds; smallest alpha wins ties."""
    alphas = sorted(set(float(a) for a in alpha_grid))
    sq_err = {a: 0.0 for a in alphas}
    count = 0
    for val_rows, train_rows in inner_folds:
        models = _fit_alpha_path(
            X[train_rows], Y[train_rows], sorted(alphas, reverse=True),
            l1_ratio, max_iter, tol,
        )
        count += Y[val_rows].size
        for a in alphas:
            resid = Y[val_rows] - models[a].predict(X[val_rows])
            sq_err[a] += float(np.sum(resid * resid))
    mse = [sq_err[a] / count for a in alphas]
    return alphas[int(np.argmin(mse))]


def cross_fit_residuals(
    design: CausalDesign,
    folds: int = 3,
    alpha_grid=DEFAULT_ALPHA_GRID,
    l1_ratio: float = 0.5,
    seed: int = 0,
    max_iter: int = 2000,
    tol: float = 1e-5,
    fold_assignment: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-fold residuals of outcome and treatment on the confounders.

    Rows are ordered canonically by area id before the seeded shuffle, so
    permuting the input rows (with the same ids) yields identical
    residuals per id. Each fold's nuisance alpha is chosen by grid search
    on held-out MSE over the remaining folds.
    """
    Y, T, X = design.y, design.t, design.x
    n = len(Y)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise ValueError(f"need at least {folds} rows, got {n}")

    if design.area_ids is not None:
        canonical = np.argsort(np.array(design.area_ids, dtype=object), kind="stable")
    else:
        canonical = np.arange(n)

    if fold_assignment is not None:
        fold_of = np.asarray(fold_assignment, dtype=np.int64)
        if fold_of.shape != (n,):
            raise ValueError("fold_assignment must have one entry per row")
    else:
        rng = np.random.default_rng(seed)
        shuffled = canonical[rng.permutation(n)]
        fold_of = np.empty(n, dtype=np.int64)
        for k, chunk in enumerate(np.array_split(shuffled, folds)):
            fold_of[chunk] = k

    rank = np.empty(n, dtype=np.int64)
    rank[canonical] = np.arange(n)
    fold_rows = []
    for k in range(folds):
        rows = np.where(fold_of == k)[0]
        rows = rows[np.argsort(rank[rows], kind="stable")]
        if len(rows) < 2:
            raise ValueError(f"fold {k} has fewer than 2 rows")
        fold_rows.append(rows)

    y_tilde = np.empty_like(Y)
    t_tilde = np.empty_like(T)
    for k in range(folds):
        test = fold_rows[k]
        others = [j for j in range(folds) if j != k]
        train = np.concatenate([fold_rows[j] for j in others])
        if len(others) >= 2:
            inner = [
                (
                    fold_rows[j],
                    np.concatenate([fold_rows[i] for i in others if i != j]),
                )
                for j in others
            ]
        else:
            # two outer folds leave a single training chunk; halve it
            chunk = fold_rows[others[0]]
            h1, h2 = chunk[: len(chunk) // 2], chunk[len(chunk) // 2 :]
            inner = [(h1, h2), (h2, h1)]
        for target, out in ((Y, y_tilde), (T, t_tilde)):
            best_alpha = _select_alpha(
                X, target, inner, alpha_grid, l1_ratio, max_iter, tol
            )
            model = fit_multitask_elastic_net(
                X[train], target[train], best_alpha, l1_ratio, max_iter, tol
            )
            out[test] = target[test] - model.predict(X[test])
    return y_tilde, t_tilde


@dataclass
class AteEstimate:
    """Per-category effect matrix (treatment variable x outcome index)."""

    category: str
    theta: np.ndarray
    stderr: np.ndarray
    p_value: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_used: int
    folds: int
    treatment_names: tuple[str, ...] = TREATMENT_NAMES
    outcome_names: tuple[str, ...] = OUTCOME_NAMES

    def stars(self, i: int, j: int) -> str:
        return significance_stars(float(self.p_value[i, j]))


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def estimate_ate(
    y_tilde: np.ndarray,
    t_tilde: np.ndarray,
    category: str = "",
    folds: int = 0,
    treatment_names: tuple[str, ...] | None = None,
    outcome_names: tuple[str, ...] | None = None,
) -> AteEstimate:
    """Least squares of residualized outcome on residualized treatment.

    Standard errors come from the heteroskedasticity-robust sandwich
    (T'T)^-1 (sum_i e_i^2 t_i t_i') (T'T)^-1; p-values use the two-sided
    normal approximation.
    """
    Y = np.asarray(y_tilde, dtype=np.float64)
    T = np.asarray(t_tilde, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if T.ndim == 1:
        T = T[:, None]
    n, k_t = T.shape
    m = Y.shape[1]
    if n <= k_t:
        raise ValueError(f"need more rows than treatment variables ({n} <= {k_t})")
    G = T.T @ T
    if np.linalg.cond(G) > 1e10:
        raise ValueError("collinear treatments")
    G_inv = np.linalg.inv(G)

    theta = np.empty((k_t, m))
    stderr = np.empty((k_t, m))
    for j in range(m):
        coef = G_inv @ (T.T @ Y[:, j])
        resid = Y[:, j] - T @ coef
        meat = (T * (resid * resid)[:, None]).T @ T
        cov = G_inv @ meat @ G_inv
        theta[:, j] = coef
        stderr[:, j] = np.sqrt(np.maximum(np.diag(cov), 0.0))

    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.abs(theta) / stderr
    z = np.where(stderr == 0.0, np.where(theta == 0.0, 0.0, np.inf), z)
    p = np.array([[math.erfc(zz / math.sqrt(2.0)) if math.isfinite(zz) else 0.0 for zz in row] for row in z])
    tn = treatment_names or tuple(f"t{i}" for i in range(k_t))
    on = outcome_names or tuple(f"y{j}" for j in range(m))
    return AteEstimate(
        category=category,
        theta=theta,
        stderr=stderr,
        p_value=p,
        ci_low=theta - Z95 * stderr,
        ci_high=theta + Z95 * stderr,
        n_used=n,
        folds=folds,
        treatment_names=tn,
        outcome_names=on,
    )


@dataclass(frozen=True)
class DmlConfig:
    folds: int = 3
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    l1_ratio: float = 0.5
    seed: int = 0
    max_iter: int = 2000
    tol: float = 1e-5
    winsorize: bool = False
    drop_missing: bool = False


def category_features(
    area: ResidentialArea, dataset: CityDataset, category: str
) -> tuple[float, float, float]:
    """(count, mean ntl, mean center distance) of one category's members.

    Areas without that category get the sentinel (0, 0, side/2) so the
    design stays dense.
    """
    ntls = []
    dists = []
    for pid in area.members:
        poi = dataset.poi(pid)
        if poi.category != category:
            continue
        if poi.ntl is None:
            raise ValueError(f"poi '{pid}' has no sampled ntl")
        x, y = geometry.local_xy(poi.lon, poi.lat, area.center_lon, area.center_lat)
        ntls.append(poi.ntl)
        dists.append(math.hypot(float(x), float(y)))
    if not ntls:
        return 0.0, 0.0, area.side_m / 2.0
    return float(len(ntls)), float(np.mean(ntls)), float(np.mean(dists))


def _standardize(block: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = block.mean(axis=0)
    sds = block.std(axis=0)
    sds = np.where(sds == 0.0, 1.0, sds)
    return (block - means) / sds, means, sds


def build_design(
    assessments: dict[str, PollutionIndices],
    dataset: CityDataset,
    areas: list[ResidentialArea],
    category: str,
    winsorize: bool = False,
    drop_missing: bool = False,
) -> CausalDesign:
    """Standardized (outcome, treatment, confounder) blocks for a category."""
    if category not in CATEGORIES:
        raise ValueError(f"unknown category '{category}'")
    areas = sorted(areas, key=lambda a: a.center_poi_id)
    others = tuple(c for c in CATEGORIES if c != category)
    area_ids = []
    y_rows, t_rows, x_rows = [], [], []
    for area in areas:
        ind = assessments[area.center_poi_id]
        feats = {c: category_features(area, dataset, c) for c in CATEGORIES}
        if drop_missing and feats[category][0] == 0.0:
            continue
        area_ids.append(area.center_poi_id)
        y_rows.append([ind.tnl, ind.nld, ind.nlsd])
        t_rows.append(list(feats[category]))
        x_rows.append([v for c in others for v in feats[c]])
    if not t_rows:
        raise ValueError(f"category '{category}' absent from all areas")
    Y = np.array(y_rows, dtype=np.float64)
    T = np.array(t_rows, dtype=np.float64)
    X = np.array(x_rows, dtype=np.float64)
    if not np.any(T[:, 0] > 0):
        raise ValueError(f"category '{category}' absent from all areas")
    if winsorize:
        lo = np.percentile(Y, 1, axis=0)
        hi = np.percentile(Y, 99, axis=0)
        Y = np.clip(Y, lo, hi)
    Yz, y_mean, y_sd = _standardize(Y)
    Tz, t_mean, t_sd = _standardize(T)
    Xz, x_mean, x_sd = _standardize(X)
    confounder_names = tuple(f"{c}_{f}" for c in others for f in TREATMENT_NAMES)
    return CausalDesign(
        category=category,
        y=Yz,
        t=Tz,
        x=Xz,
        area_ids=area_ids,
        confounder_names=confounder_names,
        y_stats=(y_mean, y_sd),
        t_stats=(t_mean, t_sd),
        x_stats=(x_mean, x_sd),
    )


def run_dml(
    dataset: CityDataset,
    areas: list[ResidentialArea],
    assessments: dict[str, PollutionIndices],
    category: str,
    config: DmlConfig = DmlConfig(),
) -> AteEstimate:
    """build_design -> cross_fit_residuals -> estimate_ate, deterministic in seed."""
    design = build_design(
        assessments,
        dataset,
        areas,
        category,
        winsorize=config.winsorize,
        drop_missing=config.drop_missing,
    )
    y_tilde, t_tilde = cross_fit_residuals(
        design,
        folds=config.folds,
        alpha_grid=config.alpha_grid,
        l1_ratio=config.l1_ratio,
        seed=config.seed,
        max_iter=config.max_iter,
        tol=config.tol,
    )
    return estimate_ate(
        y_tilde,
        t_tilde,
        category=category,
        folds=config.folds,
        treatment_names=TREATMENT_NAMES,
        outcome_names=OUTCOME_NAMES,
    )


ATE_CSV_HEADER = "category,treatment_var,outcome,theta,stderr,p,ci_low,ci_high,stars"


def ate_to_csv_rows(est: AteEstimate) -> list[str]:
    rows = []
    for i, tname in enumerate(est.treatment_names):
        for j, oname in enumerate(est.outcome_names):
            rows.append(
                ",".join(
                    [
                        est.category,
                        tname,
                        oname,
                        repr(float(est.theta[i, j])),
                        repr(float(est.stderr[i, j])),
                        repr(float(est.p_value[i, j])),
                        repr(float(est.ci_low[i, j])),
                        repr(float(est.ci_high[i, j])),
                        est.stars(i, j),
                    ]
                )
            )
    return rows


def ate_table_to_csv(estimates: dict[str, AteEstimate]) -> str:
    lines = [ATE_CSV_HEADER]
    for category in sorted(estimates):
        lines.extend(ate_to_csv_rows(estimates[category]))
    return "\n".join(lines) + "\n"


def ate_table_from_csv(text: str) -> dict[str, list[dict]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != ATE_CSV_HEADER:
        raise ValueError(f"expected header '{ATE_CSV_HEADER}'")
    out: dict[str, list[dict]] = {}
    for ln in lines[1:]:
        parts = ln.split(",")
        category = parts[0]
        out.setdefault(category, []).append(
            {
                "treatment_var": parts[1],
                "outcome": parts[2],
                "theta": float(parts[3]),
                "stderr": float(parts[4]),
                "p": float(parts[5]),
                "ci_low": float(parts[6]),
                "ci_high": float(parts[7]),
                "stars": parts[8],
            }
        )
    return out
