"""Loss kernels for the generative training objective, with analytic gradients.

Every kernel is a pure function on numpy arrays. Gradients are exposed so
they can be checked against central finite differences; the `selftest`
routine runs that check across all kernels and is wired to the CLI.

The latent regularizer treats the second statistics vector as
log-variance, so exp of it is the variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LatentStats:
    """Per-sample latent mean and log-variance."""

    mu: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64))
        object.__setattr__(self, "log_var", np.asarray(self.log_var, dtype=np.float64))
        if not np.all(np.isfinite(self.mu)) or not np.all(np.isfinite(self.log_var)):
            raise ValueError("latent statistics must be finite")
        if self.mu.shape != self.log_var.shape:
            raise ValueError("mu and log_var must have equal shapes")


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights for the combined objective."""

    lambda1: float = 1.0
    lambda2: float = 0.1
    lambda3: float = 1.0
    lambda4: float = 1.0
    lambda5: float = 0.001
    lambda6: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class FeatureBatch:
    """n x q feature activations tagged with the network they came from."""

    features: np.ndarray
    role: str  # "discriminator" or "classifier"

    def __post_init__(self):
        object.__setattr__(
            self, "features", np.asarray(self.features, dtype=np.float64)
        )
        if self.features.ndim != 2:
            raise ValueError("features must be 2-D (n x q)")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if self.role not in ("discriminator", "classifier"):
            raise ValueError(f"unknown role '{self.role}'")


def kl_loss(stats: LatentStats) -> tuple[float, np.ndarray, np.ndarray]:
    """0.5*(mu'mu + sum(exp(lv) - lv - 1)) with gradients wrt mu and lv.

    Zero exactly at the standard normal (mu=0, lv=0), positive elsewhere.
    """
    mu, lv = stats.mu, stats.log_var
    ev = np.exp(lv)
    value = 0.5 * (float(mu @ mu) + float(np.sum(ev - lv - 1.0)))
    return value, mu.copy(), 0.5 * (ev - 1.0)


def recon_l1(x, xhat) -> tuple[float, np.ndarray]:
    """Sum of absolute errors and its subgradient wrt xhat (0 at ties)."""
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {xhat.shape}")
    diff = xhat - x
    return float(np.sum(np.abs(diff))), np.sign(diff)


def elbo_loss(x, xhat, stats: LatentStats, weights: LossWeights = LossWeights()) -> float:
    """lambda1 * reconstruction + lambda2 * latent regularizer."""
    recon, _ = recon_l1(x, xhat)
    kl, _, _ = kl_loss(stats)
    return weights.lambda1 * recon + weights.lambda2 * kl


def class_ce_loss(probs, labels) -> float:
    """Cross entropy -sum y*log(p) for one-hot labels over probability rows."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {y.shape}")
    if p.ndim != 2:
        raise ValueError("probs must be 2-D (n x C)")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("probability rows must sum to 1 within 1e-9")
    hit = y > 0
    if np.any(p[hit] == 0.0):
        raise ValueError("zero probability at a true label; clamp before calling")
    return float(-np.sum(y[hit] * np.log(p[hit])))


def class_ce_grad(probs, labels) -> np.ndarray:
    """Gradient of class_ce_loss wrt probs: -y/p at true labels, 0 elsewhere."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    grad = np.zeros_like(p)
    hit = y > 0
    grad[hit] = -y[hit] / p[hit]
    return grad


def adv_bce_loss(p, y) -> float:
    """Binary cross entropy -sum(y log p + (1-y) log(1-p)); p strictly in (0,1)."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {y.shape}")
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("probabilities must lie strictly in (0, 1)")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be 0 or 1")
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def adv_bce_grad(p, y) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return -(y / p) + (1.0 - y) / (1.0 - p)


def feature_match_batch(real: FeatureBatch, fake: FeatureBatch) -> float:
    """Squared distance between batch-mean feature vectors."""
    if real.features.shape[1] != fake.features.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: {real.features.shape[1]} vs {fake.features.shape[1]}"
        )
    diff = real.features.mean(axis=0) - fake.features.mean(axis=0)
    return float(diff @ diff)


def feature_match_batch_grad(real: FeatureBatch, fake: FeatureBatch) -> np.ndarray:
    """Gradient wrt the fake batch rows."""
    diff = real.features.mean(axis=0) - fake.features.mean(axis=0)
    n_fake = fake.features.shape[0]
    return np.tile(-2.0 * diff / n_fake, (n_fake, 1))


def feature_match_pair(fd_x, fd_xhat, fc_x, fc_xhat) -> float:
    """||fd_x - fd_xhat||^2 + ||fc_x - fc_xhat||^2 for per-sample features."""
    fd_x = np.asarray(fd_x, dtype=np.float64)
    fd_xhat = np.asarray(fd_xhat, dtype=np.float64)
    fc_x = np.asarray(fc_x, dtype=np.float64)
    fc_xhat = np.asarray(fc_xhat, dtype=np.float64)
    if fd_x.shape != fd_xhat.shape or fc_x.shape != fc_xhat.shape:
        raise ValueError("feature dimension mismatch")
    d1 = fd_x - fd_xhat
    d2 = fc_x - fc_xhat
    return float(d1 @ d1 + d2 @ d2)


def feature_match_pair_grad(fd_x, fd_xhat, fc_x, fc_xhat) -> tuple[np.ndarray, np.ndarray]:
    """Gradients wrt fd_xhat and fc_xhat."""
    fd_x = np.asarray(fd_x, dtype=np.float64)
    fd_xhat = np.asarray(fd_xhat, dtype=np.float64)
    fc_x = np.asarray(fc_x, dtype=np.float64)
    fc_xhat = np.asarray(fc_xhat, dtype=np.float64)
    return 2.0 * (fd_xhat - fd_x), 2.0 * (fc_xhat - fc_x)


def total_loss(components, weights: LossWeights = LossWeights()) -> float:
    """Weighted sum: elbo + l3*class + l4*adv + l5*feat_batch + l6*feat_pair.

    components = (elbo, class_ce, adv_bce, feature_batch, feature_pair).
    Uses exact summation so default weights on unit components give 4.001
    precisely.
    """
    elbo, c_cls, c_adv, c_fb, c_fp = (float(c) for c in components)
    return math.fsum(
        [
            elbo,
            weights.lambda3 * c_cls,
            weights.lambda4 * c_adv,
            weights.lambda5 * c_fb,
            weights.lambda6 * c_fp,
        ]
    )


# -- finite-difference gradient checking ------------------------------------


def _central_diff(f, x0: np.ndarray, h: float = 1e-5) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.empty_like(x0, dtype=np.float64)
    flat = x0.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(x0)
        flat[i] = orig - h
        down = f(x0)
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = float(np.max(np.abs(analytic - numeric)))
    den = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1.0)
    return num / den


def gradient_checks(seed: int = 0, trials: int = 100, h: float = 1e-5) -> dict[str, float]:
    """Worst relative error of each kernel's gradient vs central differences."""
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}

    def record(name, err):
        worst[name] = max(worst.get(name, 0.0), err)

    for _ in range(trials):
        d = int(rng.integers(2, 8))
        mu = rng.normal(size=d)
        lv = rng.normal(scale=0.5, size=d)
        _, g_mu, g_lv = kl_loss(LatentStats(mu, lv))
        record("kl_loss/mu", _rel_err(g_mu, _central_diff(lambda m: kl_loss(LatentStats(m, lv))[0], mu.copy(), h)))
        record("kl_loss/log_var", _rel_err(g_lv, _central_diff(lambda v: kl_loss(LatentStats(mu, v))[0], lv.copy(), h)))

        x = rng.normal(size=d)
        xhat = x + rng.choice([-1.0, 1.0], size=d) * rng.uniform(0.1, 1.0, size=d)
        _, g = recon_l1(x, xhat)
        record("recon_l1", _rel_err(g, _central_diff(lambda xv: recon_l1(x, xv)[0], xhat.copy(), h)))

        n, c = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        raw = rng.uniform(0.2, 1.0, size=(n, c))
        probs = raw / raw.sum(axis=1, keepdims=True)
        labels = np.zeros((n, c))
        labels[np.arange(n), rng.integers(0, c, size=n)] = 1.0
        g = class_ce_grad(probs, labels)

        def ce_unnormalized(pv):
            # evaluate the raw sum without the row-sum precondition so the
            # finite-difference probe stays well-defined
            hit = labels > 0
            return float(-np.sum(labels[hit] * np.log(pv[hit])))

        record("class_ce_loss", _rel_err(g, _central_diff(ce_unnormalized, probs.copy(), h)))

        pv = rng.uniform(0.05, 0.95, size=d)
        yv = rng.integers(0, 2, size=d).astype(float)
        g = adv_bce_grad(pv, yv)
        record("adv_bce_loss", _rel_err(g, _central_diff(lambda q: adv_bce_loss(q, yv), pv.copy(), h)))

        q = int(rng.integers(2, 6))
        real = FeatureBatch(rng.normal(size=(3, q)), "discriminator")
        fake_feat = rng.normal(size=(4, q))
        g = feature_match_batch_grad(real, FeatureBatch(fake_feat, "discriminator"))
        record(
            "feature_match_batch",
            _rel_err(
                g,
                _central_diff(
                    lambda f: feature_match_batch(real, FeatureBatch(f, "discriminator")),
                    fake_feat.copy(),
                    h,
                ),
            ),
        )

        fd_x, fc_x = rng.normal(size=q), rng.normal(size=q)
        fd_h, fc_h = rng.normal(size=q), rng.normal(size=q)
        g1, g2 = feature_match_pair_grad(fd_x, fd_h, fc_x, fc_h)
        record("feature_match_pair/fd", _rel_err(g1, _central_diff(lambda v: feature_match_pair(fd_x, v, fc_x, fc_h), fd_h.copy(), h)))
        record("feature_match_pair/fc", _rel_err(g2, _central_diff(lambda v: feature_match_pair(fd_x, fd_h, fc_x, v), fc_h.copy(), h)))
    return worst


def selftest(seed: int = 0, trials: int = 100, tol: float = 1e-5) -> tuple[bool, str]:
    """Run all gradient checks; returns (all_passed, printable table)."""
    worst = gradient_checks(seed=seed, trials=trials)
    lines = [f"{'kernel':<28} {'max rel err':>12}  status"]
    ok = True
    for name in sorted(worst):
        passed = worst[name] < tol
        ok = ok and passed
        lines.append(f"{name:<28} {worst[name]:>12.3e}  {'PASS' if passed else 'FAIL'}")
    return ok, "\n".join(lines)
