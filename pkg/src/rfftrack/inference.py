"""Contrastive (NCE-style) fitting of RFF weights with random-walk Metropolis-Hastings.

Data points are classified against uniform noise with
p(z=1 | x) = s(g(x)),  g(x) = log sigmoid(phi(x) . w) + c,
where s is the logistic function and the scalar c soaks up the log
normalizer and the noise density. (w, c) are sampled jointly under
w ~ N(0, prior_w_std^2 I), c ~ N(0, prior_c_std^2).
"""

from __future__ import annotations

import enum
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from rfftrack._seeds import derive_seed
from rfftrack.density import DEFAULT_MARGIN, DensityFit, default_bounds, log_sigmoid
from rfftrack.errors import InsufficientDataError, InvalidArgumentError, NumericError
from rfftrack.rff_basis import FeatureBasis, design_matrix
from rfftrack.series import VectorSetSeries

__all__ = [
    "Estimator",
    "MHConfig",
    "NoiseConfig",
    "contrastive_log_objective",
    "fit_series",
    "fit_weights",
    "load_fit_file",
    "log_posterior",
    "pooled_box",
    "random_walk_mh",
    "sample_negatives",
    "save_fit_file",
]

log = logging.getLogger(__name__)


class Estimator(str, enum.Enum):
    POSTERIOR_MEAN = "PosteriorMean"
    MAP = "MAP"


@dataclass(frozen=True)
class NoiseConfig:
    ratio: float = 4.0
    box: tuple | None = None  # ((min, max), ...); None -> derived from the data
    seed: int = 0

    def __post_init__(self):
        if not self.ratio > 0:
            raise InvalidArgumentError("noise ratio must be positive")
        if self.box is not None:
            box = tuple((float(lo), float(hi)) for lo, hi in self.box)
            if any(not hi > lo for lo, hi in box):
                raise InvalidArgumentError(f"degenerate noise box {box}")
            object.__setattr__(self, "box", box)


@dataclass(frozen=True)
class MHConfig:
    n_iterations: int = 20000
    burn_in: int = 10000
    thin: int = 10
    step_size: float = 0.2
    prior_w_std: float = 5.0
    prior_c_std: float = 10.0
    seed: int = 0
    estimator: Estimator = Estimator.POSTERIOR_MEAN

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        if not 0 <= self.burn_in < self.n_iterations:
            raise InvalidArgumentError("need 0 <= burn_in < n_iterations")
        if self.thin < 1:
            raise InvalidArgumentError("thin must be >= 1")
        if self.step_size < 0:
            raise InvalidArgumentError("step_size must be non-negative")
        if self.prior_w_std <= 0 or self.prior_c_std <= 0:
            raise InvalidArgumentError("prior standard deviations must be positive")


def pooled_box(point_sets, margin: float = DEFAULT_MARGIN) -> tuple:
    return default_bounds(np.vstack([np.asarray(p, dtype=np.float64) for p in point_sets]), margin)


def sample_negatives(points, cfg: NoiseConfig) -> np.ndarray:
    """round(ratio * N) points uniform over ``cfg.box`` (or the data box when unset)."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise InsufficientDataError("need at least two points to fit")
    box = cfg.box if cfg.box is not None else default_bounds(x)
    if len(box) != x.shape[1]:
        raise InvalidArgumentError("noise box dimension differs from the data")
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    m = int(round(cfg.ratio * len(x)))
    rng = np.random.default_rng(cfg.seed)
    return lo + (hi - lo) * rng.random((m, x.shape[1]))


def _as_feats(a, k):
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        a = a.reshape(0, k)
    if a.ndim != 2 or a.shape[1] != k:
        raise InvalidArgumentError(f"feature matrices must have {k} columns, got shape {a.shape}")
    return a


def _check_feats(w, pos_feats, neg_feats):
    w = np.asarray(w, dtype=np.float64)
    return w, _as_feats(pos_feats, w.shape[0]), _as_feats(neg_feats, w.shape[0])


def contrastive_log_objective(w, c: float, pos_feats, neg_feats) -> float:
    w, pos, neg = _check_feats(w, pos_feats, neg_feats)
    g_pos = log_sigmoid(pos @ w) + c
    g_neg = log_sigmoid(neg @ w) + c
    # log s(g) and log(1 - s(g)) = log s(-g)
    return float(log_sigmoid(g_pos).sum() + log_sigmoid(-g_neg).sum())


def log_posterior(w, c: float, pos_feats, neg_feats, mh: MHConfig) -> float:
    w = np.asarray(w, dtype=np.float64)
    prior = -0.5 * float(w @ w) / mh.prior_w_std**2 - 0.5 * float(c) ** 2 / mh.prior_c_std**2
    return contrastive_log_objective(w, c, pos_feats, neg_feats) + prior


def random_walk_mh(log_density, init, mh: MHConfig):
    """Isotropic Gaussian random-walk MH.

    Returns (estimate, acceptance_rate, trace) where trace holds the current
    log density at every thinned iteration.
    """
    theta = np.array(init, dtype=np.float64)
    cur = log_density(theta)
    if not np.isfinite(cur):
        raise NumericError("log posterior is not finite at the initial point")
    rng = np.random.default_rng(mh.seed)
    steps = mh.step_size * rng.standard_normal((mh.n_iterations, theta.size))
    log_u = np.log(rng.random(mh.n_iterations))

    best, best_lp = theta.copy(), cur
    total = np.zeros_like(theta)
    n_kept = 0
    accepted = 0
    trace = []
    for i in range(mh.n_iterations):
        prop = theta + steps[i]
        lp = log_density(prop)
        if np.isnan(lp):
            raise NumericError(f"log posterior is NaN at iteration {i}")
        if log_u[i] < lp - cur:
            theta, cur = prop, lp
            accepted += 1
            if cur > best_lp:
                best, best_lp = theta.copy(), cur
        if i % mh.thin == 0:
            trace.append(cur)
        if i >= mh.burn_in and (i - mh.burn_in) % mh.thin == 0:
            total += theta
            n_kept += 1
    if mh.estimator is Estimator.MAP:
        estimate = best
    else:
        estimate = total / n_kept
    return estimate, accepted / mh.n_iterations, trace


def fit_weights(points, basis: FeatureBasis, noise: NoiseConfig, mh: MHConfig, label: str = "") -> DensityFit:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise InsufficientDataError(f"step {label!r}: need at least two points, got {len(x)}")
    if x.shape[1] != basis.dim:
        raise InvalidArgumentError(f"step {label!r}: points have dim {x.shape[1]}, basis has {basis.dim}")
    if not np.all(np.isfinite(x)):
        raise NumericError(f"step {label!r}: non-finite coordinates")
    neg = sample_negatives(x, noise)
    feats = np.vstack([design_matrix(basis, x), design_matrix(basis, neg)])
    n_pos = len(x)
    k = basis.k
    inv_w = 0.5 / mh.prior_w_std**2
    inv_c = 0.5 / mh.prior_c_std**2

    # inlined log_posterior; this runs n_iterations times
    def logp(theta):
        w, c = theta[:k], theta[k]
        g = log_sigmoid(feats @ w) + c
        return (
            log_sigmoid(g[:n_pos]).sum()
            + log_sigmoid(-g[n_pos:]).sum()
            - inv_w * (w @ w)
            - inv_c * c * c
        )

    est, acc, trace = random_walk_mh(logp, np.zeros(k + 1), mh)
    return DensityFit(
        weights=est[:k],
        offset=float(est[k]),
        basis_ref=basis.basis_id,
        acceptance_rate=float(acc),
        n_iterations=mh.n_iterations,
        burn_in=mh.burn_in,
        objective_trace=tuple(float(t) for t in trace),
        label=label,
        seeds={"noise": int(noise.seed), "mh": int(mh.seed)},
    )


def fit_series(
    series: VectorSetSeries,
    basis: FeatureBasis,
    noise: NoiseConfig,
    mh: MHConfig,
    workers: int = 1,
) -> list[DensityFit]:
    """One fit per step on a shared basis and a shared noise box.

    Per-step seeds depend on the instance and time labels only, so results do
    not depend on step order or on ``workers``.
    """
    if len(series) == 0:
        raise InvalidArgumentError("empty series")
    if series.dim != basis.dim:
        raise InvalidArgumentError(f"series dim {series.dim} differs from basis dim {basis.dim}")
    box = noise.box if noise.box is not None else pooled_box([p for _, p in series.steps])

    def one(step):
        t, pts = step
        n_cfg = replace(noise, box=box, seed=derive_seed(noise.seed, "noise", series.instance_label, t))
        m_cfg = replace(mh, seed=derive_seed(mh.seed, "mh", series.instance_label, t))
        log.debug("fitting %s/%s (%d points)", series.instance_label, t, len(pts))
        return fit_weights(pts, basis, n_cfg, m_cfg, label=t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, series.steps))
    return [one(s) for s in series.steps]


def save_fit_file(path, instance: str, fits: list[DensityFit], basis_file: str = "", extra: dict | None = None) -> Path:
    """Write one series' fits as JSON (floats in shortest round-trip form)."""
    doc = {
        "instance": instance,
        "basis_file": basis_file,
        "basis_ref": fits[0].basis_ref if fits else "",
        "steps": [f.to_dict() for f in fits],
    }
    if extra:
        doc.update(extra)
    path = Path(path)
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def load_fit_file(path) -> tuple[str, list[DensityFit], dict]:
    doc = json.loads(Path(path).read_text())
    fits = [DensityFit.from_dict(s) for s in doc["steps"]]
    return doc["instance"], fits, doc
