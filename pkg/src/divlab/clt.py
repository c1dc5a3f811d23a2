"""Monte Carlo harness for weak-convergence behaviour of weighted statistics.

Conditionally on a fixed point set, a weighted linear statistic
``U = (1/n) sum_i W_i f(x_i)`` has exact mean ``mu1 = (1/n) sum f(x_i)``
and exact variance ``mu2 / n`` with ``mu2 = (1/n) sum f(x_i)**2``, because
the weights have unit mean and unit variance.  The harness checks those
moments, gates the standardized statistic against normality, and compares
the spread of the weighted estimator (weights random, points fixed) with
the plain-sampling estimator (points random, weights one).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .divergences import CressieRead, DivergenceSpec
from .errors import DomainError, NumericError, ValidationError
from .estimation import minimum_dual_estimator_batch
from .models import ExponentialFamilyModel, ParametricModel
from .seeding import derived_rng
from .weights import WeightLaw

#: replication block size; fixed so results never depend on scheduling
MC_CHUNK = 2048

#: golden-section schedule for the batched estimator; enough for the
#: variance gates without paying for unused precision
BATCH_SCHEDULE = {"inner_iters": 32, "outer_iters": 32, "n_scan": 5}

STATISTIC_MAP = {
    "identity": lambda x: np.asarray(x, dtype=float),
    "square": lambda x: np.asarray(x, dtype=float) ** 2,
    "cosine": lambda x: np.cos(np.asarray(x, dtype=float)),
}


@dataclass(frozen=True)
class MCConfig:
    """Declarative description of one Monte Carlo experiment."""

    model: str
    model_params: tuple
    law: str
    theta_T: tuple
    n: int
    reps: int
    seed: int
    statistic: str = "identity"

    def __post_init__(self):
        if self.reps < 100:
            raise ValidationError("Monte Carlo configs need at least 100 replications")
        if self.n < 10:
            raise ValidationError("Monte Carlo configs need at least 10 points")
        if self.statistic not in STATISTIC_MAP:
            raise ValidationError(
                f"unknown statistic {self.statistic!r}; expected one of {sorted(STATISTIC_MAP)}"
            )


@dataclass(frozen=True)
class MCReport:
    """Moments, gates, and per-replication values of one experiment."""

    kind: str
    n: int
    reps: int
    seed: int
    moments: dict
    targets: dict
    checks: dict
    runtime_seconds: float
    values: tuple = ()
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "reps": self.reps,
            "seed": self.seed,
            "moments": self.moments,
            "targets": self.targets,
            "checks": self.checks,
            "passed": self.passed,
            "runtime_seconds": self.runtime_seconds,
            "details": self.details,
        }


def _weighted_sums(points: np.ndarray, law: WeightLaw, reps: int, seed: int, tag: str, f) -> np.ndarray:
    """Per-replication values of ``(1/n) sum_i W_i f(x_i)``."""
    fv = np.asarray(f(points), dtype=float)
    n = fv.shape[0]
    out = np.empty(reps)
    done = 0
    chunk_index = 0
    while done < reps:
        size = min(MC_CHUNK, reps - done)
        rng = derived_rng(seed, tag, chunk_index)
        w = law.sample(size * n, rng).reshape(size, n)
        out[done : done + size] = np.mean(w * fv, axis=1)
        done += size
        chunk_index += 1
    return out


def _fixed_point_moments(points: np.ndarray, f) -> tuple[float, float]:
    fv = np.asarray(f(points), dtype=float)
    if not np.all(np.isfinite(fv)):
        raise ValidationError("the statistic must be finite on every point")
    mu1 = float(np.mean(fv))
    mu2 = float(np.mean(fv * fv))
    return mu1, mu2


def weighted_lln_check(points, law: WeightLaw, f, reps: int, seed: int) -> MCReport:
    """Exact-moment check of the weighted mean on fixed points.

    The Monte Carlo mean of the weighted statistic must match the plain
    average of the statistic, and its variance the second moment over
    ``n``, both within four standard errors.
    """
    t0 = time.perf_counter()
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    reps = int(reps)
    mu1, mu2 = _fixed_point_moments(points, f)
    u = _weighted_sums(points, law, reps, seed, "lln", f)

    mean = float(np.mean(u))
    var = float(np.var(u, ddof=1))
    centered = u - mean
    m4 = float(np.mean(centered**4))
    se_mean = math.sqrt(max(var, 1e-300) / reps)
    se_var = math.sqrt(max(m4 - var * var, 0.0) / reps) + 1e-300
    target_var = mu2 / n
    checks = {
        "mean_within_4se": abs(mean - mu1) <= 4.0 * se_mean,
        "variance_within_4se": abs(var - target_var) <= 4.0 * se_var,
    }
    return MCReport(
        kind="lln",
        n=n,
        reps=reps,
        seed=int(seed),
        moments={"mean": mean, "variance": var},
        targets={"mean": mu1, "variance": target_var},
        checks=checks,
        runtime_seconds=time.perf_counter() - t0,
        values=tuple(u.tolist()),
        details={"se_mean": se_mean, "se_variance": se_var, "law": law.token},
    )


def weighted_clt_check(
    points,
    law: WeightLaw,
    f,
    reps: int,
    seed: int,
    skew_tol: float = 0.15,
    kurtosis_tol: float = 0.3,
    quantile_tol: float = 0.02,
) -> MCReport:
    """Normality gates for the standardized weighted mean.

    The statistic is standardized with the centered second moment of the
    point values; a spread of point values is therefore required.
    """
    t0 = time.perf_counter()
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    reps = int(reps)
    mu1, mu2 = _fixed_point_moments(points, f)
    spread = mu2 - mu1 * mu1
    if spread <= 1e-12 * max(1.0, abs(mu2)):
        raise DomainError("the statistic is constant on the points; nothing to standardize")
    u = _weighted_sums(points, law, reps, seed, "clt", f)
    t_vals = math.sqrt(n) * (u - mu1) / math.sqrt(spread)

    skew = float(stats.skew(t_vals))
    kurt = float(stats.kurtosis(t_vals))
    lower_frac = float(np.mean(t_vals <= -1.645))
    upper_frac = float(np.mean(t_vals <= 1.645))
    checks = {
        "skewness": abs(skew) <= skew_tol,
        "excess_kurtosis": abs(kurt) <= kurtosis_tol,
        "lower_tail": abs(lower_frac - 0.05) <= quantile_tol,
        "upper_tail": abs(upper_frac - 0.95) <= quantile_tol,
    }
    return MCReport(
        kind="clt",
        n=n,
        reps=reps,
        seed=int(seed),
        moments={
            "mean": float(np.mean(t_vals)),
            "variance": float(np.var(t_vals, ddof=1)),
            "skewness": skew,
            "excess_kurtosis": kurt,
            "lower_tail_frequency": lower_frac,
            "upper_tail_frequency": upper_frac,
        },
        targets={
            "skewness": 0.0,
            "excess_kurtosis": 0.0,
            "lower_tail_frequency": 0.05,
            "upper_tail_frequency": 0.95,
        },
        checks=checks,
        runtime_seconds=time.perf_counter() - t0,
        values=tuple(t_vals.tolist()),
        details={"law": law.token, "mu1": mu1, "mu2": mu2},
    )


def _batch_estimates(
    model: ExponentialFamilyModel,
    spec: CressieRead,
    points: np.ndarray,
    weights: np.ndarray,
    box: tuple[float, float],
) -> np.ndarray:
    return minimum_dual_estimator_batch(model, spec, points, weights, box, **BATCH_SCHEDULE)


def estimator_distribution_compare(
    model: ExponentialFamilyModel,
    law: WeightLaw,
    spec: DivergenceSpec,
    thetaT: float,
    n: int,
    reps: int,
    seed: int,
) -> MCReport:
    """Spread of the weighted estimator against the plain-sampling one.

    The weighted branch fixes one point draw and randomizes weights; its
    estimates are centered at the conditional center, the score solution
    of the fixed points.  The plain branch redraws points with unit
    weights.  Both normalized variances must agree within the stated
    band and sit near the inverse information.
    """
    t0 = time.perf_counter()
    if not isinstance(spec, CressieRead):
        raise ValidationError("the batched comparison needs a power-family generator")
    n = int(n)
    reps = int(reps)

    points = model.sample(thetaT, n, derived_rng(seed, "points"))
    pilot = model.pilot_estimate(points)
    lo, hi = model.default_box(pilot)
    box = (float(np.atleast_1d(lo)[0]), float(np.atleast_1d(hi)[0]))

    w = np.empty((reps, n))
    done = 0
    chunk_index = 0
    while done < reps:
        size = min(MC_CHUNK, reps - done)
        rng = derived_rng(seed, "weights", chunk_index)
        w[done : done + size] = law.sample(size * n, rng).reshape(size, n)
        done += size
        chunk_index += 1
    theta_w = _batch_estimates(model, spec, points[None, :], w, box)

    data = np.empty((reps, n))
    done = 0
    chunk_index = 0
    while done < reps:
        size = min(MC_CHUNK, reps - done)
        rng = derived_rng(seed, "plain", chunk_index)
        data[done : done + size] = model.sample(thetaT, size * n, rng).reshape(size, n)
        done += size
        chunk_index += 1
    theta_p = _batch_estimates(model, spec, data, np.ones((1, n)), box)

    edge = 1e-6 * (box[1] - box[0])
    fail_w = int(np.sum(~np.isfinite(theta_w) | (theta_w < box[0] + edge) | (theta_w > box[1] - edge)))
    fail_p = int(np.sum(~np.isfinite(theta_p) | (theta_p < box[0] + edge) | (theta_p > box[1] - edge)))
    for name, count in (("weighted", fail_w), ("plain", fail_p)):
        if count > 0.05 * reps:
            raise NumericError(
                f"{name} estimator failed on {count} of {reps} replications"
            )

    scaled_w = math.sqrt(n) * (theta_w - pilot)
    scaled_p = math.sqrt(n) * (theta_p - float(thetaT))
    var_w = float(np.var(scaled_w, ddof=1))
    var_p = float(np.var(scaled_p, ddof=1))
    ratio = var_w / var_p
    inv_info = 1.0 / float(model.fisher_information(thetaT)[0, 0])
    checks = {
        "variance_ratio_in_band": 0.8 <= ratio <= 1.25,
        "weighted_near_inverse_information": abs(var_w - inv_info) <= 0.35 * inv_info,
        "plain_near_inverse_information": abs(var_p - inv_info) <= 0.35 * inv_info,
    }
    return MCReport(
        kind="estimator_compare",
        n=n,
        reps=reps,
        seed=int(seed),
        moments={"variance_weighted": var_w, "variance_plain": var_p, "ratio": ratio},
        targets={"ratio": 1.0, "inverse_information": inv_info},
        checks=checks,
        runtime_seconds=time.perf_counter() - t0,
        values=tuple(scaled_w.tolist()),
        details={
            "law": law.token,
            "conditional_center": float(pilot),
            "failures_weighted": fail_w,
            "failures_plain": fail_p,
            "plain_values": tuple(scaled_p.tolist()),
        },
    )
