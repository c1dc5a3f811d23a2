"""Dual (variational) divergence estimation from weighted samples.

For a generator ``phi`` and model densities ``p_theta``, the divergence of
``P_theta`` from the sampling distribution admits the dual representation

    D_phi(P_theta, P) = sup_alpha  int h(theta, alpha, x) dP(x)

with the integrand built from the first derivative and the sharp transform
of the generator:

    h(theta, alpha, x) = int phi'(p_theta/p_alpha) dP_theta
                         - phi#((p_theta/p_alpha)(x)).

Substituting a weighted empirical measure ``(1/n) sum W_i delta_{x_i}``
for ``P`` gives a plug-in estimator of the divergence; minimizing it over
``theta`` gives the minimum dual divergence estimator.  For the weighted
maximum likelihood pipeline the generator passed in must be the conjugate
of the generator induced by the weight law, so that the estimated quantity
is the divergence of the sampling distribution from ``P_theta``.

Signed weights are allowed; evaluations that escape the generator's domain
contribute through the extended-real convention and the optimizers treat
non-finite objective values as rejected points (counted in the report).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._optim import maximize_scalar, nelder_mead_multistart, batch_golden_max
from .divergences import INF, CressieRead, DivergenceSpec, FiniteMeasure, GAMMA_LIMIT_TOL
from .errors import ValidationError
from .models import Categorical, ExponentialFamilyModel, ParametricModel
from .weights import WeightLaw, sample_weights


@dataclass(frozen=True)
class WeightedEmpiricalMeasure:
    """``(1/n) sum_i W_i delta_{x_i}``; not necessarily a probability measure.

    The integral of ``f`` is exactly ``(1/n) sum_i W_i f(x_i)``.  Unit
    weights recover the ordinary empirical measure; exact finite measures
    embed via :meth:`from_finite_measure`.
    """

    points: tuple
    weights: tuple

    def __post_init__(self):
        points = tuple(float(p) for p in self.points)
        weights = tuple(float(w) for w in self.weights)
        if len(points) != len(weights):
            raise ValidationError("points and weights must have equal length")
        if len(points) < 1:
            raise ValidationError("a weighted empirical measure needs at least one point")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def plain(cls, points) -> "WeightedEmpiricalMeasure":
        points = tuple(float(p) for p in points)
        return cls(points, (1.0,) * len(points))

    @classmethod
    def from_finite_measure(cls, fm: FiniteMeasure) -> "WeightedEmpiricalMeasure":
        # weights n * mass_i make the plug-in integral reproduce the measure
        n = len(fm.support)
        return cls(tuple(float(s) for s in fm.support), tuple(n * m for m in fm.masses))

    @property
    def n(self) -> int:
        return len(self.points)

    def points_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    def weights_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def total_mass(self) -> float:
        return math.fsum(self.weights) / self.n

    def integrate(self, f: Callable) -> float:
        x = self.points_array()
        w = self.weights_array()
        return float(np.mean(w * np.asarray(f(x), dtype=float)))


def build_weighted_empirical(points, law: WeightLaw, seed) -> WeightedEmpiricalMeasure:
    """Attach freshly sampled weights from ``law`` to fixed points."""
    points = tuple(float(p) for p in points)
    w = sample_weights(law, len(points), seed)
    return WeightedEmpiricalMeasure(points, tuple(w))


@dataclass
class SolverOptions:
    """Knobs for the nested search.  Defaults match the package contracts."""

    u_box: tuple | None = None
    multistart: int = 5
    inner_xtol: float = 1e-9
    outer_xtol: float = 1e-8
    value_tol: float = 1e-10
    max_outer_iter: int = 500
    inner_grad_tol: float = 1e-6


@dataclass(frozen=True)
class EstimateReport:
    """Result of a minimum dual divergence estimation."""

    theta_hat: float | tuple
    alpha_hat: float | tuple
    value: float
    converged: bool
    iterations: int
    inner_grad_norm: float
    rejected_evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat,
            "alpha_hat": self.alpha_hat,
            "value": self.value,
            "converged": self.converged,
            "iterations": self.iterations,
            "inner_grad_norm": self.inner_grad_norm,
            "rejected_evaluations": self.rejected_evaluations,
        }


def divergence_between(model: ParametricModel, spec: DivergenceSpec, theta, theta_prime, tol: float = 1e-10) -> float:
    """Population divergence ``int phi(p_theta / p_theta') dP_theta'``.

    Closed forms cover finite supports and power generators on
    exponential families; anything else integrates numerically under
    ``theta_prime``.
    """
    if isinstance(model, Categorical):
        atoms = model.atoms
        return _finite_divergence(spec, model.probs(theta), model.probs(theta_prime), atoms)
    if isinstance(spec, CressieRead) and isinstance(model, ExponentialFamilyModel):
        g = spec.gamma
        if abs(g - 1.0) < GAMMA_LIMIT_TOL:
            return model.mean_log_ratio(theta, theta_prime)
        if abs(g) < GAMMA_LIMIT_TOL:
            return model.mean_log_ratio(theta_prime, theta)
        ratio_int = model.ratio_power_integral(theta_prime, theta, -g)
        if math.isinf(ratio_int):
            return INF
        return (ratio_int - 1.0) / (g * (g - 1.0))

    def integrand(x):
        return _guarded_ratio_eval(model, spec, theta, theta_prime, x, 0)

    try:
        return model.integrate_under(theta_prime, integrand, tol)
    except _InfiniteIntegrand:
        return INF


def _finite_divergence(spec: DivergenceSpec, q: np.ndarray, p: np.ndarray, labels) -> float:
    from .divergences import divergence_finite

    return divergence_finite(
        spec,
        FiniteMeasure(tuple(labels), tuple(float(v) for v in q)),
        FiniteMeasure(tuple(labels), tuple(float(v) for v in p)),
    )


class _InfiniteIntegrand(Exception):
    """Raised inside quadrature when the generator is infinite on a
    probed region, signalling an infinite integral."""


def _guarded_ratio_eval(model, spec, theta, alpha, x, order: int) -> float:
    lr = float(model.log_density_ratio(theta, alpha, x))
    # Ratios beyond e^150 sit where the reference density has already
    # underflowed to zero, so a finite clamp keeps the quadrature product
    # at zero; generators with a bounded domain still evaluate to +inf at
    # the clamp and flag the genuinely infinite integral.
    r = math.exp(min(lr, 150.0))
    v = spec.value(r, order)
    if math.isinf(v):
        raise _InfiniteIntegrand
    return v


def _phi_prime_mean(model: ParametricModel, spec: DivergenceSpec, theta, alpha, tol: float) -> float:
    """``int phi'(p_theta/p_alpha) dP_theta`` with closed forms where possible."""
    if isinstance(model, Categorical):
        p_t = model.probs(theta)
        p_a = model.probs(alpha)
        vals = spec.value_array(p_t / p_a, 1)
        if not np.all(np.isfinite(vals)):
            return INF
        return float(np.sum(vals * p_t))
    if isinstance(spec, CressieRead) and isinstance(model, ExponentialFamilyModel):
        g = spec.gamma
        if abs(g - 1.0) < GAMMA_LIMIT_TOL:
            return model.mean_log_ratio(theta, alpha)
        if abs(g) < GAMMA_LIMIT_TOL:
            ratio_int = model.ratio_power_integral(theta, alpha, -1.0)
            return 1.0 - ratio_int
        ratio_int = model.ratio_power_integral(theta, alpha, g - 1.0)
        if math.isinf(ratio_int):
            return INF
        return (ratio_int - 1.0) / (g - 1.0)

    def integrand(x):
        return _guarded_ratio_eval(model, spec, theta, alpha, x, 1)

    try:
        return model.integrate_under(theta, integrand, tol)
    except _InfiniteIntegrand:
        return INF


def h_value(model: ParametricModel, spec: DivergenceSpec, theta, alpha, x, tol: float = 1e-10) -> float:
    """Dual integrand ``h(theta, alpha, x)``.

    The constant-in-``x`` part is the mean of ``phi'`` of the density ratio
    under ``P_theta``; the ``x`` part subtracts the sharp transform of the
    ratio at ``x``.
    """
    lead = _phi_prime_mean(model, spec, theta, alpha, tol)
    if math.isinf(lead):
        return INF
    r = math.exp(float(model.log_density_ratio(theta, alpha, x)))
    tail = spec.sharp(r)
    if math.isinf(tail):
        return -tail
    return lead - tail


class _DualCriterion:
    """Precomputed objective ``(theta, alpha) -> int h d(mu)`` for one measure.

    The integral splits as ``mu(S) * mean-phi'(theta, alpha) - (1/n) sum
    W_i phi#(ratio_i)``; the second term is vectorized over the sample.
    Non-finite evaluations are rejected (returned as ``-inf`` to the
    maximizer) and counted.
    """

    def __init__(self, model: ParametricModel, spec: DivergenceSpec, mu: WeightedEmpiricalMeasure, tol: float = 1e-10):
        self.model = model
        self.spec = spec
        self.mu = mu
        self.tol = tol
        self.rejected = 0
        self.w = mu.weights_array()
        self.wbar = float(np.mean(self.w))
        if isinstance(model, Categorical):
            idx = model.atom_index(mu.points_array())
            masses = np.zeros(model.k)
            np.add.at(masses, idx, self.w)
            self.atom_masses = masses / mu.n
            self._kind = "categorical"
        elif isinstance(model, ExponentialFamilyModel):
            self.t_stat = model.sufficient_stat(mu.points_array())
            self._kind = "expfam"
        else:  # pragma: no cover - no other shipped model kinds
            raise ValidationError(f"unsupported model {model!r}")

    def __call__(self, theta, alpha) -> float:
        lead = _phi_prime_mean(self.model, self.spec, theta, alpha, self.tol)
        if not math.isfinite(lead):
            self.rejected += 1
            return -INF
        if self._kind == "categorical":
            ratios = self.model.probs(theta) / self.model.probs(alpha)
            sharp = self.spec.sharp_array(ratios)
            tail = float(np.dot(self.atom_masses, sharp))
        else:
            lr = (
                (theta - alpha) * self.t_stat
                - self.model.log_normalizer(theta)
                + self.model.log_normalizer(alpha)
            )
            sharp = self._sharp_from_log_ratio(lr)
            tail = float(np.mean(self.w * sharp))
        value = self.wbar * lead - tail
        if not math.isfinite(value):
            self.rejected += 1
            return -INF
        return value

    def _sharp_from_log_ratio(self, lr: np.ndarray) -> np.ndarray:
        spec = self.spec
        if isinstance(spec, CressieRead):
            g = spec.gamma
            with np.errstate(over="ignore"):
                if abs(g) < GAMMA_LIMIT_TOL:
                    return lr
                if abs(g - 1.0) < GAMMA_LIMIT_TOL:
                    return np.expm1(lr)
                if g == 2.0:
                    return 0.5 * np.expm1(2.0 * lr)
                return np.expm1(g * lr) / g
        return spec.sharp_array(np.exp(lr))


def _resolve_box(model: ParametricModel, mu: WeightedEmpiricalMeasure, opts: SolverOptions):
    if opts.u_box is not None:
        lo, hi = opts.u_box
        return np.atleast_1d(np.asarray(lo, dtype=float)), np.atleast_1d(np.asarray(hi, dtype=float))
    pilot = model.pilot_estimate(mu.points_array(), mu.weights_array())
    lo, hi = model.default_box(pilot)
    return np.atleast_1d(np.asarray(lo, dtype=float)), np.atleast_1d(np.asarray(hi, dtype=float))


def _inner_max(crit: _DualCriterion, theta, lo, hi, opts: SolverOptions):
    if lo.shape[0] == 1:
        x, v = maximize_scalar(
            lambda a: crit(theta, a),
            float(lo[0]),
            float(hi[0]),
            n_scan=2 * opts.multistart + 1,
            xtol=opts.inner_xtol,
        )
        return x, v
    x, negv = nelder_mead_multistart(
        lambda a: -crit(theta, a),
        lo,
        hi,
        restarts=opts.multistart,
        xatol=opts.inner_xtol,
        fatol=opts.value_tol,
        max_iter=opts.max_outer_iter,
    )
    return x, -negv


def estimate_phi_dual(
    model: ParametricModel,
    spec: DivergenceSpec,
    theta,
    mu: WeightedEmpiricalMeasure,
    opts: SolverOptions | None = None,
):
    """Plug-in dual divergence estimate at fixed ``theta``.

    Returns ``(sup_alpha int h(theta, alpha, .) dmu, argmax alpha)``.
    """
    opts = opts or SolverOptions()
    crit = _DualCriterion(model, spec, mu)
    lo, hi = _resolve_box(model, mu, opts)
    alpha, value = _inner_max(crit, _scalar_or_vec(theta, lo), lo, hi, opts)
    return value, _scalar_or_vec(alpha, lo)


def _scalar_or_vec(x, lo):
    if lo.shape[0] == 1 and np.ndim(x) == 0:
        return float(x)
    if lo.shape[0] == 1 and np.ndim(x) > 0:
        return float(np.atleast_1d(x)[0])
    return np.atleast_1d(np.asarray(x, dtype=float))


def _inner_grad_norm(crit: _DualCriterion, theta, alpha) -> float:
    """Central-difference gradient norm of the inner objective at alpha."""
    alpha_vec = np.atleast_1d(np.asarray(alpha, dtype=float))
    grads = []
    for a in range(alpha_vec.shape[0]):
        h = 1e-6 * max(1.0, abs(alpha_vec[a]))
        up = alpha_vec.copy()
        dn = alpha_vec.copy()
        up[a] += h
        dn[a] -= h
        f_up = crit(theta, up if alpha_vec.shape[0] > 1 else float(up[0]))
        f_dn = crit(theta, dn if alpha_vec.shape[0] > 1 else float(dn[0]))
        if not (math.isfinite(f_up) and math.isfinite(f_dn)):
            return INF
        grads.append((f_up - f_dn) / (2.0 * h))
    return float(np.linalg.norm(grads))


def minimum_dual_estimator(
    model: ParametricModel,
    spec: DivergenceSpec,
    mu: WeightedEmpiricalMeasure,
    opts: SolverOptions | None = None,
) -> EstimateReport:
    """Minimize the dual divergence estimate over the parameter box.

    Non-convergence is reported through the ``converged`` flag, never
    raised: the flag requires first-order stationarity of the inner
    problem at the reported maximizer.
    """
    opts = opts or SolverOptions()
    crit = _DualCriterion(model, spec, mu)
    lo, hi = _resolve_box(model, mu, opts)
    evals = 0

    def outer(theta):
        nonlocal evals
        evals += 1
        theta_arg = theta if lo.shape[0] > 1 else float(np.atleast_1d(theta)[0])
        _, v = _inner_max(crit, theta_arg, lo, hi, opts)
        return v

    if lo.shape[0] == 1:
        theta_hat, value = maximize_scalar(
            lambda th: -outer(th),
            float(lo[0]),
            float(hi[0]),
            n_scan=2 * opts.multistart + 1,
            xtol=opts.outer_xtol,
        )
        value = -value
    else:
        theta_hat, value = nelder_mead_multistart(
            outer,
            lo,
            hi,
            restarts=opts.multistart,
            xatol=opts.outer_xtol,
            fatol=opts.value_tol,
            max_iter=opts.max_outer_iter,
        )
    theta_out = _scalar_or_vec(theta_hat, lo)
    alpha_hat, value = _inner_max(crit, theta_out, lo, hi, opts)
    alpha_out = _scalar_or_vec(alpha_hat, lo)
    grad_norm = _inner_grad_norm(crit, theta_out, alpha_out)
    converged = math.isfinite(value) and grad_norm <= opts.inner_grad_tol
    if isinstance(theta_out, np.ndarray):
        theta_rep: float | tuple = tuple(theta_out.tolist())
        alpha_rep: float | tuple = tuple(np.atleast_1d(alpha_out).tolist())
    else:
        theta_rep = theta_out
        alpha_rep = float(np.atleast_1d(alpha_out)[0])
    return EstimateReport(
        theta_hat=theta_rep,
        alpha_hat=alpha_rep,
        value=float(value),
        converged=bool(converged),
        iterations=evals,
        inner_grad_norm=float(grad_norm),
        rejected_evaluations=crit.rejected,
    )


# ---------------------------------------------------------------------------
# Batched variant for Monte Carlo studies.
# ---------------------------------------------------------------------------


class _BatchCriterion:
    """Vectorized dual criterion for many weight/data rows at once.

    Restricted to scalar-parameter exponential families with power-family
    generators, which covers the Monte Carlo studies; each call evaluates
    the criterion at one ``(theta_r, alpha_r)`` pair per row.
    """

    def __init__(self, model: ExponentialFamilyModel, spec: CressieRead,
                 points: np.ndarray, weights: np.ndarray):
        if not isinstance(model, ExponentialFamilyModel):
            raise ValidationError("batched estimation requires an exponential family model")
        if not isinstance(spec, CressieRead):
            raise ValidationError("batched estimation requires a power-family generator")
        self.model = model
        self.g = spec.gamma
        self.t = np.atleast_2d(model.sufficient_stat(points))
        self.w = np.atleast_2d(weights)
        self.wbar = np.mean(self.w, axis=1)

    def value(self, theta: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        g = self.g
        m = self.model
        C_t = m.log_normalizer_array(theta)
        C_a = m.log_normalizer_array(alpha)
        delta = theta - alpha
        with np.errstate(over="ignore", invalid="ignore"):
            if abs(g - 1.0) < GAMMA_LIMIT_TOL:
                lead = delta * m.grad_log_normalizer_array(theta) - C_t + C_a
            elif abs(g) < GAMMA_LIMIT_TOL:
                lead = np.zeros_like(delta)
            else:
                u = g - 1.0
                tilted = theta + u * delta
                expo = u * (C_a - C_t) + m.log_normalizer_array(tilted) - C_t
                lead = np.expm1(expo) / u
            lr = delta[:, None] * self.t - C_t[:, None] + C_a[:, None]
            if abs(g) < GAMMA_LIMIT_TOL:
                sharp = lr
            elif abs(g - 1.0) < GAMMA_LIMIT_TOL:
                sharp = np.expm1(lr)
            else:
                sharp = np.expm1(g * lr) / g
            tail = np.mean(self.w * sharp, axis=1)
            out = self.wbar * lead - tail
        return np.where(np.isfinite(out), out, -INF)


def minimum_dual_estimator_batch(
    model: ExponentialFamilyModel,
    spec: CressieRead,
    points: np.ndarray,
    weights: np.ndarray,
    box: tuple[float, float],
    inner_iters: int = 48,
    outer_iters: int = 48,
    n_scan: int = 7,
) -> np.ndarray:
    """Row-wise minimum dual estimates for a matrix of replications.

    ``points`` and ``weights`` broadcast against each other; one estimate
    is produced per row.  The search runs a fixed golden-section schedule
    so results do not depend on chunking.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    rows = max(points.shape[0], weights.shape[0])
    crit = _BatchCriterion(model, spec,
                           np.broadcast_to(points, (rows, points.shape[1])),
                           np.broadcast_to(weights, (rows, weights.shape[1])))
    lo = np.full(rows, float(box[0]))
    hi = np.full(rows, float(box[1]))

    def inner_value(theta_vec: np.ndarray) -> np.ndarray:
        _, val = batch_golden_max(
            lambda a: crit.value(theta_vec, a), lo, hi, n_scan=n_scan, iters=inner_iters
        )
        return val

    theta_hat, _ = batch_golden_max(
        lambda th: -inner_value(th), lo, hi, n_scan=n_scan, iters=outer_iters
    )
    return theta_hat
