"""Unit tests for weighted empirical measures and minimum dual estimation."""

import math

import numpy as np
import pytest
from scipy import integrate

from divlab.divergences import INF, CressieRead, FiniteMeasure, divergence_finite
from divlab.errors import ValidationError
from divlab.estimation import (
    WeightedEmpiricalMeasure,
    build_weighted_empirical,
    divergence_between,
    estimate_phi_dual,
    h_value,
    minimum_dual_estimator,
    minimum_dual_estimator_batch,
)
from divlab.models import Categorical, ExponentialScale, GaussianLocation, PoissonNatural
from divlab.weights import NormalOneOne, PoissonOne, ShiftedBernoulli, induced_divergence


@pytest.fixture
def rng():
    """Seeded generator for data draws."""
    return np.random.default_rng(424)


@pytest.fixture
def gauss_sample(rng):
    """Gaussian location sample of moderate size."""
    model = GaussianLocation()
    return model, model.sample(0.4, 80, rng)


# =============================================================================
# Tests: weighted empirical measures
# =============================================================================


class TestWeightedEmpirical:
    """The (1/n) sum W_i f(x_i) functional."""

    def test_plain_constructor_unit_weights(self):
        """plain() attaches unit weight to every point."""
        mu = WeightedEmpiricalMeasure.plain((1.0, 2.0, 3.0))
        assert mu.weights == (1.0, 1.0, 1.0)
        assert mu.integrate(lambda x: np.asarray(x)) == pytest.approx(2.0)

    def test_integrate_is_weighted_average(self):
        """integrate applies weights then divides by the point count."""
        mu = WeightedEmpiricalMeasure((1.0, 3.0), (2.0, 0.0))
        assert mu.integrate(lambda x: np.asarray(x)) == pytest.approx(1.0)

    def test_from_finite_measure_scales_masses(self):
        """Cell masses scale by the atom count so integrals match the measure."""
        fin = FiniteMeasure((0.0, 1.0), (0.25, 0.75))
        mu = WeightedEmpiricalMeasure.from_finite_measure(fin)
        assert mu.points == (0.0, 1.0)
        assert mu.weights == (0.5, 1.5)
        assert mu.integrate(lambda x: np.asarray(x)) == pytest.approx(0.75)

    def test_length_mismatch_rejected(self):
        """Points and weights must align."""
        with pytest.raises(ValidationError):
            WeightedEmpiricalMeasure((1.0,), (1.0, 2.0))

    def test_build_with_law_is_seed_deterministic(self):
        """Building with a sampled weight law reproduces under equal seeds."""
        pts = (0.1, 0.9, 1.4)
        a = build_weighted_empirical(pts, PoissonOne(), np.random.SeedSequence(9))
        b = build_weighted_empirical(pts, PoissonOne(), np.random.SeedSequence(9))
        assert a.weights == b.weights


# =============================================================================
# Tests: divergence between model members
# =============================================================================


class TestDivergenceBetween:
    """Population divergences along parametric families."""

    def test_gaussian_kullback_closed_form(self):
        """Index 1 between Gaussian locations is half the squared gap."""
        model = GaussianLocation()
        out = divergence_between(model, CressieRead(1.0), 0.7, 0.2)
        assert out == pytest.approx(0.5 * 0.25, abs=1e-12)

    def test_gaussian_half_chi_square_closed_form(self):
        """Index 2 between Gaussian locations is (exp(gap^2) - 1)/2."""
        model = GaussianLocation()
        out = divergence_between(model, CressieRead(2.0), 0.7, 0.2)
        assert out == pytest.approx(0.5 * (math.exp(0.25) - 1.0), rel=1e-10)

    def test_likelihood_index_swaps_arguments(self):
        """Index 0 equals the index 1 divergence with swapped parameters."""
        model = ExponentialScale()
        out = divergence_between(model, CressieRead(0.0), -1.3, -0.6)
        swapped = divergence_between(model, CressieRead(1.0), -0.6, -1.3)
        assert out == pytest.approx(swapped, rel=1e-10)

    def test_categorical_reduces_to_finite_divergence(self):
        """Finite-support models route through the cell-mass formula."""
        model = Categorical(2)
        out = divergence_between(model, CressieRead(0.5), (0.3,), (0.6,))
        q = FiniteMeasure.from_probs([0.3, 0.7])
        p = FiniteMeasure.from_probs([0.6, 0.4])
        assert out == pytest.approx(divergence_finite(CressieRead(0.5), q, p), abs=1e-13)

    def test_generic_quadrature_matches_closed_form(self):
        """The quadrature fallback agrees with the power-family closed form."""
        model = GaussianLocation()
        numeric_spec = induced_divergence(PoissonOne(), force_numeric=True)
        out = divergence_between(model, numeric_spec, 0.6, 0.3)
        closed = divergence_between(model, CressieRead(1.0), 0.6, 0.3)
        assert out == pytest.approx(closed, rel=1e-6)

    def test_bounded_generator_on_unbounded_ratio_is_infinite(self):
        """A bounded-domain generator meets an unbounded Gaussian ratio."""
        spec = induced_divergence(ShiftedBernoulli(0.5))
        out = divergence_between(GaussianLocation(), spec, 0.9, 0.1)
        assert out == INF

    def test_zero_at_equal_parameters(self):
        """The divergence vanishes on the diagonal."""
        for g in [0.0, 0.5, 1.0, 2.0]:
            out = divergence_between(GaussianLocation(), CressieRead(g), 0.4, 0.4)
            assert out == pytest.approx(0.0, abs=1e-12)


# =============================================================================
# Tests: the dual integrand
# =============================================================================


class TestDualIntegrand:
    """Pointwise dual criterion term."""

    def test_worked_half_chi_square_value(self):
        """Frozen value of the index-2 term at the origin."""
        out = h_value(GaussianLocation(), CressieRead(2.0), 1.0, 0.0, 0.0)
        assert out == pytest.approx(2.034342107873324, abs=1e-12)

    def test_vanishes_on_diagonal_at_any_point(self):
        """With alpha = theta the lead and tail terms cancel."""
        for x in [-1.0, 0.3, 2.0]:
            out = h_value(GaussianLocation(), CressieRead(0.5), 0.8, 0.8, x)
            assert out == pytest.approx(0.0, abs=1e-10)

    def test_matches_direct_quadrature(self):
        """The lead term reproduces a directly integrated expectation."""
        model = GaussianLocation()
        spec = CressieRead(2.0)
        theta, alpha, x = 0.9, 0.4, 0.7

        def lead_integrand(y):
            # phi'(r) = r - 1 for index 2; expand in log space for the tails
            log_ratio = -0.5 * (y - theta) ** 2 + 0.5 * (y - alpha) ** 2
            log_dens = -0.5 * (y - theta) ** 2 - 0.5 * math.log(2.0 * math.pi)
            first = math.exp(log_ratio + log_dens) if log_ratio + log_dens > -700.0 else 0.0
            return first - math.exp(log_dens)

        lead, _ = integrate.quad(lead_integrand, -np.inf, np.inf)
        r = math.exp(model.log_density_ratio(theta, alpha, x))
        expect = lead - spec.sharp(r)
        assert h_value(model, spec, theta, alpha, x) == pytest.approx(expect, rel=1e-8)


# =============================================================================
# Tests: the dual estimator
# =============================================================================


class TestDualCriterion:
    """Inner maximization of the dual criterion."""

    def test_inner_maximizer_near_truth_for_unit_weights(self, gauss_sample):
        """The inner argmax sits near the outer parameter's best response."""
        model, x = gauss_sample
        mu = WeightedEmpiricalMeasure.plain(tuple(x))
        value, alpha = estimate_phi_dual(model, CressieRead(1.0), 0.4, mu)
        assert math.isfinite(value)
        assert alpha == pytest.approx(float(np.mean(x)), abs=0.05)


class TestMinimumDualEstimator:
    """Outer minimization over the parameter."""

    def test_score_identity_with_weights(self, gauss_sample):
        """The weighted estimate solves the self-normalized score equation."""
        model, x = gauss_sample
        mu = build_weighted_empirical(tuple(x), PoissonOne(), np.random.SeedSequence(31))
        w = np.asarray(mu.weights)
        target = float(np.sum(w * x) / np.sum(w))
        spec = induced_divergence(PoissonOne()).conjugate()
        report = minimum_dual_estimator(model, spec, mu)
        assert report.converged
        assert report.theta_hat == pytest.approx(model.solve_score(target), abs=1e-6)

    def test_index_invariance_under_unit_weights(self, gauss_sample):
        """Unit-weight estimates agree across generator indices."""
        model, x = gauss_sample
        mu = WeightedEmpiricalMeasure.plain(tuple(x))
        estimates = [
            minimum_dual_estimator(model, CressieRead(g), mu).theta_hat
            for g in (0.0, 0.5, 2.0)
        ]
        for est in estimates[1:]:
            assert est == pytest.approx(estimates[0], abs=1e-5)

    def test_poisson_weighted_estimate(self, rng):
        """Count-model weighted estimates solve the weighted score equation."""
        model = PoissonNatural()
        x = model.sample(0.3, 70, rng)
        mu = build_weighted_empirical(tuple(x), NormalOneOne(), np.random.SeedSequence(8))
        w = np.asarray(mu.weights)
        target = float(np.sum(w * x) / np.sum(w))
        spec = induced_divergence(NormalOneOne()).conjugate()
        report = minimum_dual_estimator(model, spec, mu)
        assert report.theta_hat == pytest.approx(model.solve_score(target), abs=1e-6)

    def test_report_serialization_fields(self, gauss_sample):
        """Reports expose the convergence diagnostics."""
        model, x = gauss_sample
        mu = WeightedEmpiricalMeasure.plain(tuple(x))
        report = minimum_dual_estimator(model, CressieRead(1.0), mu)
        out = report.to_dict()
        for key in (
            "theta_hat",
            "alpha_hat",
            "value",
            "converged",
            "iterations",
            "inner_grad_norm",
            "rejected_evaluations",
        ):
            assert key in out
        assert out["iterations"] > 0


class TestBatchEstimator:
    """Vectorized replication estimates."""

    def test_matches_per_row_estimates(self, rng):
        """The batched solver tracks the scalar solver row by row."""
        model = GaussianLocation()
        spec = CressieRead(1.0)
        points = model.sample(0.2, 60, rng)
        weights = np.vstack([PoissonOne().sample(60, rng) for _ in range(3)])
        box = model.default_box(model.pilot_estimate(points))
        batch = minimum_dual_estimator_batch(model, spec, points, weights, box)
        for row in range(3):
            mu = WeightedEmpiricalMeasure(tuple(points), tuple(weights[row]))
            single = minimum_dual_estimator(model, spec, mu)
            assert batch[row] == pytest.approx(single.theta_hat, abs=5e-5)

    def test_unit_weight_rows_recover_sample_mean(self, rng):
        """All-ones weight rows give the plain location estimate."""
        model = GaussianLocation()
        points = model.sample(0.0, 50, rng)
        weights = np.ones((2, 50))
        box = model.default_box(model.pilot_estimate(points))
        batch = minimum_dual_estimator_batch(model, CressieRead(2.0), points, weights, box)
        np.testing.assert_allclose(batch, float(np.mean(points)), atol=5e-5)
