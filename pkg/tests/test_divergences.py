"""Unit tests for the power-family generators and finite-support divergences."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import rel_entr

from divlab.divergences import (
    GAMMA_LIMIT_TOL,
    INF,
    ConjugateSpec,
    CressieRead,
    FiniteMeasure,
    conjugate,
    divergence_finite,
    eval_phi,
    phi_sharp,
)
from divlab.errors import ValidationError

GAMMAS = [-1.0, 0.0, 0.5, 1.0, 2.0, 3.0]


@pytest.fixture
def grid():
    """Strictly positive evaluation points."""
    return np.array([0.05, 0.3, 0.7, 1.0, 1.4, 2.5, 6.0])


# =============================================================================
# Tests: generator values and derivatives
# =============================================================================


class TestPowerGenerator:
    """Pointwise values of the power-family generator."""

    def test_normalization_at_one(self):
        """Every index gives phi(1) = 0 and phi'(1) = 0."""
        for g in GAMMAS:
            spec = CressieRead(g)
            assert spec.value(1.0) == 0.0
            assert abs(spec.value(1.0, order=1)) == 0.0

    def test_likelihood_branch(self, grid):
        """Index 0 matches -log x + x - 1."""
        spec = CressieRead(0.0)
        for x in grid:
            assert spec.value(float(x)) == pytest.approx(-math.log(x) + x - 1.0, abs=1e-14)

    def test_kullback_branch(self, grid):
        """Index 1 matches x log x - x + 1."""
        spec = CressieRead(1.0)
        for x in grid:
            assert spec.value(float(x)) == pytest.approx(x * math.log(x) - x + 1.0, abs=1e-14)

    def test_half_chi_square_branch(self):
        """Index 2 matches (x-1)^2/2 on the whole real line."""
        spec = CressieRead(2.0)
        for x in [-3.0, -0.2, 0.0, 0.5, 1.0, 4.0]:
            assert spec.value(x) == pytest.approx(0.5 * (x - 1.0) ** 2, abs=1e-14)

    def test_general_power_value(self):
        """The generic branch reproduces its defining rational expression."""
        # Frozen: (2^0.5 - 0.5*2 + 0.5 - 1)/(0.5*(0.5 - 1)).
        assert CressieRead(0.5).value(2.0) == pytest.approx(0.34314575050761970, abs=1e-15)
        assert CressieRead(-1.0).value(2.0) == pytest.approx((0.5 + 2.0 - 2.0) / 2.0, abs=1e-15)

    def test_limit_switch_near_special_indices(self, grid):
        """Indices within the switch tolerance use the limiting branch."""
        near_zero = CressieRead(GAMMA_LIMIT_TOL / 3.0)
        near_one = CressieRead(1.0 + GAMMA_LIMIT_TOL / 3.0)
        for x in grid:
            assert near_zero.value(float(x)) == CressieRead(0.0).value(float(x))
            assert near_one.value(float(x)) == CressieRead(1.0).value(float(x))

    def test_boundary_at_zero(self):
        """phi(0) is 1/gamma for positive indices and +inf otherwise."""
        assert CressieRead(0.5).value(0.0) == pytest.approx(2.0)
        assert CressieRead(1.0).value(0.0) == pytest.approx(1.0)
        assert CressieRead(0.0).value(0.0) == INF
        assert CressieRead(-1.0).value(0.0) == INF

    def test_negative_argument_outside_domain(self):
        """Negative arguments give +inf except for the half chi-square index."""
        for g in [-1.0, 0.0, 0.5, 1.0, 3.0]:
            assert CressieRead(g).value(-0.3) == INF
        assert CressieRead(2.0).value(-0.3) < INF

    def test_derivatives_match_finite_differences(self, grid):
        """Analytic first and second derivatives agree with central differences."""
        # Step sizes near the rounding-optimal eps^(1/3) and eps^(1/4).
        h1, h2 = 1e-6, 1e-4
        for g in GAMMAS:
            spec = CressieRead(g)
            for x in grid:
                x = float(x)
                fd1 = (spec.value(x + h1) - spec.value(x - h1)) / (2.0 * h1)
                fd2 = (spec.value(x + h2) - 2.0 * spec.value(x) + spec.value(x - h2)) / h2**2
                assert spec.value(x, order=1) == pytest.approx(fd1, rel=1e-6, abs=1e-6)
                assert spec.value(x, order=2) == pytest.approx(fd2, rel=1e-5, abs=1e-5)

    def test_invalid_order_rejected(self):
        """Derivative orders beyond the second are validation errors."""
        with pytest.raises(ValidationError):
            CressieRead(1.0).value(2.0, order=3)

    @given(st.floats(min_value=0.01, max_value=50.0), st.sampled_from(GAMMAS))
    @settings(max_examples=200, deadline=None)
    def test_nonnegative_everywhere(self, x, g):
        """The generator is nonnegative on its domain."""
        assert CressieRead(g).value(x) >= 0.0

    @given(
        st.floats(min_value=0.05, max_value=20.0),
        st.floats(min_value=0.05, max_value=20.0),
        st.floats(min_value=0.0, max_value=1.0),
        st.sampled_from(GAMMAS),
    )
    @settings(max_examples=200, deadline=None)
    def test_midpoint_convexity(self, a, b, lam, g):
        """Convexity of the generator on random chords."""
        spec = CressieRead(g)
        left = spec.value(lam * a + (1.0 - lam) * b)
        right = lam * spec.value(a) + (1.0 - lam) * spec.value(b)
        assert left <= right + 1e-9 * (1.0 + abs(right))


class TestArrayPaths:
    """Vectorized evaluation agrees with the scalar loop."""

    def test_value_array_matches_scalar(self, grid):
        """value_array equals elementwise scalar evaluation for all orders."""
        for g in GAMMAS:
            spec = CressieRead(g)
            for order in (0, 1, 2):
                vec = spec.value_array(grid, order)
                ref = [spec.value(float(x), order) for x in grid]
                np.testing.assert_allclose(vec, ref, rtol=1e-13, atol=0.0)

    def test_sharp_array_matches_scalar(self, grid):
        """sharp_array equals elementwise sharp evaluation."""
        for g in GAMMAS:
            spec = CressieRead(g)
            np.testing.assert_allclose(
                spec.sharp_array(grid), [spec.sharp(float(x)) for x in grid], rtol=1e-13
            )

    def test_array_domain_masks(self):
        """Out-of-domain entries map to +inf without warnings."""
        xs = np.array([-1.0, 0.0, 2.0])
        out = CressieRead(0.0).value_array(xs)
        assert out[0] == INF and out[1] == INF and np.isfinite(out[2])


# =============================================================================
# Tests: conjugation and the sharp transform
# =============================================================================


class TestConjugation:
    """Argument-swapping conjugation of generators."""

    def test_power_conjugate_is_index_reflection(self, grid):
        """The conjugate of index gamma is the index 1 - gamma generator."""
        for g in GAMMAS:
            left = CressieRead(g).conjugate()
            right = CressieRead(1.0 - g)
            for x in grid:
                assert left.value(float(x)) == pytest.approx(right.value(float(x)), abs=1e-13)

    def test_conjugate_defining_identity(self, grid):
        """conjugate(phi)(x) = x phi(1/x) pointwise."""
        for g in GAMMAS:
            spec = CressieRead(g)
            conj = conjugate(spec)
            for x in grid:
                x = float(x)
                assert conj.value(x) == pytest.approx(x * spec.value(1.0 / x), rel=1e-12, abs=1e-12)

    def test_double_conjugation_round_trip(self, grid):
        """Conjugating twice restores the original values."""
        spec = CressieRead(0.5)
        twice = conjugate(conjugate(spec))
        for x in grid:
            assert twice.value(float(x)) == pytest.approx(spec.value(float(x)), abs=1e-12)

    def test_generic_wrapper_matches_closed_form(self, grid):
        """ConjugateSpec on a power generator tracks the reflected index."""
        wrapped = ConjugateSpec(CressieRead(2.0))
        closed = CressieRead(-1.0)
        for x in grid:
            x = float(x)
            assert wrapped.value(x) == pytest.approx(closed.value(x), rel=1e-10, abs=1e-12)
            assert wrapped.value(x, order=1) == pytest.approx(
                closed.value(x, order=1), rel=1e-6, abs=1e-6
            )


class TestSharpTransform:
    """The x phi'(x) - phi(x) transform."""

    def test_defining_identity(self, grid):
        """sharp(x) equals x phi'(x) - phi(x) on the domain interior."""
        for g in GAMMAS:
            spec = CressieRead(g)
            for x in grid:
                x = float(x)
                expect = x * spec.value(x, order=1) - spec.value(x)
                assert phi_sharp(spec, x) == pytest.approx(expect, rel=1e-12, abs=1e-12)

    def test_power_closed_form(self, grid):
        """For index gamma the transform is (x^gamma - 1)/gamma."""
        for g in [-1.0, 0.5, 2.0, 3.0]:
            spec = CressieRead(g)
            for x in grid:
                x = float(x)
                assert spec.sharp(x) == pytest.approx((x**g - 1.0) / g, rel=1e-12)

    def test_vanishes_at_one(self):
        """sharp(1) = 0 for every index."""
        for g in GAMMAS:
            assert CressieRead(g).sharp(1.0) == pytest.approx(0.0, abs=1e-15)


class TestPrimeInverse:
    """Inversion of the first derivative."""

    def test_round_trip_on_interior(self, grid):
        """prime_inverse(phi'(x)) recovers x."""
        for g in GAMMAS:
            spec = CressieRead(g)
            for x in grid:
                x = float(x)
                y = spec.value(x, order=1)
                assert spec.prime_inverse(y) == pytest.approx(x, rel=1e-9)

    def test_saturation_beyond_range(self):
        """Off-range slopes map to the domain endpoints."""
        spec = CressieRead(0.0)
        # phi'(x) = 1 - 1/x < 1 always, so slope 2 saturates at +inf.
        assert spec.prime_inverse(2.0) == INF
        spec = CressieRead(2.0)
        assert spec.prime_inverse(-5.0) == pytest.approx(-4.0)


# =============================================================================
# Tests: finite-support divergences
# =============================================================================


class TestFiniteMeasure:
    """Labelled finite-support measures."""

    def test_from_probs_defaults_integer_support(self):
        """from_probs labels atoms 0..k-1."""
        m = FiniteMeasure.from_probs([0.2, 0.8])
        assert m.support == (0, 1)
        assert m.total_mass() == pytest.approx(1.0)

    def test_mass_lookup_missing_label(self):
        """Mass queries off the support return zero."""
        m = FiniteMeasure.from_probs([0.2, 0.8])
        assert m.mass(7) == 0.0

    def test_duplicate_labels_rejected(self):
        """Repeated support labels fail validation."""
        with pytest.raises(ValidationError):
            FiniteMeasure(("a", "a"), (0.5, 0.5))

    def test_length_mismatch_rejected(self):
        """Support and mass tuples must align."""
        with pytest.raises(ValidationError):
            FiniteMeasure(("a",), (0.5, 0.5))


class TestFiniteDivergence:
    """Divergence between finite-support measures."""

    def test_identical_measures_are_at_zero(self):
        """The divergence of a measure from itself vanishes."""
        p = FiniteMeasure.from_probs([0.3, 0.3, 0.4])
        for g in GAMMAS:
            assert divergence_finite(CressieRead(g), p, p) == pytest.approx(0.0, abs=1e-15)

    def test_kullback_value_against_scipy(self):
        """Index 1 reproduces the summed relative entropy."""
        q = FiniteMeasure.from_probs([0.5, 0.3, 0.2])
        p = FiniteMeasure.from_probs([0.2, 0.3, 0.5])
        expect = float(np.sum(rel_entr([0.5, 0.3, 0.2], [0.2, 0.3, 0.5])))
        assert divergence_finite(CressieRead(1.0), q, p) == pytest.approx(expect, abs=1e-13)

    def test_mass_off_reference_support_is_infinite(self):
        """q-mass on a null reference atom makes the divergence infinite."""
        q = FiniteMeasure((0, 1), (0.5, 0.5))
        p = FiniteMeasure((0,), (1.0,))
        assert divergence_finite(CressieRead(1.0), q, p) == INF

    def test_shared_null_atom_ignored(self):
        """Atoms missing from both measures contribute nothing."""
        q = FiniteMeasure((0, 1, 2), (0.5, 0.5, 0.0))
        p = FiniteMeasure((0, 1), (0.5, 0.5))
        assert divergence_finite(CressieRead(1.0), q, p) == pytest.approx(0.0, abs=1e-15)

    def test_negative_reference_rejected(self):
        """Signed reference masses are a validation error."""
        q = FiniteMeasure.from_probs([0.5, 0.5])
        p = FiniteMeasure((0, 1), (1.2, -0.2))
        with pytest.raises(ValidationError):
            divergence_finite(CressieRead(1.0), q, p)

    @given(
        st.lists(st.floats(min_value=0.05, max_value=3.0), min_size=3, max_size=3),
        st.lists(st.floats(min_value=0.05, max_value=3.0), min_size=3, max_size=3),
        st.sampled_from([-1.0, 0.0, 0.5, 1.0, 2.0]),
    )
    @settings(max_examples=150, deadline=None)
    def test_conjugation_swaps_arguments(self, qm, pm, g):
        """divergence(phi~; p, q) equals divergence(phi; q, p) for positive measures."""
        q = FiniteMeasure((0, 1, 2), tuple(qm))
        p = FiniteMeasure((0, 1, 2), tuple(pm))
        direct = divergence_finite(CressieRead(g), q, p)
        swapped = divergence_finite(conjugate(CressieRead(g)), p, q)
        assert direct == pytest.approx(swapped, rel=1e-12, abs=1e-12)


class TestEvalHelpers:
    """Module-level evaluation helpers."""

    def test_eval_phi_delegates(self):
        """eval_phi matches the generator method for each order."""
        spec = CressieRead(0.5)
        for order in (0, 1, 2):
            assert eval_phi(spec, 1.7, order) == spec.value(1.7, order)
