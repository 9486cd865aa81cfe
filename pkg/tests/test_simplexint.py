"""Time-simplex integration: proposal maps, modes, determinism, honesty.

Closed-form oracles (Dirichlet integrals over the simplex of d = 2m+1
durations summing to t, with the d-1 dimensional Lebesgue measure):
* constant 1 integrates to t^(d-1)/(d-1)!,
* the product of all durations integrates to t^(2d-1) / Gamma(2d) * Gamma(1)...
  concretely for m=1 (d=3): integral of tau0*sigma*tau1 = t^5/120.
"""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critshe._rng import stream
from critshe.errors import AccuracyWarning, DomainError, IntegrandError, ParameterError
from critshe.simplexint import IntegrationPlan, TimeVector, integrate, sample_simplex
from critshe.specfun import jfn_times_t


def const_one(tv):
    return 1.0


def slot_product(tv):
    out = 1.0
    for x in tv.durations:
        out *= x
    return out


class SlotProductVectorized:
    """slot_product with the batch and scaled fast paths."""

    def evaluate_batch(self, tau):
        return np.prod(np.asarray(tau, dtype=float), axis=1)

    def evaluate_scaled(self, tau_int, log_half):
        # integrand times the product of half-slot durations
        return np.prod(tau_int, axis=1) * np.exp(2.0 * np.sum(log_half, axis=1))

    def __call__(self, tv):
        return slot_product(tv)


class SingularProfile:
    """An integrand with the interaction-weight endpoint profile.

    f(tv) = prod over half slots of JW(log tau + b)/tau with b = 0; its
    scaled form cancels the 1/tau analytically.
    """

    def evaluate_scaled(self, tau_int, log_half):
        vals = np.ones(tau_int.shape[0])
        for k in range(log_half.shape[1]):
            vals = vals * jfn_times_t(log_half[:, k], 0.0)
        return vals

    def evaluate_batch(self, tau):
        half = np.asarray(tau, dtype=float)[:, 1::2]
        vals = np.ones(half.shape[0])
        for k in range(half.shape[1]):
            vals = vals * jfn_times_t(np.log(half[:, k]), 0.0) / half[:, k]
        return vals

    def __call__(self, tv):
        out = 1.0
        for s in tv.half_slots():
            out *= float(jfn_times_t(math.log(s), 0.0)) / s
        return out


def simplex_volume(d: int, t: float) -> float:
    return t ** (d - 1) / math.factorial(d - 1)


class TestTimeVector:
    def test_properties(self):
        tv = TimeVector((0.1, 0.2, 0.3, 0.15, 0.25))
        assert tv.m == 2
        assert tv.total == pytest.approx(1.0)
        assert tv.integer_slots() == (0.1, 0.3, 0.25)
        assert tv.half_slots() == (0.2, 0.15)

    def test_even_length_rejected(self):
        with pytest.raises(DomainError):
            TimeVector((0.1, 0.2))

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            TimeVector((0.1, -0.2, 0.3))

    def test_zero_entries_allowed(self):
        assert TimeVector((0.0, 1.0, 0.0)).total == 1.0


class TestIntegrationPlan:
    def test_defaults(self):
        p = IntegrationPlan()
        assert p.mode == "adaptive-quadrature"

    def test_unknown_mode(self):
        with pytest.raises(ParameterError):
            IntegrationPlan(mode="trapezoid")

    def test_sampling_needs_budget(self):
        with pytest.raises(ParameterError):
            IntegrationPlan(mode="monte-carlo", samples=999)
        assert IntegrationPlan(mode="monte-carlo", samples=1000).samples == 1000

    def test_rel_tol_range(self):
        with pytest.raises(ParameterError):
            IntegrationPlan(rel_tol=0.0)
        with pytest.raises(ParameterError):
            IntegrationPlan(rel_tol=0.5)

    def test_seed_must_be_int(self):
        with pytest.raises(ParameterError):
            IntegrationPlan(seed=1.5)
        with pytest.raises(ParameterError):
            IntegrationPlan(seed=True)


class TestSampleSimplex:
    def test_sums_to_budget(self):
        rng = stream(42, 0)
        tv = sample_simplex(3, 2.5, rng)
        assert tv.m == 3
        assert tv.total == pytest.approx(2.5, rel=1e-12)

    def test_exchangeable_means(self):
        rng = stream(7, 1)
        n, m, t = 4000, 2, 1.0
        acc = np.zeros(2 * m + 1)
        for _ in range(n):
            acc += np.array(sample_simplex(m, t, rng).durations)
        acc /= n
        # Dirichlet(1,...,1): each coordinate has mean t/(2m+1), sd ~ t/5/sqrt(n)
        np.testing.assert_allclose(acc, t / (2 * m + 1), atol=5 * t / 5 / math.sqrt(n))

    def test_domain(self):
        rng = stream(0, 0)
        with pytest.raises(DomainError):
            sample_simplex(0, 1.0, rng)
        with pytest.raises(DomainError):
            sample_simplex(1, 0.0, rng)


class TestModesOnClosedForms:
    def test_degenerate_m0(self):
        value, err = integrate(0, 0.7, lambda tv: 2.0 * tv.durations[0], IntegrationPlan())
        assert value == pytest.approx(1.4)
        assert err == 0.0

    def test_quadrature_constant(self):
        value, err = integrate(1, 1.3, const_one, IntegrationPlan())
        assert value == pytest.approx(simplex_volume(3, 1.3), rel=1e-10)

    def test_quadrature_polynomial(self):
        t = 0.9
        value, _ = integrate(1, t, slot_product, IntegrationPlan())
        assert value == pytest.approx(t**5 / 120.0, rel=1e-9)

    def test_quadrature_scaled_path(self):
        t = 0.9
        value, _ = integrate(1, t, SlotProductVectorized(), IntegrationPlan())
        assert value == pytest.approx(t**5 / 120.0, rel=1e-9)

    def test_quadrature_rejects_high_order(self):
        with pytest.raises(ParameterError):
            integrate(2, 1.0, const_one, IntegrationPlan())

    @pytest.mark.parametrize("mode", ["monte-carlo", "quasi-monte-carlo"])
    def test_sampling_polynomial_m1(self, mode):
        t = 0.9
        plan = IntegrationPlan(mode=mode, samples=16384, rel_tol=0.1, seed=5)
        value, err = integrate(1, t, SlotProductVectorized(), plan)
        ref = t**5 / 120.0
        assert abs(value - ref) < max(4.0 * err, 1e-3 * ref)

    @pytest.mark.parametrize("mode", ["monte-carlo", "quasi-monte-carlo"])
    def test_sampling_constant_m2(self, mode):
        # d = 5 slots: volume t^4/24
        t = 1.1
        plan = IntegrationPlan(mode=mode, samples=16384, rel_tol=0.1, seed=9)
        value, err = integrate(2, t, const_one, plan)
        ref = simplex_volume(5, t)
        assert abs(value - ref) < max(4.0 * err, 2e-3 * ref)

    def test_uniform_proposal_agrees(self):
        t = 1.1
        plan = IntegrationPlan(mode="monte-carlo", samples=32768, rel_tol=0.1, seed=3)
        v_imp, e_imp = integrate(2, t, const_one, plan)
        v_uni, e_uni = integrate(2, t, const_one, plan, proposal="uniform")
        ref = simplex_volume(5, t)
        assert abs(v_imp - ref) < max(4 * e_imp, 2e-3 * ref)
        assert abs(v_uni - ref) < max(4 * e_uni, 2e-3 * ref)


class TestSingularIntegrand:
    def test_all_three_modes_agree(self):
        # the interaction-weight profile at m=1: quadrature is the reference
        t = 0.8
        ref, ref_err = integrate(1, t, SingularProfile(), IntegrationPlan())
        assert ref_err < 1e-8 * abs(ref)
        for mode in ("monte-carlo", "quasi-monte-carlo"):
            plan = IntegrationPlan(mode=mode, samples=65536, rel_tol=0.05, seed=17)
            value, err = integrate(1, t, SingularProfile(), plan)
            assert abs(value - ref) < max(4.0 * err, 2e-3 * abs(ref)), (mode, value, ref, err)

    def test_importance_beats_uniform_on_singular_profile(self):
        # same budget: the matched proposal must give a smaller standard error
        t = 0.8
        plan = IntegrationPlan(mode="monte-carlo", samples=32768, rel_tol=0.1, seed=23)
        _, e_imp = integrate(1, t, SingularProfile(), plan)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AccuracyWarning)
            _, e_uni = integrate(1, t, SingularProfile(), plan, proposal="uniform")
        assert e_imp < e_uni


class TestDeterminismAndDiagnostics:
    def test_threads_do_not_change_bits(self):
        t = 0.8
        for mode in ("monte-carlo", "quasi-monte-carlo"):
            plan = IntegrationPlan(mode=mode, samples=40000, rel_tol=0.1, seed=31)
            a = integrate(1, t, SingularProfile(), plan, threads=1)
            b = integrate(1, t, SingularProfile(), plan, threads=4)
            assert a == b

    def test_seed_changes_samples(self):
        t = 0.8
        a = integrate(1, t, SingularProfile(),
                      IntegrationPlan(mode="monte-carlo", samples=8192, rel_tol=0.1, seed=1))
        b = integrate(1, t, SingularProfile(),
                      IntegrationPlan(mode="monte-carlo", samples=8192, rel_tol=0.1, seed=2))
        assert a[0] != b[0]

    def test_batch_path_matches_plain_callable(self):
        # identical samples, identical reduction: bit-equal results
        t = 0.7
        plan = IntegrationPlan(mode="monte-carlo", samples=4096, rel_tol=0.1, seed=13)
        a = integrate(1, t, SlotProductVectorized(), plan, proposal="uniform")
        b = integrate(1, t, slot_product, plan, proposal="uniform")
        assert a == b

    def test_accuracy_warning_on_thin_budget(self):
        plan = IntegrationPlan(mode="monte-carlo", samples=1000, rel_tol=1e-3, seed=3)
        with pytest.warns(AccuracyWarning):
            integrate(1, 0.8, SingularProfile(), plan)

    def test_non_finite_integrand_raises(self):
        def bad(tv):
            return math.nan

        with pytest.raises(IntegrandError):
            integrate(1, 1.0, bad, IntegrationPlan())
        plan = IntegrationPlan(mode="monte-carlo", samples=1024, rel_tol=0.1)
        with pytest.raises(IntegrandError) as exc_info:
            integrate(1, 1.0, bad, plan)
        assert exc_info.value.time_vector is not None

    def test_domain_checks(self):
        with pytest.raises(DomainError):
            integrate(-1, 1.0, const_one, IntegrationPlan())
        with pytest.raises(DomainError):
            integrate(1, -1.0, const_one, IntegrationPlan())
        with pytest.raises(ParameterError):
            integrate(1, 1.0, const_one, IntegrationPlan(), proposal="sobol")

    @given(st.integers(min_value=1, max_value=3),
           st.floats(min_value=0.2, max_value=3.0))
    @settings(max_examples=12, deadline=None)
    def test_positive_integrand_positive_result(self, m, t):
        plan = IntegrationPlan(mode="monte-carlo", samples=2048, rel_tol=0.1, seed=77)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AccuracyWarning)
            value, _ = integrate(m, t, const_one, plan)
        assert value > 0.0
