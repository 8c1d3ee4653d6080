import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nlbellman import _kernels
from nlbellman.transforms import (DiscountFunction, Family, HdtdSingularity, Kind, TransformSpec,
                                  discount_apply, discount_derivative, eval_target,
                                  hyperbolic_equivalent_g, is_unknown, lipschitz_bound, squash,
                                  unsquash)

gammas = st.floats(0.0, 1.0)
kappas = st.floats(0.01, 1.0)
values = st.floats(-100.0, 100.0)

ALL_SPECS = [
    TransformSpec.linear(0.9),
    TransformSpec.reward_transform(0.8, 0.5, 2.0),
    TransformSpec.power(0.6, 0.9),
    TransformSpec.linear_discount(0.7, 0.5),
    TransformSpec.squash(0.95, 1e-2),
    TransformSpec.hdtd(0.5),
]


def power(gamma, kappa=1.0):
    return DiscountFunction(Family.POWER, gamma, kappa)


class TestEvalTarget:
    def test_linear(self):
        assert eval_target(TransformSpec.linear(0.9), 1.0, 10.0) == pytest.approx(10.0, abs=1e-15)

    def test_hdtd_zero_value(self):
        assert eval_target(TransformSpec.hdtd(1.0), 5.0, 0.0) == 5.0

    def test_hdtd_pole(self):
        with pytest.raises(HdtdSingularity):
            eval_target(TransformSpec.hdtd(1.0), 0.0, -1.0)

    def test_kinds(self):
        r, v = 0.7, 2.5
        spec = TransformSpec.reward_transform(0.8, 0.5, 2.0)
        assert eval_target(spec, r, v) == pytest.approx(
            2.0 * math.exp(spec.eta * (r / 2.0 - 1.0)) + 0.8 * v)
        assert eval_target(TransformSpec.power(0.5), r, 3.0) == pytest.approx(r + 1.0)
        assert eval_target(TransformSpec.linear_discount(0.5, 0.5), r, v) == pytest.approx(r + 0.25 * v)
        sq = TransformSpec.squash(0.9, 0.0)
        h_inv = (abs(v) + 1) ** 2 - 1
        assert eval_target(sq, r, v) == pytest.approx(math.sqrt(r + 0.9 * h_inv + 1) - 1)

    def test_vectorised_matches_scalar(self):
        r = np.linspace(-3, 3, 7)
        v = np.linspace(-0.4, 5, 7)
        for spec in ALL_SPECS:
            vec = eval_target(spec, r, v)
            np.testing.assert_allclose(vec, [eval_target(spec, a, b) for a, b in zip(r, v)])

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind.value)
    def test_compiled_kernel_agrees(self, spec):
        params = np.array([spec.gamma, spec.k, spec.kappa, spec.r_ref, spec.squash_eps, spec.eta,
                           _kernels.FAMILY_CODES[spec.family.value]])
        kind = _kernels.KIND_CODES[spec.kind.value]
        for r in np.linspace(-5, 5, 11):
            for v in np.linspace(-1.5, 30, 13):
                try:
                    want = eval_target(spec, r, v)
                except HdtdSingularity:
                    assert _kernels.target(kind, params, r, v)[1] == _kernels.ERR_POLE
                    continue
                got, err = _kernels.target(kind, params, r, v)
                assert err == 0
                assert got == pytest.approx(want, rel=1e-13, abs=1e-13)


class TestHyperbolicEquivalentG:
    def test_identity_at_reference(self):
        spec = TransformSpec.reward_transform(0.7, 0.3, 2.5)
        assert hyperbolic_equivalent_g(spec, 2.5) == pytest.approx(2.5, rel=1e-15)

    def test_closed_form(self):
        spec = TransformSpec.reward_transform(math.exp(-1), 1.0, 1.0)
        assert spec.eta == pytest.approx(1.0)
        assert hyperbolic_equivalent_g(spec, 2.0) == pytest.approx(2.718281828, abs=1e-9)

    def test_zero_maps_to_zero(self):
        spec = TransformSpec.reward_transform(0.9, 0.1, 1.0)
        assert hyperbolic_equivalent_g(spec, 0.0) == 0.0
        # the unmodified closed form would give r * exp(-eta)
        assert hyperbolic_equivalent_g(spec, 1e-300) == pytest.approx(math.exp(-spec.eta))

    @given(st.floats(0.01, 0.99), st.floats(0.01, 10))
    def test_eta_positive(self, gamma, k):
        assert TransformSpec.reward_transform(gamma, k).eta > 0


class TestDiscount:
    def test_power_value(self):
        assert discount_apply(power(0.5), 3.0) == pytest.approx(1.0, abs=1e-15)

    @given(gammas)
    def test_power_origin(self, g):
        assert discount_apply(power(g), 0.0) == 0.0

    def test_undiscounted(self):
        assert discount_apply(power(1.0), -7.0) == -7.0

    def test_linear_family(self):
        d = DiscountFunction(Family.LINEAR, 0.9, 0.5)
        assert discount_apply(d, 4.0) == pytest.approx(1.8)
        assert discount_derivative(DiscountFunction(Family.LINEAR, 0.9, 1.0), 123.0) == 0.9

    def test_derivative_at_origin(self):
        # slope of kappa * ((v + 1)^gamma - 1) at 0 is kappa * gamma
        assert discount_derivative(power(1.0, 0.7), 0.0) == pytest.approx(0.7)
        assert discount_derivative(power(0.5, 1.0), 0.0) == pytest.approx(0.5)

    def test_derivative_value(self):
        h = 1e-6
        fd = (discount_apply(power(0.5), 3.0 + h) - discount_apply(power(0.5), 3.0 - h)) / (2 * h)
        assert discount_derivative(power(0.5), 3.0) == pytest.approx(fd, abs=1e-8)
        assert discount_derivative(power(0.5), 3.0) == pytest.approx(0.25)

    @settings(max_examples=200)
    @given(values)
    def test_property_myopic(self, v):
        assert discount_apply(power(0.0), v) == 0.0

    @settings(max_examples=200)
    @given(values)
    def test_property_undiscounted(self, v):
        assert discount_apply(power(1.0), v) == v

    @settings(max_examples=200)
    @given(gammas, kappas, values)
    def test_property_odd(self, g, kappa, v):
        d = power(g, kappa)
        assert abs(discount_apply(d, v) + discount_apply(d, -v)) <= 1e-12

    @settings(max_examples=200)
    @given(gammas, gammas, st.floats(1e-3, 100.0))
    def test_property_monotone_in_gamma(self, g1, g2, v):
        assume(abs(g1 - g2) > 1e-6)
        hi, lo = max(g1, g2), min(g1, g2)
        assert discount_apply(power(hi), v) > discount_apply(power(lo), v)

    @settings(max_examples=100)
    @given(gammas, kappas)
    def test_derivative_matches_finite_differences(self, g, kappa):
        d = power(g, kappa)
        v = np.concatenate([np.linspace(-50, -0.05, 200), np.linspace(0.05, 50, 200)])
        h = 1e-5
        fd = (discount_apply(d, v + h) - discount_apply(d, v - h)) / (2 * h)
        np.testing.assert_allclose(discount_derivative(d, v), fd, atol=1e-6)

    @given(gammas, kappas, values)
    def test_derivative_in_unit_band(self, g, kappa, v):
        assert 0.0 <= discount_derivative(power(g, kappa), v) <= kappa


class TestSquash:
    def test_origin(self):
        assert squash(TransformSpec.squash(0.9), 0.0) == 0.0

    def test_value(self):
        assert squash(TransformSpec.squash(0.9, 0.0), 3.0) == pytest.approx(1.0, abs=1e-15)

    def test_round_trip_example(self):
        spec = TransformSpec.squash(0.9)
        assert unsquash(spec, squash(spec, 1234.5)) == pytest.approx(1234.5, abs=1e-6)

    @settings(max_examples=300)
    @given(st.floats(-1e6, 1e6), st.sampled_from([0.0, 1e-3, 1e-2, 0.5]))
    def test_round_trip_relative(self, x, eps):
        spec = TransformSpec.squash(0.9, eps)
        back = unsquash(spec, squash(spec, x))
        assert abs(back - x) <= 1e-9 * max(abs(x), 1e-300) or back == x

    def test_round_trip_grid(self):
        spec = TransformSpec.squash(0.9)
        x = np.concatenate([-np.logspace(-12, 6, 500), np.logspace(-12, 6, 500)])
        np.testing.assert_allclose(unsquash(spec, squash(spec, x)), x, rtol=1e-9, atol=0)


class TestLipschitz:
    def test_examples(self):
        assert lipschitz_bound(TransformSpec.linear(0.9)) == 0.9
        assert lipschitz_bound(TransformSpec.power(1.0, 0.8)) == pytest.approx(0.8)
        assert lipschitz_bound(TransformSpec.power(0.5, 0.8)) <= 0.8
        assert is_unknown(lipschitz_bound(TransformSpec.hdtd(1.0)))
        assert lipschitz_bound(TransformSpec.reward_transform(0.7, 1.0)) == 0.7

    @pytest.mark.parametrize("spec", ALL_SPECS[:-1], ids=lambda s: s.kind.value)
    def test_bound_holds(self, spec):
        rng = np.random.default_rng(5)
        L = lipschitz_bound(spec)
        r = rng.uniform(-10, 10, 5000)
        x1 = rng.uniform(-100, 100, 5000)
        x2 = x1 + rng.normal(0, 1, 5000) * rng.choice([1e-3, 1, 50], 5000)
        lhs = np.abs(eval_target(spec, r, x1) - eval_target(spec, r, x2))
        assert np.all(lhs <= L * np.abs(x1 - x2) + 1e-9)


class TestSpecValidation:
    def test_ranges(self):
        with pytest.raises(ValueError):
            TransformSpec.power(0.5, 0.0)
        with pytest.raises(ValueError):
            TransformSpec.linear(1.5)
        with pytest.raises(ValueError):
            TransformSpec.reward_transform(1.0, 1.0)
        with pytest.raises(ValueError):
            TransformSpec(Kind.REWARD_TRANSFORM, gamma=0.5, r_ref=0.0)

    def test_nonexpansion_flag(self):
        assert TransformSpec.power(0.5, 1.0).nonexpansion_only
        assert not TransformSpec.power(0.5, 0.9).nonexpansion_only
        assert not TransformSpec.linear(0.9).nonexpansion_only
