import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nlbellman.mdp import Policy, chain, sparse_chain
from nlbellman.returns import (agreement_stats, compare_returns, hdtd_chain_value,
                               hyperbolic_return, on_boundary, prefers_later, sparse_sequence,
                               transformed_return, verify_ordering_equivalence)
from nlbellman.solvers import fixed_point
from nlbellman.transforms import TransformSpec, hyperbolic_equivalent_g


class TestHyperbolicReturn:
    def test_delayed_unit(self):
        assert hyperbolic_return([0, 0, 1], 1.0) == pytest.approx(1 / 3)

    def test_immediate(self):
        assert hyperbolic_return([5.0], 7.3) == 5.0

    def test_zero(self):
        assert hyperbolic_return([0.0] * 10, 0.5) == 0.0

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.floats(-10, 10),
           st.floats(0.01, 10))
    def test_linear_in_rewards(self, seq, a, k):
        scaled = hyperbolic_return([a * x for x in seq], k)
        assert scaled == pytest.approx(a * hyperbolic_return(seq, k), abs=1e-12 * (1 + abs(scaled)))

    def test_rejects_nonpositive_k(self):
        with pytest.raises(ValueError):
            hyperbolic_return([1.0], 0.0)


class TestTransformedReturn:
    def test_sparse_closed_form(self):
        spec = TransformSpec.reward_transform(0.85, 0.4, 1.5)
        for T in (0, 1, 7):
            got = transformed_return(sparse_sequence(2.0, T), spec)
            assert got == pytest.approx(0.85 ** T * hyperbolic_equivalent_g(spec, 2.0), rel=1e-14)

    def test_hand_value(self):
        spec = TransformSpec.reward_transform(math.exp(-1), 1.0, 1.0)
        assert transformed_return([0, 0, 0, 3], spec) == pytest.approx(math.exp(-1), rel=1e-14)

    def test_zero_rewards(self):
        spec = TransformSpec.reward_transform(0.9, 0.1)
        assert transformed_return([0.0] * 5, spec) == 0.0

    def test_outer_log(self):
        spec = TransformSpec.reward_transform(0.9, 0.1)
        seq = [0.0, 2.0]
        assert transformed_return(seq, spec, outer_log=True) == pytest.approx(
            math.log(transformed_return(seq, spec)))
        with pytest.raises(ValueError):
            transformed_return([0.0], spec, outer_log=True)

    def test_needs_reward_transform(self):
        with pytest.raises(ValueError):
            transformed_return([1.0], TransformSpec.linear(0.9))


class TestPrefersLater:
    def test_examples(self):
        assert prefers_later(2.0, 1, 1.0, 0.5)
        assert not prefers_later(2.0, 1, 1.0, 1.0)
        assert on_boundary(2.0, 1, 1.0, 1.0)

    def test_reversal_narrative(self):
        # +1 now beats +2 in one step, yet +2 at step 20 beats +1 at step 19
        k = 1.5
        assert not prefers_later(2.0, 1, 1.0, k)
        assert hyperbolic_return(sparse_sequence(2.0, 20), k) > \
            hyperbolic_return(sparse_sequence(1.0, 19), k)


class TestOrderingEquivalence:
    def test_default_grid_agrees(self):
        R = 0.5 + 0.25 * np.arange(19)
        verdicts = verify_ordering_equivalence(0.9, 0.1, 1.0, R, range(51))
        stats = agreement_stats(verdicts)
        assert stats["fraction"] == 1.0
        assert stats["eligible"] + stats["boundary"] == 19 * 51

    def test_boundary_cell(self):
        (v,) = verify_ordering_equivalence(0.9, 0.5, 2.0, [2.0 * (1 + 0.5 * 4)], [4])
        assert v.boundary
        assert agreement_stats([v])["eligible"] == 0

    def test_outer_log_same_verdicts(self):
        R = 0.5 + 0.25 * np.arange(19)
        a = verify_ordering_equivalence(0.9, 0.1, 1.0, R, range(51))
        b = verify_ordering_equivalence(0.9, 0.1, 1.0, R, range(51), outer_log=True)
        assert [(x.prefers_later_by_G, x.agree, x.boundary) for x in a] == \
            [(x.prefers_later_by_G, x.agree, x.boundary) for x in b]

    @settings(max_examples=300)
    @given(st.floats(0.01, 0.99), st.floats(0.01, 10), st.floats(0.1, 10),
           st.floats(0.01, 50), st.integers(0, 60))
    def test_sign_matches_hyperbolic_predicate(self, gamma, k, r, R, T):
        margin = R / r - 1 - k * T
        assume(abs(margin) > 1e-9)
        spec = TransformSpec.reward_transform(gamma, k, r)
        G0 = transformed_return(sparse_sequence(R, T), spec)
        assume(np.isfinite(G0))
        assert (G0 > r) == (margin > 0)

    @settings(max_examples=100)
    @given(st.floats(0.05, 0.95), st.floats(0.05, 5), st.floats(0.2, 5))
    def test_monotone_wrappers_keep_verdicts(self, gamma, k, r):
        R = r * np.linspace(0.3, 4.0, 9)
        spec = TransformSpec.reward_transform(gamma, k, r)
        for T in range(0, 12, 3):
            for x in R:
                G0 = transformed_return(sparse_sequence(x, T), spec)
                # wrappers are strictly monotone only in exact arithmetic; a G0 one
                # ulp from r can collapse onto wrap(r) after rounding
                if math.isclose(G0, r, rel_tol=1e-12):
                    continue
                for wrap in (math.log, math.sqrt, lambda z: z ** 3, math.atan):
                    assert (wrap(G0) > wrap(r)) == (G0 > r)

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            verify_ordering_equivalence(0.9, 0.1, 1.0, [], [1])


class TestSolverConsistency:
    @pytest.mark.parametrize("R,T", [(2.0, 0), (0.5, 3), (3.0, 7), (1.25, 15)])
    def test_chain_value_equals_return(self, R, T):
        spec = TransformSpec.reward_transform(0.9, 0.3, 1.0)
        m = sparse_chain(R, T)
        v, diag = fixed_point(m, Policy.uniform(m), spec, tol=1e-12)
        assert v[0] == pytest.approx(transformed_return(sparse_sequence(R, T), spec), abs=1e-12)

    def test_hdtd_chain_value_matches_solver(self):
        seq = [0.5, 0.0, 1.0, 2.0]
        m = chain(seq)
        v, _ = fixed_point(m, Policy.uniform(m), TransformSpec.hdtd(0.4))
        assert v[0] == pytest.approx(hdtd_chain_value(seq, 0.4), abs=1e-12)

    def test_dense_report(self):
        out = compare_returns([1.0, 1.0, 1.0], 0.9, 0.5)
        assert set(out) == {"hyperbolic", "transformed", "hdtd"}
        assert out["hyperbolic"] == pytest.approx(1 + 1 / 1.5 + 1 / 2)
