import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_panel
from expert_aggregation.core import (DimensionError, ForecastPanel, NonFiniteError, RegretLedger,
                                     StreamKey, check_weights, in_convex_hull, normalize, predict,
                                     update_ledger)


class TestPredict:
    def test_uniform_midpoint(self):
        assert predict([0.5, 0.5], [10, 20]) == 15

    def test_basis_vector_selects_expert(self):
        assert predict([1, 0, 0], [3.2, 7, -1]) == 3.2

    def test_dot_product(self):
        # 0.2*1 + 0.3*2 + 0.5*3
        assert predict([0.2, 0.3, 0.5], [1, 2, 3]) == pytest.approx(2.3, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            predict([0.5, 0.5], [1, 2, 3])

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.data())
    def test_within_expert_range(self, x, data):
        raw = data.draw(st.lists(st.floats(0, 1), min_size=len(x), max_size=len(x)))
        w = normalize(np.array(raw))
        assert in_convex_hull(predict(w, x), x)


class TestStreamKeyAndPanel:
    def test_lead_time_positive(self):
        with pytest.raises(ValueError):
            StreamKey("A", 0)

    def test_keys_order_and_hash(self):
        keys = {StreamKey("B", 6), StreamKey("A", 12), StreamKey("A", 6)}
        assert sorted(keys) == [StreamKey("A", 6), StreamKey("A", 12), StreamKey("B", 6)]
        assert str(StreamKey("A", 6)) == "A_6"

    def test_dates_strictly_increasing(self):
        d = dt.date(2020, 1, 1)
        with pytest.raises(ValueError):
            ForecastPanel(("a",), (d, d), np.zeros((2, 1)), np.zeros(2))

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteError):
            make_panel([[1.0], [np.nan]], [0.0, 0.0])

    def test_shape_checks(self):
        with pytest.raises(DimensionError):
            make_panel(np.zeros((3, 2)), np.zeros(2))
        with pytest.raises(DimensionError):
            ForecastPanel((), (), np.zeros((0, 0)), np.zeros(0))


class TestWeights:
    def test_check_weights(self):
        check_weights(np.array([0.25, 0.75]))
        with pytest.raises(ValueError):
            check_weights(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            check_weights(np.array([1.5, -0.5]))

    def test_normalize_falls_back_to_uniform(self):
        np.testing.assert_array_equal(normalize(np.zeros(4)), np.full(4, 0.25))


class TestLedger:
    def test_single_step(self):
        ledger = update_ledger(RegretLedger(2), 1.0, [0.0, 4.0])
        assert ledger.cum_loss_aggregation == 1.0
        np.testing.assert_array_equal(ledger.cum_loss_experts, [0.0, 4.0])

    def test_two_steps_regret(self):
        ledger = RegretLedger(2)
        ledger = update_ledger(ledger, 1.0, [0.0, 4.0])
        ledger = update_ledger(ledger, 1.0, [4.0, 0.0])
        assert ledger.cum_loss_aggregation == 2.0
        np.testing.assert_array_equal(ledger.cum_loss_experts, [4.0, 4.0])
        np.testing.assert_array_equal(ledger.regrets, [-2.0, -2.0])

    def test_empty_ledger_regrets_zero(self):
        np.testing.assert_array_equal(RegretLedger(3).regrets, np.zeros(3))

    def test_update_is_non_destructive(self):
        base = RegretLedger(2)
        update_ledger(base, 1.0, [1.0, 1.0])
        assert base.steps == 0 and base.cum_loss_aggregation == 0.0

    def test_non_finite_rejected_with_context(self):
        ledger = RegretLedger(2)
        with pytest.raises(NonFiniteError, match="2021-05-01"):
            ledger.record(np.inf, [0.0, 1.0], StreamKey("A", 6), dt.date(2021, 5, 1))
        assert ledger.steps == 0

    def test_window_keeps_trailing_steps(self):
        ledger = RegretLedger(2, window=2)
        for agg, ex in [(1.0, [1, 2]), (2.0, [3, 4]), (4.0, [5, 6])]:
            ledger.record(agg, ex)
        assert ledger.cum_loss_aggregation == 6.0
        np.testing.assert_array_equal(ledger.cum_loss_experts, [8.0, 10.0])

    @settings(max_examples=50)
    @given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1))
    def test_additivity_over_concatenated_streams(self, ta, tb, seed):
        rng = np.random.default_rng(seed)
        a_agg, a_ex = rng.random(ta), rng.random((ta, 3))
        b_agg, b_ex = rng.random(tb), rng.random((tb, 3))
        la, lb, lab = RegretLedger(3), RegretLedger(3), RegretLedger(3)
        for agg, ex in zip(a_agg, a_ex):
            la.record(agg, ex)
            lab.record(agg, ex)
        for agg, ex in zip(b_agg, b_ex):
            lb.record(agg, ex)
            lab.record(agg, ex)
        np.testing.assert_allclose(lab.cum_loss_experts, la.cum_loss_experts + lb.cum_loss_experts,
                                   rtol=1e-12)
        assert lab.cum_loss_aggregation == pytest.approx(la.cum_loss_aggregation + lb.cum_loss_aggregation,
                                                         rel=1e-12)
