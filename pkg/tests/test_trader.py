import csv
import io

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from stockbot.trader import (
    PortfolioState,
    TraderError,
    decision_log_csv,
    hold_strategy,
    net_worth_csv,
    optimize_portfolio,
    run_backtest,
)

from conftest import gbm_prices
from oracles import rebalance_lp, simplex_max, vertex_enumeration_max

prices_st = st.floats(0.1, 500.0)


@st.composite
def lp_instance(draw):
    n = draw(st.integers(1, 6))
    x = np.array(draw(st.lists(prices_st, min_size=n, max_size=n)))
    xhat = np.array(draw(st.lists(prices_st, min_size=n, max_size=n)))
    shares = np.array(draw(st.lists(st.floats(0, 10), min_size=n, max_size=n)))
    cash = draw(st.floats(0, 1000))
    return x, xhat, PortfolioState(shares, cash)


class TestOptimize:
    def test_best_asset_takes_everything(self):
        d = optimize_portfolio([10, 20], [11, 19], PortfolioState.all_cash(2, 1000))
        np.testing.assert_array_equal(d.new_shares, [100, 0])
        assert d.new_cash == 0
        assert d.expected_return == pytest.approx(100)
        assert d.asset == 0

    def test_all_decline_goes_to_cash(self):
        d = optimize_portfolio([10, 20], [9, 19], PortfolioState.all_cash(2, 1000))
        np.testing.assert_array_equal(d.new_shares, [0, 0])
        assert d.new_cash == 1000 and d.asset is None and d.expected_return == 0

    def test_zero_predicted_change_stays_in_cash(self):
        d = optimize_portfolio([10, 20], [10, 20], PortfolioState.all_cash(2, 1000))
        assert d.asset is None

    def test_tie_picks_lowest_index(self):
        d = optimize_portfolio([10, 20], [11, 22], PortfolioState.all_cash(2, 1000))
        assert d.asset == 0

    def test_rebalances_existing_holdings(self):
        # 50 shares at 20 are worth 1000, moved into asset 0
        d = optimize_portfolio([10, 20], [12, 21], PortfolioState([0.0, 50.0], 0.0))
        np.testing.assert_allclose(d.new_shares, [100, 0])

    @pytest.mark.parametrize("prices", [[0.0, 1.0], [-1.0, 2.0], [np.nan, 1.0]])
    def test_bad_prices_rejected(self, prices):
        with pytest.raises(TraderError):
            optimize_portfolio(prices, [1.0, 1.0], PortfolioState.all_cash(2, 10))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(TraderError):
            optimize_portfolio([1.0, 2.0], [1.0, 2.0, 3.0], PortfolioState.all_cash(2, 10))
        with pytest.raises(TraderError):
            optimize_portfolio([1.0, 2.0], [1.0, 2.0], PortfolioState.all_cash(3, 10))

    def test_negative_state_rejected(self):
        with pytest.raises(TraderError):
            PortfolioState([-1.0], 0.0)

    @settings(max_examples=200)
    @given(lp_instance())
    def test_conservation_and_non_negativity(self, inst):
        x, xhat, state = inst
        d = optimize_portfolio(x, xhat, state)
        value = state.net_worth(x)
        assert np.all(d.new_shares >= 0) and d.new_cash >= 0
        assert abs(d.new_shares @ x + d.new_cash - value) <= 1e-9 * max(1.0, value)

    @settings(max_examples=200)
    @given(lp_instance())
    def test_objective_matches_lp_oracles(self, inst):
        x, xhat, state = inst
        value = state.net_worth(x)
        d = optimize_portfolio(x, xhat, state)
        c, A, b = rebalance_lp(x, xhat, value)
        _, simplex_obj = simplex_max(c, A, b)
        _, vertex_obj = vertex_enumeration_max(c, A, b)
        tol = 1e-9 * max(1.0, abs(vertex_obj))
        assert abs(d.objective - simplex_obj) <= tol
        assert abs(d.objective - vertex_obj) <= tol
        assert d.objective == pytest.approx(d.new_shares @ (xhat - x), abs=tol)

    @given(lp_instance(), st.floats(0.01, 100.0))
    def test_scaling_one_asset_keeps_choice(self, inst, k):
        x, xhat, state = inst
        r = np.sort(np.r_[(xhat - x) / x, 0.0])
        # near-ties can legitimately flip under rounding
        assume(len(r) < 2 or r[-1] - r[-2] > 1e-9)
        before = optimize_portfolio(x, xhat, state).asset
        i = len(x) - 1
        x2, xhat2 = x.copy(), xhat.copy()
        x2[i] *= k
        xhat2[i] *= k
        assert optimize_portfolio(x2, xhat2, state).asset == before


class TestHold:
    def test_doubling(self):
        prices = np.array([[10.0, 40.0], [20.0, 80.0]])
        np.testing.assert_allclose(hold_strategy(1000, prices), [1000, 2000])

    def test_constant_prices_flat(self):
        np.testing.assert_allclose(hold_strategy(1000, np.full((5, 3), 7.0)), 1000)

    def test_single_asset(self):
        p = np.array([4.0, 5.0, 2.0])
        np.testing.assert_allclose(hold_strategy(1000, p), 1000 / 4.0 * p)

    def test_rejects_bad_input(self):
        with pytest.raises(TraderError):
            hold_strategy(1000, np.array([[1.0, 0.0]]))


class TestBacktest:
    def test_compounding_with_perfect_foresight(self):
        actual = np.array([100.0, 110.0, 121.0])
        np.testing.assert_allclose(run_backtest(actual[1:], actual).net_worth, [1000, 1100, 1210])

    def test_predicted_decline_keeps_cash(self):
        actual = np.array([100.0, 150.0, 80.0, 90.0])
        r = run_backtest(actual[:-1] * 0.9, actual)
        np.testing.assert_array_equal(r.net_worth, 1000.0)

    def test_realised_with_actual_prices(self):
        # forecast a rise that does not happen: worth follows the actual move
        r = run_backtest([120.0], [100.0, 90.0])
        assert r.net_worth[-1] == pytest.approx(900.0)

    def test_shape_mismatch(self):
        with pytest.raises(TraderError):
            run_backtest(np.ones((3, 2)), np.ones((3, 2)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 60))
    def test_rebalance_never_moves_wealth(self, seed, n, T):
        rng = np.random.default_rng(seed)
        actual = np.column_stack([gbm_prices(rng, T + 1, vol=0.05) for _ in range(n)])
        forecasts = actual[:-1] * rng.uniform(0.9, 1.1, (T, n))
        r = run_backtest(forecasts, actual)
        np.testing.assert_allclose(r.value_after, r.value_before, rtol=1e-9)
        # marking to market links consecutive days
        np.testing.assert_allclose(r.value_before, r.net_worth[:-1], rtol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 6))
    def test_perfect_foresight_beats_hold(self, seed, n):
        rng = np.random.default_rng(seed)
        actual = np.column_stack([gbm_prices(rng, 80, vol=0.03) for _ in range(n)])
        bot = run_backtest(actual[1:], actual).net_worth[-1]
        assert bot >= hold_strategy(1000, actual)[-1] * (1 - 1e-12)


class TestCsv:
    def test_net_worth_long_format(self):
        text = net_worth_csv({"hold": np.array([1000.0, 1001.5])}, ["2020-01-01", "2020-01-02"])
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["day_index", "date", "strategy", "net_worth"]
        assert rows[2] == ["1", "2020-01-02", "hold", "1001.5"]

    def test_decision_log(self):
        r = run_backtest([[11.0, 19.0], [9.0, 25.0]], [[10.0, 20.0], [10.0, 20.0], [10.0, 20.0]])
        rows = list(csv.DictReader(io.StringIO(decision_log_csv(r, ["A", "B"]))))
        assert [row["asset"] for row in rows] == ["A", "B"]
        assert float(rows[0]["shares_A"]) == 100.0 and float(rows[1]["shares_B"]) == 50.0
