import numpy as np
import pandas as pd
import pytest

from pecashflow import macro, synthetic
from pecashflow.macro import MacroError, MacroSeries, Shock, StressScenario


def daily(name, start, end, f):
    dates = pd.bdate_range(start, end)
    return MacroSeries(name, "daily", tuple(dates), tuple(f(np.arange(len(dates)))))


def test_daily_resample_takes_last_trading_day():
    s = daily("sp500", "2019-01-01", "2019-12-31", lambda i: 100.0 + i)
    q = macro.resample_quarterly(s)
    assert len(q) == 4
    last = pd.Timestamp("2019-03-29")  # a Friday
    assert q.iloc[0] == s.values[s.dates.index(last)]


def test_quarterly_identity_and_idempotence():
    q0 = macro.resample_quarterly(synthetic.gen_macro(2000, 2003, 1)["gdp"])
    s = macro.quarterly_series("gdp", q0)
    pd.testing.assert_series_equal(macro.resample_quarterly(s), q0)


def test_monthly_cpi_third_month():
    dates = pd.date_range("2018-01-31", periods=24, freq="ME")
    vals = 200 + np.arange(24) * 0.5
    q = macro.resample_quarterly(MacroSeries("cpi", "monthly", tuple(dates), tuple(vals)))
    assert len(q) == 8
    np.testing.assert_array_equal(q.to_numpy(), vals[2::3])


def test_empty_quarter_is_named():
    dates = ["2019-01-15", "2019-02-15", "2019-07-15"]
    with pytest.raises(MacroError, match="2019Q2"):
        macro.resample_quarterly(MacroSeries("x", "monthly", dates, (1.0, 2.0, 3.0)))


def test_series_validation():
    with pytest.raises(MacroError):
        MacroSeries("x", "weekly", ("2019-01-01",), (1.0,))
    with pytest.raises(MacroError):
        MacroSeries("x", "daily", ("2019-01-02", "2019-01-01"), (1.0, 2.0))
    with pytest.raises(MacroError):
        MacroSeries("x", "daily", ("2019-01-01",), (float("nan"),))


def _q(values, start="2010Q1"):
    return pd.Series(values, index=pd.period_range(start, periods=len(values), freq="Q"), name="x")


def test_yoy_examples():
    assert (macro.yoy_change(_q([5.0] * 9)) == 0).all()
    assert macro.yoy_change(_q([100, 101, 102, 105, 110])).iloc[0] == pytest.approx(0.10)
    doubling = _q([2.0 ** (i / 4) for i in range(16)])
    np.testing.assert_allclose(macro.yoy_change(doubling), 1.0, rtol=1e-14)
    with pytest.raises(MacroError):
        macro.yoy_change(_q([1.0, 2, 3, 4]))
    with pytest.raises(MacroError, match="non-positive"):
        macro.yoy_change(_q([0.0, 1, 1, 1, 1]))


def test_yoy_above_minus_one():
    m = synthetic.gen_macro(2000, 2010, 4)
    table = macro.macro_feature_table(m)
    assert (table.to_numpy() > -1).all()
    assert list(table.columns) == list(macro.MACRO_NAMES)


def test_alignment_rules():
    m = synthetic.gen_macro(2005, 2012, 2)
    table = macro.macro_feature_table(m)
    rows = macro.align_features(2008, 12, table)
    assert rows.shape == (12, 7)
    np.testing.assert_array_equal(rows[0], table.loc[pd.Period("2008Q1", "Q")].to_numpy())
    np.testing.assert_array_equal(rows, macro.align_features(2008, 12, table))
    with pytest.raises(MacroError, match="2013Q1"):
        macro.align_features(2010, 40, table)


def test_attach_gives_ten_columns():
    from pecashflow.pipelines import prepare_dataset
    from pecashflow.windowing import make_windows
    recs, _ = synthetic.generate_yale_dataset(synthetic.GeneratorConfig({2012: 2}, seed=1))
    table = macro.macro_feature_table(synthetic.gen_macro(2010, 2021, 3))
    series, _ = prepare_dataset(recs, macro_table=table)
    ws = make_windows(series, 20, 8)
    assert ws.windows[0].lookback.shape == (20, 10)
    assert ws.features[3:] == macro.MACRO_NAMES


def test_unit_stress_is_identity():
    m = synthetic.gen_macro(2000, 2006, 5)
    sc = StressScenario("unit", (Shock("sp500", 1.0, "2003Q1", 3),))
    out = macro.apply_stress(m, sc)
    assert out["sp500"] == m["sp500"]
    pd.testing.assert_frame_equal(macro.macro_feature_table(out), macro.macro_feature_table(m))


def test_equity_shock_dips_then_reverts():
    m = synthetic.gen_macro(2000, 2006, 6)
    sc = StressScenario("crash", (Shock("sp500", 0.7, "2003Q1", 2),))
    out = macro.apply_stress(m, sc)
    assert m["sp500"].values[0] == out["sp500"].values[0]  # original untouched outside the window
    base = macro.resample_quarterly(m["sp500"])
    shocked = macro.resample_quarterly(out["sp500"])
    # hand-rolled YoY on the shocked quarterly levels
    hand = shocked.to_numpy()[4:] / shocked.to_numpy()[:-4] - 1
    np.testing.assert_allclose(macro.yoy_change(shocked).to_numpy(), hand, rtol=1e-15)
    yoy_b, yoy_s = macro.yoy_change(base), macro.yoy_change(shocked)
    diff = (yoy_s - yoy_b)
    for q in ("2003Q1", "2003Q2"):
        assert diff[pd.Period(q, "Q")] == pytest.approx((1 + yoy_b[pd.Period(q, "Q")]) * 0.7 - 1 - yoy_b[pd.Period(q, "Q")], rel=1e-12)
        assert diff[pd.Period(q, "Q")] < 0
    # a year later the shocked quarters sit in the base: YoY jumps above the unshocked path
    assert diff[pd.Period("2004Q1", "Q")] > 0 and diff[pd.Period("2004Q2", "Q")] > 0
    assert diff[pd.Period("2004Q3", "Q")] == 0 and diff[pd.Period("2002Q4", "Q")] == 0


def test_shock_isolation_and_errors():
    m = synthetic.gen_macro(2000, 2006, 7)
    out = macro.apply_stress(m, StressScenario("g", (Shock("gold", 1.5, "2002Q1", 4),)))
    t0, t1 = macro.macro_feature_table(m), macro.macro_feature_table(out)
    np.testing.assert_array_equal(t0["gdp"].to_numpy(), t1["gdp"].to_numpy())
    assert not np.array_equal(t0["gold"].to_numpy(), t1["gold"].to_numpy())
    with pytest.raises(MacroError, match="unknown series"):
        macro.apply_stress(m, StressScenario("x", (Shock("oil", 1.1, "2002Q1", 1),)))
    with pytest.raises(MacroError):
        Shock("gold", 0.0, "2002Q1", 1)
    with pytest.raises(MacroError):
        Shock("gold", 1.0, "2002Q1", 0)
    with pytest.raises(MacroError):
        Shock("gold", 1.0, "Q3-2002x", 1)


def test_csv_and_scenario_files(tmp_path):
    m = synthetic.gen_macro(2000, 2002, 8)
    for name, s in m.items():
        (tmp_path / f"{name}.csv").write_text(macro.macro_to_csv(s))
    back = macro.load_macro_dir(tmp_path)
    for name in m:
        assert back[name] == m[name]
    fred = tmp_path / "fred.csv"
    fred.write_text("DATE,VALUE\n2020-01-01,1.5\n2020-01-02,.\n2020-01-03,1.7\n")
    s = macro.read_macro_csv(fred, "effective_yield")
    assert s.values == (1.5, 1.7) and s.frequency == "daily"
    sc = StressScenario("s", (Shock("gdp", 0.9, "2008Q3", 2),))
    p = tmp_path / "sc.json"
    import json
    p.write_text(json.dumps(sc.to_dict()))
    assert macro.load_scenario(p) == sc
