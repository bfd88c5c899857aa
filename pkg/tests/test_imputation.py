import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pecashflow import imputation, synthetic
from pecashflow.dataio import reports_to_jsonl
from pecashflow.fund_data import FundDataError, FundSeries, QuarterlyFlows, to_normalized
from conftest import make_record


def natural_spline_oracle(xk, yk, xq):
    """Natural cubic spline by direct assembly of the second-derivative system."""
    xk, yk = np.asarray(xk, float), np.asarray(yk, float)
    n = len(xk)
    h = np.diff(xk)
    a = np.zeros((n, n))
    r = np.zeros(n)
    a[0, 0] = a[-1, -1] = 1.0
    for i in range(1, n - 1):
        a[i, i - 1] = h[i - 1]
        a[i, i] = 2 * (h[i - 1] + h[i])
        a[i, i + 1] = h[i]
        r[i] = 6 * ((yk[i + 1] - yk[i]) / h[i] - (yk[i] - yk[i - 1]) / h[i - 1])
    m = np.linalg.solve(a, r)
    out = []
    for x in xq:
        i = min(max(np.searchsorted(xk, x) - 1, 0), n - 2)
        t0, t1 = xk[i + 1] - x, x - xk[i]
        out.append(m[i] * t0 ** 3 / (6 * h[i]) + m[i + 1] * t1 ** 3 / (6 * h[i])
                   + (yk[i] / h[i] - m[i] * h[i] / 6) * t0 + (yk[i + 1] / h[i] - m[i + 1] * h[i] / 6) * t1)
    return np.array(out)


def test_missing_fraction_examples():
    assert imputation.missing_fraction([1] * 7 + [None] * 3) == pytest.approx(0.3)
    assert imputation.missing_fraction([1, 2]) == 0.0
    assert imputation.missing_fraction([None, None]) == 1.0
    with pytest.raises(FundDataError):
        imputation.missing_fraction([])


def test_filter_boundary_is_inclusive():
    n = 100
    called = [float(i) for i in range(n)]
    dropped = [None if i in range(1, 31) else 1.0 for i in range(n)]
    rec = make_record(dropped, [0.0] * n, [100.0] * n, fund_id="A")
    kept_rec = make_record(called, [None if i in range(1, 30) else 0.0 for i in range(n)],
                           [None if i in range(1, 30) else 100.0 for i in range(n)], fund_id="B")
    kept, reports = imputation.filter_funds([rec, kept_rec])
    assert [r.removed for r in reports] == [True, False]
    assert reports[0].missing_fractions == (0.3, 0.0, 0.0)
    assert [k.fund_id for k in kept] == ["B"]


def test_filter_monotone_in_threshold():
    cfg = synthetic.GeneratorConfig({2010: 40}, seed=3)
    recs, _ = synthetic.generate_yale_dataset(cfg)
    recs, _ = synthetic.inject_missing(recs, 0.28, seed=4)
    kept = [len(imputation.filter_funds(recs, t)[0]) for t in (0.2, 0.25, 0.3, 0.35, 0.5)]
    assert kept == sorted(kept)


def test_interpolate_examples():
    np.testing.assert_array_equal(imputation.cubic_interpolate([1, None, 3]), [1, 2, 3])
    with pytest.raises(FundDataError):
        imputation.cubic_interpolate([None, None])
    with pytest.raises(FundDataError):
        imputation.cubic_interpolate([None, 1.0, None])


def test_leading_and_trailing_gaps():
    out = imputation.cubic_interpolate([None, None, 1.0, 2.0, None])
    np.testing.assert_array_equal(out, [0.0, 0.0, 1.0, 2.0, 2.0])


def test_spline_matches_tridiagonal_oracle():
    t = np.arange(40)
    cc = 100 * (1 - 0.93 ** (t + 1))
    rng = np.random.default_rng(2)
    hole = np.sort(rng.choice(np.arange(1, 39), 8, replace=False))
    series = [None if i in hole else v for i, v in enumerate(cc)]
    out = imputation.cubic_interpolate(series)
    keep = np.setdiff1d(t, hole)
    oracle = natural_spline_oracle(keep, cc[keep], hole)
    np.testing.assert_allclose(out[hole], oracle, rtol=0, atol=1e-9)
    err_ours = np.abs(out[hole] - cc[hole]).max()
    err_oracle = np.abs(oracle - cc[hole]).max()
    assert err_ours <= err_oracle + 1e-9


@settings(max_examples=80, deadline=None)
@given(st.lists(st.one_of(st.none(), st.floats(0, 500)), min_size=2, max_size=30))
def test_knots_reproduced_exactly(values):
    values[0] = 1.0 if values[0] is None else values[0]
    values[-1] = 2.0 if values[-1] is None else values[-1]
    out = imputation.cubic_interpolate(values)
    for v, o in zip(values, out):
        if v is not None:
            assert o == v
    assert (out >= 0).all()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 500), min_size=2, max_size=30))
def test_fully_observed_is_identity(values):
    np.testing.assert_array_equal(imputation.cubic_interpolate(values), values)


def test_imputed_pipeline_is_monotone():
    cfg = synthetic.GeneratorConfig({2008: 30}, noise_sigma=0.3, seed=11)
    recs, _ = synthetic.generate_yale_dataset(cfg)
    recs, _ = synthetic.inject_missing(recs, 0.2, seed=1)
    series, reports = imputation.prepare_funds(recs, threshold=1.0)
    assert len(series) == 30
    for s in series:
        assert (s.flows.qcc >= 0).all() and (s.flows.qdc >= 0).all() and (s.flows.rvc >= 0).all()
    assert any(r.filled_indices for r in reports)


def test_report_jsonl_format():
    rec = make_record([1, None, 3], [0, 0, 0], [100, 100, 100], fund_id="Z")
    _, reports = imputation.prepare_funds([rec], threshold=0.5)
    row = json.loads(reports_to_jsonl(reports))
    assert row == {"fund_id": "Z", "missing_fractions": [1 / 3, 0.0, 0.0], "removed": False, "filled_indices": [1]}


def _series(fid, n, vintage=2010, rvc_last=0.4):
    rvc = np.linspace(0.1, rvc_last, n)
    return FundSeries(fid, vintage, 1e6, QuarterlyFlows(np.full(n, 0.01), np.full(n, 0.005), rvc))


def test_padding_rules():
    a, b = _series("A", 31), _series("B", 29, rvc_last=0.0)
    padded = imputation.pad_to_vintage_length([a, b])
    assert [len(f) for f in padded] == [31, 31]
    pb = padded[1]
    assert not pb.mask[29:].any() and pb.mask[:29].all()
    np.testing.assert_array_equal(pb.flows.as_matrix()[29:], 0.0)
    assert padded[0] is a
    again = imputation.pad_to_vintage_length(padded)
    for x, y in zip(again, padded):
        np.testing.assert_array_equal(x.flows.as_matrix(), y.flows.as_matrix())
        np.testing.assert_array_equal(x.mask, y.mask)


def test_padding_carries_nav():
    padded = imputation.pad_to_vintage_length([_series("A", 10), _series("B", 7, rvc_last=0.3)])
    np.testing.assert_array_equal(padded[1].flows.rvc[7:], 0.3)
    np.testing.assert_array_equal(padded[1].flows.qcc[7:], 0.0)
