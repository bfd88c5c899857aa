import numpy as np
import pytest

from pecashflow import imputation, synthetic
from pecashflow.fund_data import to_normalized, to_quarterly_flows
from pecashflow.synthetic import BuchnerParams, GeneratorConfig
from pecashflow.windowing import make_windows
from pecashflow.yale import YaleParams, calibrate_rc, simulate_quarterly


def test_noiseless_yale_fund_matches_simulator():
    p = YaleParams(0.3, 0.15, 2.2)
    rec = synthetic.gen_yale_fund(p, 40, 0.0, seed=1)
    flows = to_quarterly_flows(to_normalized(rec)).as_matrix()
    np.testing.assert_allclose(flows, simulate_quarterly(p, 40), rtol=0, atol=1e-12)


def test_yale_noise_keeps_identity_and_seed():
    p = YaleParams(0.3, 0.15, 2.2)
    a = synthetic.yale_flow_path(p, 40, 0.3, np.random.default_rng(2))
    b = synthetic.yale_flow_path(p, 40, 0.3, np.random.default_rng(2))
    np.testing.assert_array_equal(a, b)
    prev = np.concatenate([[0.0], a[:-1, 2]])
    assert np.abs(prev * 1.15 ** 0.25 + a[:, 0] - a[:, 1] - a[:, 2]).max() <= 1e-12
    assert not np.allclose(a, simulate_quarterly(p, 40))


def test_dataset_reproducible_and_valid():
    cfg = GeneratorConfig({2010: 5, 2013: 4}, seed=9, length_jitter=3)
    r1, t1 = synthetic.generate_yale_dataset(cfg)
    r2, t2 = synthetic.generate_yale_dataset(cfg)
    assert r1 == r2 and t1 == t2
    assert len({r.fund_id for r in r1}) == 9
    assert max(len(r) for r in r1 if r.vintage_year == 2013) <= 31
    cfg2 = GeneratorConfig.from_dict(cfg.to_dict())
    assert cfg2 == cfg


def test_config_validation():
    with pytest.raises(ValueError):
        GeneratorConfig({2010: 0})
    with pytest.raises(ValueError):
        GeneratorConfig({2010: 1}, param_ranges={"b": (0, 6)})
    with pytest.raises(ValueError):
        GeneratorConfig({2010: 1}, noise_sigma=-0.1)


def test_calibrate_rc_recovers_generated_funds():
    recs, truth = synthetic.generate_yale_dataset(GeneratorConfig({2012: 10}, noise_sigma=0.0, seed=4))
    for rec in recs:
        flows = to_quarterly_flows(to_normalized(rec)).as_matrix()
        assert abs(calibrate_rc(flows[:8, 0]) - truth[rec.fund_id].rc) <= 1e-4


def test_noiseless_funds_are_pipeline_fixed_points():
    recs, truth = synthetic.generate_yale_dataset(GeneratorConfig({2013: 3}, noise_sigma=0.0, seed=6))
    series, _ = imputation.prepare_funds(recs)
    ws = make_windows(series, 20, 8)
    for w in ws.windows:
        sim = simulate_quarterly(truth[w.fund_id], 31)
        np.testing.assert_allclose(w.flows_target, sim[w.window_index + 20:w.window_index + 28], rtol=0, atol=1e-12)
        np.testing.assert_allclose(w.lookback, sim[w.window_index:w.window_index + 20], rtol=0, atol=1e-12)


def test_buchner_deterministic_limit():
    p = BuchnerParams(sigma_delta=0.0, theta=0.4)
    d = synthetic.buchner_rate_paths(p, 20, 1, np.random.default_rng(0))[0]
    np.testing.assert_array_equal(d, 0.4)
    c1 = synthetic.buchner_contribution_path(p, 100.0, 20, seed=1)
    c2 = synthetic.buchner_contribution_path(p, 100.0, 20, seed=2)
    np.testing.assert_array_equal(c1, c2)
    np.testing.assert_allclose(c1[1:] / c1[:-1], 1 - 0.4 * 0.25, rtol=1e-12)


def test_buchner_rate_mean_reverts_to_theta():
    p = BuchnerParams(kappa=3.0, theta=0.4, delta0=0.1)
    d = synthetic.buchner_rate_paths(p, 40, 10_000, np.random.default_rng(3))[:, -1]
    t = 40 * p.dt
    analytic = p.theta + (0.1 - p.theta) * np.exp(-p.kappa * t)
    se = d.std(ddof=1) / np.sqrt(d.size)
    assert abs(d.mean() - analytic) <= 3 * se


def test_buchner_contributions_bounded():
    p = BuchnerParams(sigma_delta=1.5)  # Feller condition violated on purpose
    for seed in range(20):
        c = synthetic.buchner_contribution_path(p, 50.0, 60, seed)
        assert (c >= 0).all() and c.sum() <= 50.0 + 1e-9


def test_buchner_distribution_oracle():
    p = BuchnerParams(sigma_p=0.0, m=1.6)
    total = synthetic.buchner_distribution_path(p, 100.0, 160, seed=0).sum()
    assert total == pytest.approx(160.0, rel=0.05)
    doubled = synthetic.buchner_distribution_path(BuchnerParams(sigma_p=0.0, m=3.2), 100.0, 160, seed=0).sum()
    assert doubled / total == pytest.approx(2.0, rel=0.05)
    noisy = synthetic.buchner_distribution_path(BuchnerParams(), 100.0, 80, seed=4)
    assert (noisy >= 0).all()


def test_buchner_dataset_valid():
    recs = synthetic.generate_buchner_dataset(GeneratorConfig({2011: 4}, seed=2))
    series, _ = imputation.prepare_funds(recs)
    assert len(series) == 4
    assert recs == synthetic.generate_buchner_dataset(GeneratorConfig({2011: 4}, seed=2))


def test_inject_missing():
    recs, _ = synthetic.generate_yale_dataset(GeneratorConfig({2000: 40, 2001: 40}, seed=1))
    same, masks = synthetic.inject_missing(recs, 0.0, seed=1)
    assert same == recs and not any(m.any() for m in masks.values())
    dropped, masks = synthetic.inject_missing(recs, 0.3, seed=1)
    cells = sum((m.shape[0] - 2) * 3 for m in masks.values())
    assert cells >= 1e4
    frac = sum(m.sum() for m in masks.values()) / cells
    assert abs(frac - 0.3) <= 0.01
    for rec, m in zip(dropped, masks.values()):
        assert not m[0].any() and not m[-1].any()
        assert [q.called_pct is None for q in rec.quarters] == m[:, 0].tolist()
    assert synthetic.inject_missing(recs, 0.3, seed=1)[0] == dropped
    with pytest.raises(ValueError):
        synthetic.inject_missing(recs, 1.0, seed=1)


def test_inject_missing_fraction_large_sample():
    recs, _ = synthetic.generate_yale_dataset(GeneratorConfig({1990: 300}, seed=2))
    _, masks = synthetic.inject_missing(recs, 0.3, seed=5)
    cells = sum((m.shape[0] - 2) * 3 for m in masks.values())
    assert cells >= 1e5
    assert abs(sum(m.sum() for m in masks.values()) / cells - 0.3) <= 0.01


def test_gen_macro_shapes():
    m = synthetic.gen_macro(2000, 2001, 0)
    assert len(m["gdp"].dates) == 8 and len(m["cpi"].dates) == 24
    assert m["sp500"].frequency == "daily" and all(v > 0 for v in m["gold"].values)
    assert synthetic.gen_macro(2000, 2001, 0) == m
