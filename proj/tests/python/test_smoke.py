import math

import numpy as np
import pytest
from scipy import stats

import spidereval as se


def test_metrics_hand_example():
    assert se.mae([0, 0], [3, 4]) == pytest.approx(3.5)
    assert se.rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5))
    assert se.r2([1, 2, 3], [1, 2, 3]) == 1.0


def test_kruskal_against_scipy():
    rng = np.random.default_rng(3)
    groups = [rng.integers(0, 6, size=n).astype(float).tolist() for n in (7, 9, 5)]
    h, p = se.kruskal_wallis(groups)
    ref = stats.kruskal(*groups)
    assert h == pytest.approx(ref.statistic, rel=1e-10)
    assert p == pytest.approx(ref.pvalue, rel=1e-8)
    assert se.kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])[0] == pytest.approx(7.2)


def test_tails_against_scipy():
    for df in (1, 2, 30, 281):
        for x in (0.3, 2.0, 9.5):
            assert se.chi_square_sf(x, df) == pytest.approx(stats.chi2.sf(x, df), rel=1e-9)
            assert se.student_t_sf(x, df) == pytest.approx(stats.t.sf(x, df), rel=1e-9)
    assert se.normal_quantile(0.975) == pytest.approx(stats.norm.ppf(0.975), rel=1e-12)


def test_bh_against_statsmodels():
    multitest = pytest.importorskip("statsmodels.stats.multitest")
    p = [0.01, 0.04, 0.03, 0.2, 0.5, 0.001]
    ref = multitest.multipletests(p, method="fdr_bh")[1]
    assert se.bh_fdr(p) == pytest.approx(list(ref), rel=1e-12)


def test_wilson_and_errors():
    low, high = se.wilson_ci(419, 500)
    assert round(low, 3) == 0.803 and round(high, 3) == 0.868
    with pytest.raises(se.ValidationError):
        se.wilson_ci(5, 4)
    with pytest.raises(se.ComputationError):
        se.paired_one_sided_t([0.0, 0.0, 0.0])
    assert issubclass(se.ValidationError, se.SpiderEvalError)


def test_paired_t_against_scipy():
    d = [0.3, -0.1, 0.8, 0.4, 0.05]
    r = se.paired_one_sided_t(d)
    ref = stats.ttest_1samp(d, 0.0, alternative="greater")
    assert r["t"] == pytest.approx(ref.statistic, rel=1e-12)
    assert r["p"] == pytest.approx(ref.pvalue, rel=1e-9)


def test_ridge_against_numpy():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(50, 4))
    y = x @ np.array([1.0, -2.0, 0.5, 0.0]) + 3 + rng.normal(scale=0.1, size=50)
    w, b = se.fit_ridge(x, y, 0.7)
    a = np.hstack([x, np.ones((50, 1))])
    pen = np.diag([0.7] * 4 + [0.0])
    beta = np.linalg.solve(a.T @ a + pen, a.T @ y)
    assert np.allclose(w, beta[:4], rtol=1e-9, atol=1e-12)
    assert b == pytest.approx(beta[4], rel=1e-9)


def test_icc_perfect_agreement_and_curve():
    m = [[float(i)] * 4 for i in range(6)]
    assert se.icc2k(m) == pytest.approx(1.0)
    n = [50, 75, 100, 150, 200, 250, 313]
    y = [5 * math.exp(-0.02 * v) + 11 for v in n]
    fit = se.fit_learning_curve(n, y, "decay")
    assert fit["a"] == pytest.approx(5, rel=1e-6)
    assert fit["c"] == pytest.approx(11, rel=1e-6)


def test_overlap_and_qc():
    mask = np.zeros((4, 4), dtype=bool)
    mask[1:3, 1:3] = True
    r = se.overlap_stats(mask.astype(float), mask)
    assert r["delta"] == 1.0 and r["mask_fraction"] == 0.25
    records, outliers = se.synth_ratings(n_images=60, n_raters=30, outliers=2, seed=4)
    report = se.run_qc(records)
    assert set(outliers) <= set(report["excluded"])
    assert report["ratings_before"] == len(records)
