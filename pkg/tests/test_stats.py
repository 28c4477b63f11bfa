import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from radstab.errors import (
    AllZeroDifferences,
    ConstantDifferences,
    ConstantInput,
    TooFewSamples,
)
from radstab.radiomics.extract import FeatureMatrix
from radstab.stats import (
    bh_fdr,
    friedman,
    friedman_chi2_p,
    icc,
    manova_two_group,
    paired_t,
    shapiro_wilk,
    spearman,
    stability_report,
    wilcoxon_signed_rank,
)


# ------------------------------------------------------------ Shapiro-Wilk

def test_shapiro_against_reference(rng):
    for n in (3, 5, 8, 12, 25, 50, 200):
        x = rng.normal(size=n)
        w, p = shapiro_wilk(x)
        w_ref, p_ref = sps.shapiro(x)
        assert abs(w - w_ref) < 1e-4
        assert abs(p - p_ref) < 1e-4


def test_shapiro_skewed_rejects(rng):
    x = rng.exponential(size=100) ** 2
    _, p = shapiro_wilk(x)
    assert p < 0.01


def test_shapiro_errors():
    with pytest.raises(TooFewSamples):
        shapiro_wilk([1.0, 2.0])
    with pytest.raises(ConstantInput):
        shapiro_wilk([3.0, 3.0, 3.0, 3.0])


# ---------------------------------------------------------------- Spearman

def test_spearman_fixture():
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8,
                                                                 abs=1e-12)


def test_spearman_linear():
    x = np.arange(10.0)
    assert spearman(x, 2 * x + 1) == pytest.approx(1.0)


def test_spearman_constant_raises():
    with pytest.raises(ConstantInput):
        spearman([1, 1, 1], [1, 2, 3])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(4, 30))
def test_spearman_monotone_invariance(seed, n):
    r = np.random.default_rng(seed)
    x = r.normal(size=n)
    if len(np.unique(x)) < 2:
        return
    fx = np.exp(x) + 3 * x  # strictly increasing map
    assert spearman(x, fx) == pytest.approx(1.0, abs=1e-12)


def test_spearman_matches_scipy(rng):
    for _ in range(50):
        x = rng.integers(0, 5, size=12).astype(float)  # with ties
        y = rng.normal(size=12)
        if len(np.unique(x)) < 2 or len(np.unique(y)) < 2:
            continue
        assert spearman(x, y) == pytest.approx(
            sps.spearmanr(x, y).statistic, abs=1e-12)


# --------------------------------------------------------------------- ICC

def test_icc_fixture():
    assert icc([1, 2, 3], [2, 3, 4]) == pytest.approx(2 / 3, abs=1e-12)


def test_icc_identical():
    assert icc([1, 2, 3, 4], [1, 2, 3, 4]) == 1.0


def test_icc_symmetric(rng):
    for _ in range(20):
        a = rng.normal(size=8)
        b = rng.normal(size=8)
        assert icc(a, b) == pytest.approx(icc(b, a), abs=1e-12)


def test_icc_all_equal():
    assert icc([5, 5, 5], [5, 5, 5]) == 1.0


# ---------------------------------------------------------------- Wilcoxon

def test_wilcoxon_fixture():
    x = np.array([1.0, -2.0, 3.0, -4.0, 5.0])
    w, p = wilcoxon_signed_rank(x, np.zeros(5))
    assert w == 6.0
    assert p == pytest.approx(sps.wilcoxon(x, mode="exact").pvalue,
                              abs=1e-12)


def test_wilcoxon_all_zero():
    with pytest.raises(AllZeroDifferences):
        wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0])


def _brute_force_p(d):
    """Exact two-sided p by enumerating all 2^n sign assignments of the
    observed absolute ranks."""
    d = np.asarray(d, float)
    d = d[d != 0]
    n = len(d)
    ranks = sps.rankdata(np.abs(d))
    w_plus = ranks[d > 0].sum()
    w_minus = ranks[d < 0].sum()
    w_obs = min(w_plus, w_minus)
    total = ranks.sum()
    count = 0
    for signs in itertools.product([0, 1], repeat=n):
        wp = sum(r for r, s in zip(ranks, signs) if s)
        if wp <= w_obs or (total - wp) <= w_obs:
            count += 1
    return count / 2 ** n


def test_wilcoxon_exact_matches_enumeration(rng):
    for _ in range(40):
        n = int(rng.integers(4, 13))
        d = rng.integers(-6, 7, size=n).astype(float)
        if np.all(d == 0):
            continue
        w, p = wilcoxon_signed_rank(d, np.zeros(n))
        assert abs(p - _brute_force_p(d)) < 1e-12


def test_wilcoxon_large_n_normal_approx(rng):
    d = rng.normal(0.3, 1.0, size=60)
    _, p = wilcoxon_signed_rank(d, np.zeros(60))
    ref = sps.wilcoxon(d, mode="approx", correction=True).pvalue
    assert p == pytest.approx(ref, abs=1e-9)


# ---------------------------------------------------------------- paired t

def test_paired_t_fixture():
    t, p = paired_t([2.0, 4.0, 6.0], [0.0, 0.0, 0.0])
    assert t == pytest.approx(2 * math.sqrt(3), abs=1e-12)
    assert p == pytest.approx(float(sps.ttest_rel([2, 4, 6],
                                                  [0, 0, 0]).pvalue),
                              abs=1e-12)


def test_paired_t_zero_mean():
    t, p = paired_t([1.0, -1.0, 1.0, -1.0], [0.0, 0.0, 0.0, 0.0])
    assert t == 0.0
    assert p == pytest.approx(1.0)


def test_paired_t_constant_differences():
    with pytest.raises(ConstantDifferences):
        paired_t([1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 0.0, 0.0])


# ------------------------------------------------------------------ BH-FDR

def test_bh_fixtures():
    assert bh_fdr([0.01, 0.02, 0.03, 0.04], q=0.05).tolist() == [True] * 4
    assert bh_fdr([0.03, 0.2, 0.4], q=0.05).tolist() == [False] * 3
    assert bh_fdr([1.0, 1.0, 1.0], q=0.05).tolist() == [False] * 3


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30),
       st.floats(0.001, 0.2), st.floats(0.0, 0.3))
def test_bh_monotone_in_q(pvals, q1, dq):
    r1 = bh_fdr(pvals, q=q1)
    r2 = bh_fdr(pvals, q=q1 + dq)
    assert np.all(r2 | ~r1)  # r1 subset of r2


def test_bh_matches_reference(rng):
    from scipy.stats import false_discovery_control
    for _ in range(20):
        p = rng.uniform(size=15)
        got = bh_fdr(p, q=0.05)
        adj = false_discovery_control(p, method="bh")
        np.testing.assert_array_equal(got, adj <= 0.05)


# ------------------------------------------------------------------ MANOVA

def _fm(values, prefix):
    values = np.asarray(values, float)
    return FeatureMatrix(
        case_ids=[f"{prefix}{i}" for i in range(len(values))],
        feature_ids=[f"f{j}" for j in range(values.shape[1])],
        values=values)


def test_manova_identical_groups(rng):
    A = rng.normal(size=(12, 4))
    res = manova_two_group(_fm(A, "a"), _fm(A, "b"))
    assert res["wilks"] == pytest.approx(1.0, abs=1e-9)
    assert res["pillai"] == pytest.approx(0.0, abs=1e-9)
    assert res["hotelling_lawley"] == pytest.approx(0.0, abs=1e-9)
    assert res["roy"] == pytest.approx(0.0, abs=1e-9)
    assert res["decision"] == "Not rejected"


def test_manova_rank1_identities(rng):
    """Two groups always give rank-1 H, so the trace identities hold."""
    for _ in range(10):
        A = rng.normal(size=(15, 6))
        B = rng.normal(size=(13, 6)) + rng.normal(size=6)
        res = manova_two_group(_fm(A, "a"), _fm(B, "b"))
        h = res["hotelling_lawley"]
        assert res["wilks"] * (1 + h) == pytest.approx(1.0, abs=1e-9)
        assert res["pillai"] == pytest.approx(h / (1 + h), abs=1e-9)
        assert res["roy"] == pytest.approx(h, abs=1e-9)


def test_manova_separated_groups_rejected(rng):
    A = rng.normal(size=(20, 5))
    B = rng.normal(size=(20, 5)) + 5.0
    res = manova_two_group(_fm(A, "a"), _fm(B, "b"))
    assert res["decision"] == "Rejected"
    assert res["p"] < 1e-6


# ---------------------------------------------------------------- Friedman

def test_friedman_identical():
    chi2, p = friedman(np.ones((4, 5)))
    assert chi2 == 0.0 and p == 1.0


def test_friedman_agreeing_ranks():
    ratings = np.array([[1, 2, 3]] * 3, dtype=float)
    chi2, p = friedman(ratings)
    assert chi2 == pytest.approx(6.0)


def test_friedman_matches_scipy_chi2(rng):
    for _ in range(10):
        mat = rng.normal(size=(8, 4))
        chi2, _ = friedman(mat, exact=False)
        ref = sps.friedmanchisquare(*mat.T).statistic
        assert chi2 == pytest.approx(ref, abs=1e-9)


def test_friedman_exact_close_to_chi2_at_table_scale(rng):
    """n=6 raters, k=5 models: exact permutation p within 0.05 of the
    chi-square approximation."""
    mat = rng.integers(1, 6, size=(6, 5)).astype(float)
    chi2, p_exact = friedman(mat, exact=True)
    p_chi2 = friedman_chi2_p(chi2, 5)
    assert abs(p_exact - p_chi2) < 0.05


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_friedman_monotone_transform_invariance(seed):
    r = np.random.default_rng(seed)
    mat = r.normal(size=(5, 4))
    chi2_a, p_a = friedman(mat)
    chi2_b, p_b = friedman(np.exp(mat) + 2 * mat)  # strictly increasing
    assert chi2_a == pytest.approx(chi2_b, abs=1e-9)
    assert p_a == pytest.approx(p_b, abs=1e-9)


def test_friedman_exact_matches_enumeration():
    """Small case where full k!^n enumeration is feasible by hand code."""
    mat = np.array([[1.0, 2.0, 3.0], [2.0, 1.0, 3.0], [1.0, 3.0, 2.0]])
    chi2_obs, p = friedman(mat, exact=True)
    perms = list(itertools.permutations([1.0, 2.0, 3.0]))
    count = total = 0
    for rows in itertools.product(perms, repeat=3):
        stat, _ = friedman(np.array(rows), exact=False)
        total += 1
        if stat >= chi2_obs - 1e-12:
            count += 1
    assert p == pytest.approx(count / total, abs=1e-12)


# --------------------------------------------------------- stability report

def _random_features(rng, n_cases=10, n_feats=12, prefix="c"):
    return FeatureMatrix(
        case_ids=[f"{prefix}{i}" for i in range(n_cases)],
        feature_ids=[f"f{j}" for j in range(n_feats)],
        values=rng.normal(size=(n_cases, n_feats)))


def test_stability_identity(rng):
    gt = _random_features(rng)
    rep = stability_report(gt, gt, model_name="self")
    assert rep.mean_spearman == 1.0
    assert rep.mean_icc == 1.0
    assert rep.ttest_significant_count == 0
    assert rep.manova["wilks"] == pytest.approx(1.0, abs=1e-9)


def test_stability_counts_partition(rng):
    gt = _random_features(rng)
    model = FeatureMatrix(case_ids=list(gt.case_ids),
                          feature_ids=list(gt.feature_ids),
                          values=gt.values + rng.normal(0, 0.1,
                                                        gt.values.shape))
    rep = stability_report(gt, model, model_name="m")
    assert rep.shapiro_normal_count + rep.shapiro_not_normal_count \
        == rep.total_features
    assert 0 <= rep.ttest_significant_count <= rep.total_features


def test_stability_row_columns(rng):
    from radstab.stats import STABILITY_CSV_COLUMNS
    gt = _random_features(rng)
    rep = stability_report(gt, gt, model_name="m")
    row = rep.to_row(config_hash="abc", registry_version="1.0")
    assert tuple(row.keys()) == STABILITY_CSV_COLUMNS


def test_stability_too_few_cases(rng):
    gt = _random_features(rng, n_cases=2)
    with pytest.raises(TooFewSamples):
        stability_report(gt, gt, model_name="m")
