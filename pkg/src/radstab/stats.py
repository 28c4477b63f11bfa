"""Statistical battery for radiomics stability.

Per-feature tests (Shapiro-Wilk routing into paired t or Wilcoxon,
Spearman, ICC), BH-FDR across the t-tested family, two-group MANOVA
traces on PCA-reduced matrices, Friedman test for rater panels, and the
assembly of per-model stability reports.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2 as chi2_dist
from scipy.stats import f as f_dist
from scipy.stats import norm
from scipy.stats import t as t_dist

from .errors import (
    AllZeroDifferences,
    ConstantDifferences,
    ConstantInput,
    DegenerateVariance,
    MalformedRatings,
    SingularWithinMatrix,
    TooFewSamples,
)
from .radiomics.extract import FeatureMatrix

ALPHA = 0.05


# --------------------------------------------------------------------------
# Shapiro-Wilk (Royston's AS R94 approximation)

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)


def _polyval(coefs, x):
    return sum(c * x ** i for i, c in enumerate(coefs))


def shapiro_wilk(x) -> tuple[float, float]:
    """W statistic and p-value, n in [3, 5000]."""
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = len(x)
    if n < 3:
        raise TooFewSamples(f"shapiro_wilk needs n >= 3, got {n}")
    if n > 5000:
        raise TooFewSamples("shapiro_wilk supports n <= 5000")
    if x[0] == x[-1]:
        raise ConstantInput("shapiro_wilk is undefined for constant input")

    i = np.arange(1, n + 1)
    m = norm.ppf((i - 0.375) / (n + 0.25))
    ss = float((m ** 2).sum())

    if n == 3:
        a = np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    else:
        u = 1.0 / math.sqrt(n)
        c = m / math.sqrt(ss)
        a_n = c[-1] + _polyval(_C1, u)
        if n > 5:
            a_n1 = c[-2] + _polyval(_C2, u)
            phi = ((ss - 2 * m[-1] ** 2 - 2 * m[-2] ** 2)
                   / (1 - 2 * a_n ** 2 - 2 * a_n1 ** 2))
            a = m / math.sqrt(phi)
            a[-1], a[0] = a_n, -a_n
            a[-2], a[1] = a_n1, -a_n1
        else:
            phi = (ss - 2 * m[-1] ** 2) / (1 - 2 * a_n ** 2)
            a = m / math.sqrt(phi)
            a[-1], a[0] = a_n, -a_n

    w_num = float((a * x).sum()) ** 2
    w_den = float(((x - x.mean()) ** 2).sum())
    w = min(1.0, w_num / w_den)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w))
                               - math.asin(math.sqrt(0.75)))
        return w, float(min(1.0, max(0.0, p)))
    if n <= 11:
        gamma = 0.459 * n - 2.273
        g = -math.log(gamma - math.log1p(-w))
        mu = 0.5440 - 0.39978 * n + 0.025054 * n ** 2 - 0.0006714 * n ** 3
        sigma = math.exp(1.3822 - 0.77857 * n + 0.062767 * n ** 2
                         - 0.0020322 * n ** 3)
        z = (g - mu) / sigma
    else:
        ln1w = math.log1p(-w)
        lnn = math.log(n)
        mu = -1.5861 - 0.31082 * lnn - 0.083751 * lnn ** 2 \
            + 0.0038915 * lnn ** 3
        sigma = math.exp(-0.4803 - 0.082676 * lnn + 0.0030302 * lnn ** 2)
        z = (ln1w - mu) / sigma
    return w, float(norm.sf(z))


# --------------------------------------------------------------------------
# rank helpers, Spearman, ICC

def rankdata_average(x) -> np.ndarray:
    """Average ranks (1-based) with ties."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rho: Pearson correlation of average ranks (tie-safe)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("spearman needs two equal-length samples, n >= 2")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ConstantInput("spearman undefined for constant input")
    rx = rankdata_average(x)
    ry = rankdata_average(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx * ry).sum() / math.sqrt((rx ** 2).sum()
                                             * (ry ** 2).sum()))


def icc(gt, model) -> float:
    """ICC(2,1): two-way random effects, absolute agreement, single rater.

    Returns 1.0 for fully degenerate (all-equal) tables.
    """
    data = np.column_stack([np.asarray(gt, dtype=np.float64),
                            np.asarray(model, dtype=np.float64)])
    n, k = data.shape
    if n < 3:
        raise TooFewSamples("icc needs >= 3 cases")
    gm = data.mean()
    if np.all(data == data.flat[0]):
        return 1.0
    row_means = data.mean(axis=1)
    col_means = data.mean(axis=0)
    ss_rows = k * ((row_means - gm) ** 2).sum()
    ss_cols = n * ((col_means - gm) ** 2).sum()
    ss_total = ((data - gm) ** 2).sum()
    ss_err = ss_total - ss_rows - ss_cols
    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = max(0.0, ss_err) / ((n - 1) * (k - 1))
    denom = msr + (k - 1) * mse + k * (msc - mse) / n
    if denom == 0:
        raise DegenerateVariance("icc denominator is zero")
    return float((msr - mse) / denom)


# --------------------------------------------------------------------------
# Wilcoxon signed-rank and paired t

def _wilcoxon_exact_p(ranks_doubled: np.ndarray, w_min_doubled: int) -> float:
    """Two-sided exact p over all 2^n sign assignments via DP on doubled
    (integer) rank sums."""
    total = int(ranks_doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in ranks_doubled:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:len(counts) - r]
        counts = counts + shifted
    counts /= counts.sum()
    lo = counts[:w_min_doubled + 1].sum()           # P(W+ <= w)
    hi = counts[total - w_min_doubled:].sum()       # P(W+ >= T - w)
    return float(min(1.0, lo + hi))


def wilcoxon_signed_rank(x, y) -> tuple[float, float]:
    """W = min(W+, W-) with zeros dropped and average ranks.

    Exact enumeration p for effective n <= 20, tie-corrected normal
    approximation with continuity correction otherwise.
    """
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        raise AllZeroDifferences("wilcoxon requires a nonzero difference")
    ranks = rankdata_average(np.abs(d))
    w_pos = float(ranks[d > 0].sum())
    w_neg = float(ranks[d < 0].sum())
    w = min(w_pos, w_neg)

    if n <= 20:
        doubled = np.round(ranks * 2).astype(np.int64)
        p = _wilcoxon_exact_p(doubled, int(round(2 * w)))
        return w, p

    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    tie_term = float(((tie_counts ** 3 - tie_counts)).sum()) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    z = (w - mean + 0.5) / math.sqrt(var)
    return w, float(min(1.0, 2.0 * norm.cdf(z)))


def wilcoxon_z(x, y) -> float:
    """Standardized Wilcoxon statistic (no continuity correction)."""
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        raise AllZeroDifferences("wilcoxon requires a nonzero difference")
    ranks = rankdata_average(np.abs(d))
    w_pos = float(ranks[d > 0].sum())
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    tie_term = float(((tie_counts ** 3 - tie_counts)).sum()) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if var == 0:
        return 0.0
    return (w_pos - mean) / math.sqrt(var)


def paired_t(x, y) -> tuple[float, float]:
    """Two-sided paired t-test on the differences."""
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    n = len(d)
    if n < 2:
        raise TooFewSamples("paired_t needs n >= 2")
    if np.all(d == d[0]):
        raise ConstantDifferences("paired differences are constant")
    sd = d.std(ddof=1)
    t = float(d.mean() / (sd / math.sqrt(n)))
    p = float(2.0 * t_dist.sf(abs(t), n - 1))
    return t, p


def bh_fdr(pvals, q: float = 0.05) -> np.ndarray:
    """Benjamini-Hochberg step-up rejection flags."""
    p = np.asarray(pvals, dtype=np.float64)
    if p.size == 0:
        return np.zeros(0, dtype=bool)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    thresholds = q * (np.arange(1, m + 1)) / m
    passed = np.flatnonzero(p[order] <= thresholds)
    reject = np.zeros(m, dtype=bool)
    if passed.size:
        reject[order[:passed[-1] + 1]] = True
    return reject


# --------------------------------------------------------------------------
# MANOVA

def _pca_project(pooled: np.ndarray, k: int):
    centered = pooled - pooled.mean(axis=0)
    cov = centered.T @ centered / max(1, len(pooled) - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:k]
    # drop zero-variance directions: keeping them makes E singular
    tol = max(vals.max(initial=0.0), 0.0) * 1e-10
    order = [i for i in order if vals[i] > tol] or [int(np.argmax(vals))]
    comps = vecs[:, order]
    # deterministic sign: largest-|.| loading positive
    for c in range(comps.shape[1]):
        j = int(np.argmax(np.abs(comps[:, c])))
        if comps[j, c] < 0:
            comps[:, c] = -comps[:, c]
    return comps


def manova_two_group(a, b, reduce_to: int = 10) -> dict:
    """Wilks/Pillai/Hotelling-Lawley/Roy from eigenvalues of E^-1 H after
    pooled-PCA reduction; Rao's F approximation for the Wilks p-value."""
    A = a.values if isinstance(a, FeatureMatrix) else np.asarray(a, float)
    B = b.values if isinstance(b, FeatureMatrix) else np.asarray(b, float)
    n1, n2 = len(A), len(B)
    n = n1 + n2
    k = min(reduce_to, A.shape[1], n - 3)
    if k < 1:
        raise ValueError("not enough cases for MANOVA reduction")
    comps = _pca_project(np.vstack([A, B]), k)
    k = comps.shape[1]
    Ar = A @ comps
    Br = B @ comps

    gm = np.vstack([Ar, Br]).mean(axis=0)
    H = np.zeros((k, k))
    E = np.zeros((k, k))
    for grp in (Ar, Br):
        mg = grp.mean(axis=0)
        dg = (mg - gm)[:, None]
        H += len(grp) * (dg @ dg.T)
        cg = grp - mg
        E += cg.T @ cg

    if np.linalg.matrix_rank(E) < k:
        raise SingularWithinMatrix("within-group SSCP is singular")
    lam = np.linalg.eigvals(np.linalg.solve(E, H))
    lam = np.clip(lam.real, 0.0, None)

    wilks = float(np.prod(1.0 / (1.0 + lam)))
    pillai = float((lam / (1.0 + lam)).sum())
    hotelling = float(lam.sum())
    roy = float(lam.max())

    # Rao's F approximation (g = 2 groups)
    g = 2
    p_dim = k
    m = n - 1 - (p_dim + g) / 2.0
    denom = p_dim ** 2 + (g - 1) ** 2 - 5
    s = math.sqrt((p_dim ** 2 * (g - 1) ** 2 - 4) / denom) if denom > 0 else 1.0
    df1 = p_dim * (g - 1)
    df2 = m * s - df1 / 2.0 + 1.0
    lam_s = wilks ** (1.0 / s)
    if lam_s <= 0:
        f_approx = float("inf")
        p = 0.0
    else:
        f_approx = (1.0 - lam_s) / lam_s * df2 / df1
        p = float(f_dist.sf(f_approx, df1, df2))
    return {"wilks": wilks, "pillai": pillai, "hotelling_lawley": hotelling,
            "roy": roy, "f_approx": float(f_approx), "p": p,
            "decision": "Rejected" if p < ALPHA else "Not rejected",
            "reduced_dim": k}


# --------------------------------------------------------------------------
# Friedman

def _friedman_stat(col_rank_sums: np.ndarray, n: int, k: int,
                   tie_correction: float) -> float:
    chi2 = (12.0 / (n * k * (k + 1))) * float((col_rank_sums ** 2).sum()) \
        - 3.0 * n * (k + 1)
    if tie_correction == 0:
        return 0.0
    return chi2 / tie_correction


def _friedman_exact_p(rank_rows: list[np.ndarray], observed: float,
                      n: int, k: int, tie_correction: float) -> float:
    """Exact permutation p by DP over sorted column-sum states.

    Valid because the sum distribution is exchangeable over columns and
    the statistic is symmetric in the columns.
    """
    states: dict[tuple, float] = {tuple([0.0] * k): 1.0}
    for row in rank_rows:
        perms = set(itertools.permutations(row.tolist()))
        w = 1.0 / len(perms)
        # distinct permutations are equally likely under the null
        nxt: dict[tuple, float] = {}
        for state, prob in states.items():
            sv = np.array(state)
            for perm in perms:
                key = tuple(sorted(sv + np.array(perm)))
                nxt[key] = nxt.get(key, 0.0) + prob * w
        states = nxt
    p = 0.0
    for state, prob in states.items():
        stat = _friedman_stat(np.array(state), n, k, tie_correction)
        if stat >= observed - 1e-9:
            p += prob
    return min(1.0, p)


def friedman(ratings, exact: bool | None = None) -> tuple[float, float]:
    """Tie-corrected Friedman test over a raters x treatments matrix.

    Exact permutation p when n * k! <= 1e6 (and k <= 6); chi-square
    approximation with k-1 df otherwise. Fully tied input returns (0, 1).
    """
    m = np.asarray(ratings, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise MalformedRatings("need >= 2 raters and >= 2 treatments")
    n, k = m.shape
    rank_rows = [rankdata_average(row) for row in m]
    ranks = np.vstack(rank_rows)

    tie_sum = 0.0
    for row in m:
        _, counts = np.unique(row, return_counts=True)
        tie_sum += float((counts ** 3 - counts).sum())
    tie_correction = 1.0 - tie_sum / (n * k * (k ** 2 - 1))
    if tie_correction <= 0:
        return 0.0, 1.0  # every rater fully tied

    col_sums = ranks.sum(axis=0)
    chi2 = _friedman_stat(col_sums, n, k, tie_correction)

    if exact is None:
        exact = n * math.factorial(k) <= 1e6 and k <= 6
    if exact:
        p = _friedman_exact_p(rank_rows, chi2, n, k, tie_correction)
    else:
        p = float(chi2_dist.sf(chi2, k - 1))
    return float(chi2), p


def friedman_chi2_p(chi2: float, k: int) -> float:
    return float(chi2_dist.sf(chi2, k - 1))


# --------------------------------------------------------------------------
# stability report

STABILITY_CSV_COLUMNS = (
    "model", "shapiro_normal", "shapiro_not_normal", "spearman", "icc",
    "wilcoxon_mean_w", "wilcoxon_mean_abs_z", "wilks", "pillai",
    "hotelling_lawley", "roy", "decision", "significant", "total_features",
    "config_hash", "registry_version",
)


@dataclass
class PairedFeatureSample:
    feature_id: str
    gt_values: np.ndarray
    model_values: np.ndarray


@dataclass
class StabilityReport:
    model_name: str
    n_cases: int
    total_features: int
    shapiro_normal_count: int          # model-mask raw feature values
    shapiro_not_normal_count: int
    gt_shapiro_normal_count: int
    gt_shapiro_not_normal_count: int
    diff_shapiro_normal_count: int     # routing counts (paired differences)
    diff_shapiro_not_normal_count: int
    mean_spearman: float
    mean_icc: float
    wilcoxon_summary: dict
    manova: dict
    ttest_significant_count: int
    flags: dict = field(default_factory=dict)

    def to_row(self, config_hash: str = "", registry_version: str = "") -> dict:
        return {
            "model": self.model_name,
            "shapiro_normal": self.shapiro_normal_count,
            "shapiro_not_normal": self.shapiro_not_normal_count,
            "spearman": self.mean_spearman,
            "icc": self.mean_icc,
            "wilcoxon_mean_w": self.wilcoxon_summary.get("mean_w", 0.0),
            "wilcoxon_mean_abs_z": self.wilcoxon_summary.get("mean_abs_z", 0.0),
            "wilks": self.manova["wilks"],
            "pillai": self.manova["pillai"],
            "hotelling_lawley": self.manova["hotelling_lawley"],
            "roy": self.manova["roy"],
            "decision": self.manova["decision"],
            "significant": self.ttest_significant_count,
            "total_features": self.total_features,
            "config_hash": config_hash,
            "registry_version": registry_version,
        }


def _shapiro_normal(values: np.ndarray) -> bool:
    """Normal/not-normal split; constant columns count as not normal."""
    try:
        _, p = shapiro_wilk(values)
    except ConstantInput:
        return False
    return p > ALPHA


def stability_report(gt: FeatureMatrix, model: FeatureMatrix,
                     model_name: str, q: float = ALPHA,
                     manova_reduce_to: int = 10) -> StabilityReport:
    """Full per-model battery comparing model-mask features to GT features.

    Cases are aligned by id. Per feature, Shapiro-Wilk on the paired
    differences routes to the paired t-test (normal) or Wilcoxon (not
    normal); BH-FDR is applied to the t-test family. The mean Spearman
    and ICC skip features that are degenerate (constant) on either side.
    """
    common = [c for c in gt.case_ids if c in set(model.case_ids)]
    if len(common) < 3:
        raise TooFewSamples("stability_report needs >= 3 aligned cases")
    G = gt.subset_cases(common)
    M = model.subset_cases(common)
    if G.feature_ids != M.feature_ids:
        raise ValueError("feature registries differ between matrices")

    feature_ids = G.feature_ids
    spearmen, iccs = [], []
    t_pvals: list[float] = []
    wilcoxon_ws, wilcoxon_zs = [], []
    normal_model = normal_gt = 0
    diff_normal = diff_not_normal = 0
    flags: dict[str, list[str]] = {}

    for j, fid in enumerate(feature_ids):
        g = G.values[:, j]
        m = M.values[:, j]

        if _shapiro_normal(m):
            normal_model += 1
        if _shapiro_normal(g):
            normal_gt += 1

        try:
            spearmen.append(spearman(g, m))
        except ConstantInput:
            flags.setdefault(fid, []).append("spearman_constant")
        try:
            iccs.append(icc(g, m))
        except (DegenerateVariance, TooFewSamples):
            flags.setdefault(fid, []).append("icc_degenerate")

        d = m - g
        if np.all(d == 0):
            continue  # identical -> no difference test, not significant
        if np.all(d == d[0]):
            flags.setdefault(fid, []).append("constant_nonzero_diff")
            continue
        if _route_normal(d):
            diff_normal += 1
            try:
                _, p = paired_t(m, g)
                t_pvals.append(p)
            except ConstantDifferences:
                pass
        else:
            diff_not_normal += 1
            try:
                w, _ = wilcoxon_signed_rank(m, g)
                wilcoxon_ws.append(w)
                wilcoxon_zs.append(abs(wilcoxon_z(m, g)))
            except AllZeroDifferences:
                pass

    rejected = bh_fdr(t_pvals, q=q)
    manova = manova_two_group(G, M, reduce_to=manova_reduce_to)

    return StabilityReport(
        model_name=model_name,
        n_cases=len(common),
        total_features=len(feature_ids),
        shapiro_normal_count=normal_model,
        shapiro_not_normal_count=len(feature_ids) - normal_model,
        gt_shapiro_normal_count=normal_gt,
        gt_shapiro_not_normal_count=len(feature_ids) - normal_gt,
        diff_shapiro_normal_count=diff_normal,
        diff_shapiro_not_normal_count=diff_not_normal,
        mean_spearman=float(np.mean(spearmen)) if spearmen else 1.0,
        mean_icc=float(np.mean(iccs)) if iccs else 1.0,
        wilcoxon_summary={
            "mean_w": float(np.mean(wilcoxon_ws)) if wilcoxon_ws else 0.0,
            "mean_abs_z": float(np.mean(wilcoxon_zs)) if wilcoxon_zs else 0.0,
            "n_features": len(wilcoxon_ws),
        },
        manova=manova,
        ttest_significant_count=int(rejected.sum()),
        flags=flags,
    )


def _route_normal(d: np.ndarray) -> bool:
    """Shapiro gate on paired differences; undecidable -> nonparametric."""
    try:
        _, p = shapiro_wilk(d)
    except (ConstantInput, TooFewSamples):
        return False
    return p > ALPHA
