"""Dimensionality-reduction registry with a uniform fit/apply contract.

Selection methods keep a subset of named feature columns; embedding
methods learn a projection. A FittedReducer never stores label data, so
fitting on training folds and applying to held-out data is the only
possible flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import FeatureAgglomeration
from sklearn.linear_model import ElasticNet, Lasso, LogisticRegression

from .errors import (
    ColumnMismatch,
    KTooLarge,
    NegativeInputForChiSquare,
    SupervisedWithoutLabels,
)
from .radiomics.extract import FeatureMatrix

SUPERVISED = frozenset({"anova_f", "chi_square", "mutual_info", "gain_ratio",
                        "relieff", "lasso", "elastic_net", "rfe_logistic"})
UNSUPERVISED = frozenset({"variance_threshold", "correlation_filter", "pca",
                          "feature_agglomeration", "gaussian_random_projection",
                          "sparse_random_projection"})
METHODS = SUPERVISED | UNSUPERVISED
STOCHASTIC = frozenset({"gaussian_random_projection",
                        "sparse_random_projection", "relieff"})

MI_BINS = 10  # equal-frequency bins for the plug-in MI estimator


@dataclass
class ReducerSpec:
    method: str
    k_out: int
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown reducer method {self.method!r}")
        if self.k_out < 1:
            raise ValueError("k_out must be >= 1")
        if self.method in STOCHASTIC and self.seed is None:
            raise ValueError(f"{self.method} requires an explicit seed")


@dataclass
class FittedReducer:
    spec: ReducerSpec
    feature_ids: list[str]                    # fit-time input registry
    selected_ids: list[str] | None = None     # selection methods
    projection: np.ndarray | None = None      # embedding methods
    center: np.ndarray | None = None
    output_ids: list[str] | None = None

    def to_json_dict(self) -> dict:
        out = {"method": self.spec.method, "k_out": self.spec.k_out,
               "seed": self.spec.seed, "params": self.spec.params}
        if self.selected_ids is not None:
            out["selected_ids"] = self.selected_ids
        if self.projection is not None:
            out["projection"] = self.projection.tolist()
        return out


def _quantile_bins(x: np.ndarray, bins: int = MI_BINS) -> np.ndarray:
    """Equal-frequency discretization into at most ``bins`` codes."""
    edges = np.quantile(x, np.linspace(0, 1, bins + 1)[1:-1])
    return np.searchsorted(edges, x, side="right")


def _entropy(codes: np.ndarray) -> float:
    _, counts = np.unique(codes, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def mutual_information(x: np.ndarray, y: np.ndarray) -> float:
    """Plug-in MI in nats between a discretized feature and labels."""
    cx = _quantile_bins(x)
    cy = np.asarray(y)
    return _entropy(cx) + _entropy(cy) - _entropy_joint(cx, cy)


def _entropy_joint(cx: np.ndarray, cy: np.ndarray) -> float:
    pair = cx.astype(np.int64) * (int(cy.max()) + 1) + cy.astype(np.int64)
    return _entropy(pair)


def _anova_f_scores(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    classes = np.unique(y)
    n = len(y)
    grand = X.mean(axis=0)
    ss_between = np.zeros(X.shape[1])
    ss_within = np.zeros(X.shape[1])
    for c in classes:
        sub = X[y == c]
        ss_between += len(sub) * (sub.mean(axis=0) - grand) ** 2
        ss_within += ((sub - sub.mean(axis=0)) ** 2).sum(axis=0)
    df_b = len(classes) - 1
    df_w = n - len(classes)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (ss_between / df_b) / (ss_within / df_w)
    return np.where(np.isfinite(f), f, 0.0)


def _chi2_scores(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    if np.any(X < 0):
        raise NegativeInputForChiSquare("chi_square requires nonnegative X")
    classes = np.unique(y)
    observed = np.vstack([X[y == c].sum(axis=0) for c in classes])
    class_prob = np.array([(y == c).mean() for c in classes])
    expected = class_prob[:, None] * X.sum(axis=0)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        chi2 = ((observed - expected) ** 2 / expected).sum(axis=0)
    return np.where(np.isfinite(chi2), chi2, 0.0)


def _relieff_scores(X: np.ndarray, y: np.ndarray, seed: int,
                    n_neighbors: int = 10, n_samples: int = 100) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n, p = X.shape
    span = X.max(axis=0) - X.min(axis=0)
    span[span == 0] = 1.0
    Xs = X / span
    take = min(n_samples, n)
    picks = rng.choice(n, size=take, replace=False)
    weights = np.zeros(p)
    for idx in picks:
        d = np.abs(Xs - Xs[idx]).sum(axis=1)
        d[idx] = np.inf
        same = np.flatnonzero(y == y[idx])
        other = np.flatnonzero(y != y[idx])
        same = same[same != idx]
        hits = same[np.argsort(d[same], kind="stable")[:n_neighbors]]
        misses = other[np.argsort(d[other], kind="stable")[:n_neighbors]]
        if len(hits):
            weights -= np.abs(Xs[hits] - Xs[idx]).mean(axis=0)
        if len(misses):
            weights += np.abs(Xs[misses] - Xs[idx]).mean(axis=0)
    return weights / take


def _lasso_select(X, y, k_out, l1_ratio=1.0, lam=None, seed=0):
    """Nonzero coefficients along an automatic lambda path.

    Walks lambda downward from the smallest value that zeroes every
    coefficient and keeps the first (sparsest) grid point with at least
    k_out nonzeros; explicit ``lam`` short-circuits the path when it
    already yields enough.
    """
    n = len(y)
    yc = y - y.mean()
    lam_max = float(np.abs(X.T @ yc).max()) / n
    if lam_max == 0:
        raise KTooLarge("degenerate design: all correlations zero")
    cls = (lambda a: Lasso(alpha=a, max_iter=5000)) if l1_ratio >= 1.0 else \
        (lambda a: ElasticNet(alpha=a, l1_ratio=l1_ratio, max_iter=5000))
    grid = [lam] if lam is not None else []
    grid += list(lam_max * np.logspace(0, -3, 30))
    for a in grid:
        model = cls(max(a, 1e-12))
        model.fit(X, y)
        coef = np.abs(model.coef_)
        if (coef > 0).sum() >= k_out:
            return coef
    # even the smallest lambda stayed too sparse: rank by |coef| anyway
    return coef


def _rfe_logistic(X, y, k_out, seed=0):
    remaining = list(range(X.shape[1]))
    while len(remaining) > k_out:
        lr = LogisticRegression(max_iter=2000)
        lr.fit(X[:, remaining], y)
        scores = np.abs(lr.coef_[0])
        drop = max(1, int(0.1 * len(remaining)))
        drop = min(drop, len(remaining) - k_out)
        order = np.argsort(scores, kind="stable")
        kill = set(order[:drop])
        remaining = [f for i, f in enumerate(remaining) if i not in kill]
    ranks = np.zeros(X.shape[1])
    ranks[remaining] = 1.0
    return ranks


def fit_reducer(spec: ReducerSpec, X: FeatureMatrix,
                y: np.ndarray | None = None) -> FittedReducer:
    method = spec.method
    if method in SUPERVISED and y is None:
        raise SupervisedWithoutLabels(method)
    data = X.values
    n, p = data.shape
    if spec.k_out > p:
        raise KTooLarge(f"k_out={spec.k_out} > {p} input features")
    if not np.all(np.isfinite(data)):
        raise ValueError("fit_reducer requires finite inputs")
    if y is not None:
        y = np.asarray(y)

    fitted = FittedReducer(spec=spec, feature_ids=list(X.feature_ids))

    def select_topk(scores: np.ndarray):
        order = np.argsort(-scores, kind="stable")[:spec.k_out]
        order = np.sort(order)  # registry order in the output
        fitted.selected_ids = [X.feature_ids[i] for i in order]
        fitted.output_ids = fitted.selected_ids

    if method == "variance_threshold":
        var = data.var(axis=0)
        thr = spec.params.get("threshold", 0.0)
        scores = np.where(var > thr, var, -np.inf)
        if np.isfinite(scores).sum() < spec.k_out:
            raise KTooLarge("too few features above the variance threshold")
        select_topk(scores)
    elif method == "correlation_filter":
        thr = spec.params.get("threshold", 0.95)
        var = data.var(axis=0)
        order = np.argsort(-var, kind="stable")
        sd = data.std(axis=0)
        sd[sd == 0] = 1.0
        Z = (data - data.mean(axis=0)) / sd
        kept: list[int] = []
        for j in order:
            if var[j] == 0:
                continue
            ok = all(abs(float(Z[:, j] @ Z[:, k]) / n) < thr for k in kept)
            if ok:
                kept.append(int(j))
            if len(kept) == spec.k_out:
                break
        for j in order:  # backfill if the filter was too aggressive
            if len(kept) == spec.k_out:
                break
            if int(j) not in kept:
                kept.append(int(j))
        fitted.selected_ids = [X.feature_ids[i] for i in sorted(kept)]
        fitted.output_ids = fitted.selected_ids
    elif method == "anova_f":
        select_topk(_anova_f_scores(data, y))
    elif method == "chi_square":
        select_topk(_chi2_scores(data, y))
    elif method == "mutual_info":
        select_topk(np.array([mutual_information(data[:, j], y)
                              for j in range(p)]))
    elif method == "gain_ratio":
        scores = np.full(p, -np.inf)
        for j in range(p):
            h = _entropy(_quantile_bins(data[:, j]))
            if h > 0:
                scores[j] = mutual_information(data[:, j], y) / h
        select_topk(scores)
    elif method == "relieff":
        select_topk(_relieff_scores(data, y, spec.seed,
                                    spec.params.get("n_neighbors", 10),
                                    spec.params.get("n_samples", 100)))
    elif method in ("lasso", "elastic_net"):
        l1 = 1.0 if method == "lasso" else spec.params.get("l1_ratio", 0.5)
        coef = _lasso_select(data, y.astype(np.float64), spec.k_out,
                             l1_ratio=l1, lam=spec.params.get("lam"))
        select_topk(coef)
    elif method == "rfe_logistic":
        select_topk(_rfe_logistic(data, y, spec.k_out))
    elif method == "pca":
        center = data.mean(axis=0)
        centered = data - center
        cov = centered.T @ centered / max(1, n - 1)
        vals, vecs = np.linalg.eigh(cov)
        order = np.argsort(vals)[::-1][:spec.k_out]
        comps = vecs[:, order]
        for c in range(comps.shape[1]):
            jmax = int(np.argmax(np.abs(comps[:, c])))
            if comps[jmax, c] < 0:
                comps[:, c] = -comps[:, c]
        fitted.projection = comps
        fitted.center = center
        fitted.output_ids = [f"pca_{i}" for i in range(spec.k_out)]
    elif method == "feature_agglomeration":
        agg = FeatureAgglomeration(n_clusters=spec.k_out)
        agg.fit(data)
        k = spec.k_out
        proj = np.zeros((p, k))
        for j, lab in enumerate(agg.labels_):
            proj[j, lab] = 1.0
        proj /= proj.sum(axis=0, keepdims=True)  # cluster means
        fitted.projection = proj
        fitted.output_ids = [f"agglo_{i}" for i in range(k)]
    elif method == "gaussian_random_projection":
        rng = np.random.default_rng(spec.seed)
        fitted.projection = rng.normal(0.0, 1.0 / math.sqrt(spec.k_out),
                                       size=(p, spec.k_out))
        fitted.output_ids = [f"grp_{i}" for i in range(spec.k_out)]
    elif method == "sparse_random_projection":
        rng = np.random.default_rng(spec.seed)
        s = spec.params.get("s", 3.0)
        u = rng.random(size=(p, spec.k_out))
        mat = np.zeros((p, spec.k_out))
        mat[u < 1 / (2 * s)] = math.sqrt(s / spec.k_out)
        mat[u > 1 - 1 / (2 * s)] = -math.sqrt(s / spec.k_out)
        fitted.projection = mat
        fitted.output_ids = [f"srp_{i}" for i in range(spec.k_out)]
    return fitted


def apply_reducer(fitted: FittedReducer, X: FeatureMatrix) -> FeatureMatrix:
    if X.feature_ids != fitted.feature_ids:
        raise ColumnMismatch("input columns differ from fit-time registry")
    if fitted.selected_ids is not None:
        cols = [X.feature_ids.index(f) for f in fitted.selected_ids]
        return FeatureMatrix(case_ids=list(X.case_ids),
                             feature_ids=list(fitted.selected_ids),
                             values=X.values[:, cols])
    data = X.values
    if fitted.center is not None:
        data = data - fitted.center
    return FeatureMatrix(case_ids=list(X.case_ids),
                         feature_ids=list(fitted.output_ids),
                         values=data @ fitted.projection)
