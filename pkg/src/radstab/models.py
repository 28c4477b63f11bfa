"""Classifier registry, stratified CV, SL/SSL pipelines, evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import (
    AdaBoostClassifier,
    ExtraTreesClassifier,
    GradientBoostingClassifier,
    RandomForestClassifier,
    VotingClassifier,
)
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.neural_network import MLPClassifier
from sklearn.tree import DecisionTreeClassifier

from .dimred import ReducerSpec, apply_reducer, fit_reducer
from .errors import (
    NegativeSurvival,
    NonFiniteInput,
    PoolOverlapsExternal,
    PoolOverlapsLabeled,
    SingleClassTraining,
    TooFewPerClass,
)
from .radiomics.extract import FeatureMatrix, minmax_normalize

CLASSIFIER_METHODS = ("logistic_regression", "gaussian_nb", "knn",
                      "decision_tree", "random_forest", "extra_trees",
                      "gradient_boosting", "adaboost", "mlp", "soft_voting")

METRIC_KEYS = ("accuracy", "precision", "recall", "f1", "roc_auc",
               "specificity")

OS_THRESHOLD_YEARS = 4.0


@dataclass
class ClassifierSpec:
    method: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    members: list["ClassifierSpec"] | None = None  # soft_voting only

    def __post_init__(self):
        if self.method not in CLASSIFIER_METHODS:
            raise ValueError(f"unknown classifier method {self.method!r}")
        if self.method == "soft_voting" and (not self.members
                                             or len(self.members) < 2):
            raise ValueError("soft_voting requires >= 2 member specs")


def label_os(survival_years: float) -> int:
    """Binary prognosis label: 1 iff survival strictly exceeds 4 years."""
    if survival_years < 0:
        raise NegativeSurvival(f"survival_years={survival_years}")
    return 1 if survival_years > OS_THRESHOLD_YEARS else 0


@dataclass
class CVSplit:
    fold_of: dict[str, int]
    k: int
    seed: int

    def fold_ids(self, fold: int) -> list[str]:
        return [c for c, f in self.fold_of.items() if f == fold]


def stratified_kfold(case_ids: list[str], labels: np.ndarray, k: int = 5,
                     seed: int = 0) -> CVSplit:
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fold_of: dict[str, int] = {}
    next_fold = 0
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            raise TooFewPerClass(f"class {cls} has {len(idx)} < {k} cases")
        idx = idx[rng.permutation(len(idx))]
        # continue the round-robin across classes so fold sizes stay balanced
        for i in idx:
            fold_of[case_ids[int(i)]] = next_fold % k
            next_fold += 1
    return CVSplit(fold_of=fold_of, k=k, seed=seed)


def _build_estimator(spec: ClassifierSpec):
    p = spec.params
    m = spec.method
    if m == "logistic_regression":
        return LogisticRegression(C=p.get("C", 1.0), max_iter=2000)
    if m == "gaussian_nb":
        return GaussianNB()
    if m == "knn":
        return KNeighborsClassifier(n_neighbors=p.get("n_neighbors", 5))
    if m == "decision_tree":
        return DecisionTreeClassifier(criterion="gini",
                                      max_depth=p.get("max_depth"),
                                      random_state=spec.seed)
    if m == "random_forest":
        return RandomForestClassifier(n_estimators=p.get("n_estimators", 100),
                                      random_state=spec.seed)
    if m == "extra_trees":
        return ExtraTreesClassifier(n_estimators=p.get("n_estimators", 100),
                                    random_state=spec.seed)
    if m == "gradient_boosting":
        return GradientBoostingClassifier(
            n_estimators=p.get("n_estimators", 100), max_depth=3,
            random_state=spec.seed)
    if m == "adaboost":
        return AdaBoostClassifier(
            estimator=DecisionTreeClassifier(max_depth=1,
                                             random_state=spec.seed),
            n_estimators=p.get("n_estimators", 50), random_state=spec.seed)
    if m == "mlp":
        return MLPClassifier(hidden_layer_sizes=(p.get("hidden", 64),),
                             early_stopping=True, validation_fraction=0.1,
                             max_iter=500, random_state=spec.seed)
    members = [(f"m{i}", _build_estimator(s))
               for i, s in enumerate(spec.members)]
    return VotingClassifier(estimators=members, voting="soft")


@dataclass
class FittedModel:
    spec: ClassifierSpec
    estimator: object
    classes: np.ndarray


def train(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray) -> FittedModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("training matrix contains non-finite values")
    if len(np.unique(y)) < 2:
        raise SingleClassTraining("y has a single class")
    est = _build_estimator(spec)
    est.fit(X, y)
    return FittedModel(spec=spec, estimator=est, classes=np.asarray(est.classes_))


def predict_proba(model: FittedModel, X: np.ndarray) -> np.ndarray:
    """Probability of class 1 for each row."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("prediction matrix contains non-finite values")
    proba = model.estimator.predict_proba(X)
    col = int(np.flatnonzero(model.classes == 1)[0])
    out = np.clip(proba[:, col], 0.0, 1.0)
    return np.nan_to_num(out, nan=0.5)


def rank_auc(y_true: np.ndarray, y_prob: np.ndarray) -> float:
    """ROC-AUC via the rank (Mann-Whitney) statistic with tie handling."""
    y_true = np.asarray(y_true)
    pos = y_prob[y_true == 1]
    neg = y_prob[y_true == 0]
    if len(pos) == 0 or len(neg) == 0:
        return float("nan")
    order = np.argsort(np.concatenate([pos, neg]), kind="stable")
    ranks = np.empty(len(order))
    ranks[order] = np.arange(1, len(order) + 1)
    # average ranks over ties
    allv = np.concatenate([pos, neg])
    for v in np.unique(allv):
        m = allv == v
        ranks[m] = ranks[m].mean()
    u = ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2
    return float(u / (len(pos) * len(neg)))


def compute_metrics(y_true: np.ndarray, y_prob: np.ndarray,
                    threshold: float = 0.5) -> dict:
    y_true = np.asarray(y_true)
    y_prob = np.asarray(y_prob, dtype=np.float64)
    if len(y_true) != len(y_prob):
        raise ValueError("length mismatch")
    pred = (y_prob >= threshold).astype(int)
    tp = int(((pred == 1) & (y_true == 1)).sum())
    fp = int(((pred == 1) & (y_true == 0)).sum())
    fn = int(((pred == 0) & (y_true == 1)).sum())
    tn = int(((pred == 0) & (y_true == 0)).sum())
    flags = []
    accuracy = (tp + tn) / len(y_true)
    if tp + fp == 0:
        precision = 0.0
        flags.append("undefined_precision")
    else:
        precision = tp / (tp + fp)
    recall = tp / (tp + fn) if tp + fn else 0.0
    specificity = tn / (tn + fp) if tn + fp else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    auc = rank_auc(y_true, y_prob)
    if np.isnan(auc):
        auc = 0.5
        flags.append("undefined_auc")
    return {"accuracy": accuracy, "precision": precision, "recall": recall,
            "f1": f1, "roc_auc": float(auc), "specificity": specificity,
            "flags": flags}


def _aggregate(per_fold: list[dict]) -> dict:
    """mean +/- population std across folds, per metric."""
    out = {}
    for key in METRIC_KEYS:
        vals = np.array([m[key] for m in per_fold])
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


@dataclass
class LabeledSet:
    features: FeatureMatrix
    labels: np.ndarray  # aligned with features.case_ids


@dataclass
class PipelineResult:
    validation: dict                 # metric -> {mean, std}
    externals: dict[str, dict]       # tag -> metric -> {mean, std}
    per_fold: list[dict]
    per_fold_externals: dict[str, list[dict]]


def _fold_arrays(labeled: LabeledSet, split: CVSplit, fold: int):
    ids = labeled.features.case_ids
    mask = np.array([split.fold_of[c] == fold for c in ids])
    train_ids = [c for c, m in zip(ids, mask) if not m]
    val_ids = [c for c, m in zip(ids, mask) if m]
    return train_ids, val_ids, labeled.labels[~mask], labeled.labels[mask]


def _prep_fold(labeled: LabeledSet, split: CVSplit, fold: int,
               reducer_spec: ReducerSpec, extra: list[FeatureMatrix]):
    """Fit min-max scaling and the reducer on training folds only."""
    train_ids, val_ids, y_tr, y_val = _fold_arrays(labeled, split, fold)
    tr = labeled.features.subset_cases(train_ids)
    va = labeled.features.subset_cases(val_ids)
    tr_s, others, _ = minmax_normalize(tr, [va] + list(extra))
    fitted = fit_reducer(reducer_spec, tr_s, y_tr)
    Xtr = apply_reducer(fitted, tr_s).values
    Xva = apply_reducer(fitted, others[0]).values
    Xextra = [apply_reducer(fitted, o).values for o in others[1:]]
    return Xtr, y_tr, Xva, y_val, Xextra, fitted


def run_sl(reducer_spec: ReducerSpec, clf_spec: ClassifierSpec,
           labeled: LabeledSet, externals: dict[str, LabeledSet] | None = None,
           k: int = 5, seed: int = 0) -> PipelineResult:
    externals = externals or {}
    _check_disjoint(labeled, externals, pool=None)
    split = stratified_kfold(labeled.features.case_ids, labeled.labels,
                             k=k, seed=seed)
    ext_tags = list(externals)
    ext_mats = [externals[t].features for t in ext_tags]
    per_fold, per_ext = [], {t: [] for t in ext_tags}
    for fold in range(k):
        Xtr, y_tr, Xva, y_val, Xext, _ = _prep_fold(
            labeled, split, fold, reducer_spec, ext_mats)
        model = train(clf_spec, Xtr, y_tr)
        per_fold.append(compute_metrics(y_val, predict_proba(model, Xva)))
        for tag, Xe in zip(ext_tags, Xext):
            per_ext[tag].append(
                compute_metrics(externals[tag].labels,
                                predict_proba(model, Xe)))
    return PipelineResult(validation=_aggregate(per_fold),
                          externals={t: _aggregate(v)
                                     for t, v in per_ext.items()},
                          per_fold=per_fold, per_fold_externals=per_ext)


def _check_disjoint(labeled: LabeledSet, externals: dict[str, LabeledSet],
                    pool: FeatureMatrix | None):
    lab = set(labeled.features.case_ids)
    if pool is not None:
        pool_ids = set(pool.case_ids)
        if pool_ids & lab:
            raise PoolOverlapsLabeled(sorted(pool_ids & lab)[:5])
        for tag, ext in externals.items():
            hit = pool_ids & set(ext.features.case_ids)
            if hit:
                raise PoolOverlapsExternal(f"{tag}: {sorted(hit)[:5]}")


def run_ssl(reducer_spec: ReducerSpec, clf_spec: ClassifierSpec,
            labeled: LabeledSet, pool: FeatureMatrix,
            externals: dict[str, LabeledSet] | None = None,
            k: int = 5, seed: int = 0,
            confidence_tau: float = 0.0) -> PipelineResult:
    """Pseudo-labeling: an LR model trained on the k-1 training folds labels
    the unlabeled pool; the final classifier retrains on the union. The
    held-out fold never contributes to pseudo-labeling."""
    externals = externals or {}
    if pool.values.shape[0] == 0:
        raise ValueError("unlabeled pool is empty")
    _check_disjoint(labeled, externals, pool)
    split = stratified_kfold(labeled.features.case_ids, labeled.labels,
                             k=k, seed=seed)
    ext_tags = list(externals)
    ext_mats = [externals[t].features for t in ext_tags]
    per_fold, per_ext = [], {t: [] for t in ext_tags}
    for fold in range(k):
        Xtr, y_tr, Xva, y_val, Xrest, _ = _prep_fold(
            labeled, split, fold, reducer_spec, [pool] + ext_mats)
        Xpool, Xext = Xrest[0], Xrest[1:]
        labeler = train(ClassifierSpec("logistic_regression",
                                       seed=clf_spec.seed), Xtr, y_tr)
        p1 = predict_proba(labeler, Xpool)
        pseudo = (p1 >= 0.5).astype(int)
        conf = np.maximum(p1, 1.0 - p1)
        keep = conf >= confidence_tau
        Xfit = np.vstack([Xtr, Xpool[keep]])
        yfit = np.concatenate([y_tr, pseudo[keep]])
        model = train(clf_spec, Xfit, yfit)
        per_fold.append(compute_metrics(y_val, predict_proba(model, Xva)))
        for tag, Xe in zip(ext_tags, Xext):
            per_ext[tag].append(
                compute_metrics(externals[tag].labels,
                                predict_proba(model, Xe)))
    return PipelineResult(validation=_aggregate(per_fold),
                          externals={t: _aggregate(v)
                                     for t, v in per_ext.items()},
                          per_fold=per_fold, per_fold_externals=per_ext)
