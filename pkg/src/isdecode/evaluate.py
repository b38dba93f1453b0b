"""Cross-validated evaluation of feature/classifier pipelines.

Every fitted artifact of a pipeline (covariance mean, CSP filters,
standardizer, PCA, classifier) is fitted on the training split of a fold
only and then applied to the held-out split.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional

import numpy as np

from ._rng import derive_seed
from .dataset import TrialSet, stratified_kfold
from .dsp import (FilterSpec, SpectrogramSpec, dft_features, filter_trials,
                  resample_trials, spectrogram_features, statistical_features,
                  trim_trials)
from .errors import DataError, ParameterError
from .nn import TrainConfig, bagging_train, predict_proba, train_mlp
from .reduce import pca_fit, pca_transform, standardize_apply, standardize_fit
from .riemann import mean_covariance, tangent_features
from .spatial import class_covariances, csp_fit, trial_covariances, variance_features

__all__ = [
    "FeatureSpec", "BaggingSpec", "PipelineSpec", "FoldResult", "EvalReport",
    "accuracy", "confusion_matrix", "roc_auc", "roc_auc_ovr", "chance_level",
    "preprocess", "cross_validate",
]

FEATURE_DEFAULTS = {
    "tangent": {"shrinkage": 0.05, "mean": "geometric", "whitened": False},
    "csp_variance": {"shrinkage": 0.05, "n_filters": None, "log": False},
    "dft": {"max_hz": 40.0, "representation": "magnitude"},
    "spectrogram": {"window": 64, "overlap": 32},
    "stats": {},
}


# ---------------------------------------------------------------------------
# metrics

def accuracy(preds, labels):
    """Fraction of predictions equal to the labels."""
    preds, labels = np.asarray(preds), np.asarray(labels)
    if preds.shape != labels.shape:
        raise ParameterError(f"length mismatch: {preds.shape} vs {labels.shape}")
    if labels.size == 0:
        raise ParameterError("accuracy of an empty prediction set is undefined")
    return float(np.count_nonzero(preds == labels)) / labels.size


def confusion_matrix(preds, labels, n_classes):
    """Counts with rows = true class, columns = predicted class."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise ParameterError(f"length mismatch: {preds.shape} vs {labels.shape}")
    for name, v in (("label", labels), ("prediction", preds)):
        if v.size and (v.min() < 0 or v.max() >= n_classes):
            raise DataError(f"{name} out of range for {n_classes} classes")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


def roc_auc(scores, labels):
    """ROC curve and its area for binary labels (1 = positive).

    Thresholds are the distinct scores in decreasing order; tied scores move
    the curve diagonally, which matches the rank-average AUC.

    Returns
    -------
    (fpr, tpr, thresholds), auc
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ParameterError("scores and labels differ in length")
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ParameterError("ROC needs both positive and negative labels")
    order = np.argsort(-scores, kind="mergesort")
    s, p = scores[order], pos[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tps = np.cumsum(p)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    thresholds = np.r_[np.inf, s[last]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    return (fpr, tpr, thresholds), auc


def roc_auc_ovr(probs, labels, n_classes):
    """Macro average of one-vs-rest AUCs over the classes present in ``labels``."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    aucs = []
    for c in range(n_classes):
        is_c = (labels == c).astype(int)
        if 0 < is_c.sum() < is_c.size:
            aucs.append(roc_auc(probs[:, c], is_c)[1])
    if not aucs:
        raise ParameterError("one-vs-rest AUC needs at least two classes present")
    return float(np.mean(aucs))


def chance_level(n_classes):
    if int(n_classes) < 2:
        raise ParameterError("chance level needs at least 2 classes")
    return 1.0 / int(n_classes)


# ---------------------------------------------------------------------------
# pipeline description

def _reject_unknown(d, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise ParameterError(f"unknown key(s) in {where}: {sorted(extra)}")


@dataclass(frozen=True)
class FeatureSpec:
    kind: str = "tangent"
    params: Dict[str, Any] = field(default_factory=dict)

    def resolved(self):
        if self.kind not in FEATURE_DEFAULTS:
            raise ParameterError(f"unknown feature kind {self.kind!r}")
        defaults = FEATURE_DEFAULTS[self.kind]
        _reject_unknown(self.params, defaults, f"features ({self.kind})")
        return {**defaults, **self.params}


@dataclass(frozen=True)
class BaggingSpec:
    n_estimators: int = 25
    fraction: float = 1.0


@dataclass(frozen=True)
class PipelineSpec:
    """Preprocessing, feature extraction, reduction and classifier settings.

    Preprocessing runs in the fixed order filter, resample, trim.
    """

    filter: Optional[FilterSpec] = None
    resample_hz: Optional[float] = None
    trim: Optional[int] = None
    features: FeatureSpec = field(default_factory=FeatureSpec)
    standardize: bool = True
    pca: Optional[int] = None
    classifier: TrainConfig = field(default_factory=TrainConfig)
    bagging: Optional[BaggingSpec] = None
    seed: int = 0

    def validate(self, n_classes=None):
        self.features.resolved()
        self.classifier.validate()
        if self.features.kind == "csp_variance" and n_classes is not None and n_classes != 2:
            raise ParameterError(
                f"csp_variance features support 2-class tasks only, data has {n_classes} classes")
        if self.pca is not None and int(self.pca) < 1:
            raise ParameterError("pca components must be >= 1")
        if self.bagging is not None and int(self.bagging.n_estimators) < 1:
            raise ParameterError("bagging needs at least one estimator")
        if self.trim is not None and int(self.trim) < 1:
            raise ParameterError("trim length must be >= 1")

    @classmethod
    def from_dict(cls, d):
        """Build from the ``pipeline`` config object; unknown keys are errors."""
        d = dict(d)
        _reject_unknown(d, [f.name for f in fields(cls)], "pipeline")
        kw = {}
        if d.get("filter") is not None:
            f = dict(d["filter"])
            _reject_unknown(f, ["kind", "cutoffs", "order", "zero_phase"], "filter")
            if isinstance(f.get("cutoffs"), list):
                f["cutoffs"] = tuple(f["cutoffs"])
            kw["filter"] = FilterSpec(**f)
        for key in ("resample_hz", "trim", "pca", "seed", "standardize"):
            if d.get(key) is not None:
                kw[key] = d[key]
        if d.get("features") is not None:
            feat = d["features"]
            if isinstance(feat, str):
                feat = {"kind": feat}
            feat = dict(feat)
            kind = feat.pop("kind", "tangent")
            params = feat.pop("params", {})
            kw["features"] = FeatureSpec(kind, {**params, **feat})
        if d.get("classifier") is not None:
            c = dict(d["classifier"])
            _reject_unknown(c, [f.name for f in fields(TrainConfig)], "classifier")
            if isinstance(c.get("hidden"), list):
                c["hidden"] = tuple(c["hidden"])
            kw["classifier"] = TrainConfig(**c)
        if d.get("bagging") is not None:
            b = dict(d["bagging"])
            _reject_unknown(b, ["n_estimators", "fraction"], "bagging")
            kw["bagging"] = BaggingSpec(**b)
        spec = cls(**kw)
        spec.validate()
        return spec

    def to_dict(self):
        """Fully resolved form, every default materialized."""
        clf = asdict(self.classifier)
        if isinstance(clf["hidden"], tuple):
            clf["hidden"] = list(clf["hidden"])
        filt = None
        if self.filter is not None:
            filt = asdict(self.filter)
            filt["cutoffs"] = np.atleast_1d(self.filter.cutoffs).tolist()
            if len(filt["cutoffs"]) == 1:
                filt["cutoffs"] = filt["cutoffs"][0]
        return {
            "filter": filt,
            "resample_hz": self.resample_hz,
            "trim": self.trim,
            "features": {"kind": self.features.kind, **self.features.resolved()},
            "standardize": self.standardize,
            "pca": self.pca,
            "classifier": clf,
            "bagging": None if self.bagging is None else asdict(self.bagging),
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# evaluation

@dataclass
class FoldResult:
    fold: int
    train_index: np.ndarray
    test_index: np.ndarray
    probabilities: np.ndarray
    predictions: np.ndarray
    accuracy: float
    seconds: float
    artifacts: Dict[str, Any]


@dataclass
class EvalReport:
    """Cross-validation summary; ``folds`` keeps fitted artifacts in memory only."""

    fold_accuracies: List[float]
    accuracy_mean: float
    accuracy_std: float
    confusion: np.ndarray
    chance_level: float
    n_classes: int
    class_names: List[str]
    k: int
    n_trials: int
    pipeline: Dict[str, Any]
    fold_seconds: List[float]
    auc: Optional[float] = None
    auc_kind: Optional[str] = None
    roc: Optional[Dict[str, List[float]]] = None
    folds: List[FoldResult] = field(default_factory=list, repr=False)

    @property
    def table1(self):
        """Mean and std of fold accuracy in percent, rounded to integers."""
        return {"mu": int(round(100 * self.accuracy_mean)),
                "sigma": int(round(100 * self.accuracy_std))}

    def to_dict(self, timing=True):
        d = {
            "fold_accuracies": list(self.fold_accuracies),
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "table1": self.table1,
            "confusion": self.confusion.tolist(),
            "chance_level": self.chance_level,
            "auc": self.auc,
            "auc_kind": self.auc_kind,
            "roc": self.roc,
            "n_classes": self.n_classes,
            "class_names": list(self.class_names),
            "k": self.k,
            "n_trials": self.n_trials,
            "pipeline": self.pipeline,
        }
        if timing:
            d["fold_seconds"] = list(self.fold_seconds)
        return d

    def to_json(self, timing=True):
        def clean(o):
            if isinstance(o, float) and not np.isfinite(o):
                return None if np.isnan(o) else ("inf" if o > 0 else "-inf")
            if isinstance(o, dict):
                return {k: clean(v) for k, v in o.items()}
            if isinstance(o, list):
                return [clean(v) for v in o]
            return o
        return json.dumps(clean(self.to_dict(timing)), indent=2)


def preprocess(ts: TrialSet, spec: PipelineSpec) -> TrialSet:
    """Apply the stateless per-trial steps: filter, resample, trim."""
    if spec.filter is not None:
        ts = filter_trials(ts, spec.filter)
    if spec.resample_hz is not None:
        ts = resample_trials(ts, spec.resample_hz)
    if spec.trim is not None:
        ts = trim_trials(ts, spec.trim)
    return ts


def _stateless_features(ts, kind, params):
    if kind == "dft":
        return dft_features(ts, params["max_hz"], params["representation"])
    if kind == "spectrogram":
        return spectrogram_features(ts, SpectrogramSpec(params["window"], params["overlap"]))
    return statistical_features(ts)


def _fold_features(kind, params, shared, labels, train, test):
    """Features for one fold; supervised/fitted parts see only ``train``."""
    artifacts = {}
    if kind == "tangent":
        covs = shared
        Cm = mean_covariance(covs[train], mode=params["mean"])
        artifacts["covariance_mean"] = Cm
        F = tangent_features(covs, Cm, whitened=params["whitened"])
    elif kind == "csp_variance":
        covs, data = shared
        A = class_covariances(covs[train], labels[train], classes=[0, 1])
        filters = csp_fit(A[0], A[1], params["n_filters"])
        artifacts["csp"] = filters
        F = variance_features(data, filters, log_scale=params["log"])
    else:
        F = shared
    return F[train], F[test], artifacts


def _run_fold(f, train, test, spec, params, shared, labels, n_classes, feature_hook):
    t0 = time.perf_counter()
    kind = spec.features.kind
    Ftr, Fte, artifacts = _fold_features(kind, params, shared, labels, train, test)
    if feature_hook is not None:
        Ftr, Fte = feature_hook(Ftr, Fte, train, test)
    if spec.standardize:
        st = standardize_fit(Ftr)
        artifacts["standardizer"] = st
        Ftr, Fte = standardize_apply(st, Ftr), standardize_apply(st, Fte)
    if spec.pca is not None:
        pca = pca_fit(Ftr, spec.pca)
        artifacts["pca"] = pca
        Ftr, Fte = pca_transform(pca, Ftr), pca_transform(pca, Fte)
    cfg = replace(spec.classifier, seed=derive_seed(spec.seed, "classifier", f))
    if spec.bagging is not None:
        model = bagging_train(Ftr, labels[train], spec.bagging.n_estimators, cfg,
                              spec.bagging.fraction, n_classes=n_classes)
    else:
        model = train_mlp(Ftr, labels[train], cfg, n_classes=n_classes)
    artifacts["classifier"] = model
    probs = predict_proba(model, Fte)
    preds = np.argmax(probs, axis=1)
    acc = accuracy(preds, labels[test])
    return FoldResult(f, train, test, probs, preds, acc, time.perf_counter() - t0, artifacts)


def cross_validate(ts: TrialSet, spec: PipelineSpec, k=10, n_jobs=1, feature_hook=None):
    """Stratified k-fold evaluation of ``spec`` on ``ts``.

    Parameters
    ----------
    ts : TrialSet
    spec : PipelineSpec
    k : int
        Number of folds; fold assignment uses the ``"folds"`` stream of
        ``spec.seed``.
    n_jobs : int
        Folds run on this many threads; results are merged in fold order.
    feature_hook : callable, optional
        ``hook(F_train, F_test, train_idx, test_idx) -> (F_train, F_test)``
        applied to raw features before standardization. Meant for probing
        the pipeline, e.g. leakage canaries.

    Returns
    -------
    EvalReport
    """
    n_classes = ts.n_classes
    spec.validate(n_classes)
    params = spec.features.resolved()
    plan = stratified_kfold(ts.labels, k, spec.seed)
    ts = preprocess(ts, spec)
    labels = ts.labels
    kind = spec.features.kind
    if kind == "tangent":
        shared = trial_covariances(ts.data, params["shrinkage"])
    elif kind == "csp_variance":
        shared = (trial_covariances(ts.data, params["shrinkage"]), ts.data)
    else:
        shared = _stateless_features(ts, kind, params)

    def job(f):
        train, test = plan.train_indices(f), plan.test_indices(f)
        return _run_fold(f, train, test, spec, params, shared, labels, n_classes, feature_hook)

    if n_jobs is not None and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            folds = list(pool.map(job, range(plan.k)))
    else:
        folds = [job(f) for f in range(plan.k)]

    probs = np.zeros((ts.n_trials, n_classes))
    preds = np.zeros(ts.n_trials, dtype=np.int64)
    for fr in folds:
        probs[fr.test_index] = fr.probabilities
        preds[fr.test_index] = fr.predictions
    accs = [fr.accuracy for fr in folds]
    report = EvalReport(
        fold_accuracies=accs,
        accuracy_mean=float(np.mean(accs)),
        accuracy_std=float(np.std(accs)),
        confusion=confusion_matrix(preds, labels, n_classes),
        chance_level=chance_level(n_classes),
        n_classes=n_classes,
        class_names=list(ts.class_names),
        k=plan.k,
        n_trials=ts.n_trials,
        pipeline=spec.to_dict(),
        fold_seconds=[fr.seconds for fr in folds],
        folds=folds,
    )
    present = np.unique(labels)
    if n_classes == 2:
        (fpr, tpr, thr), auc = roc_auc(probs[:, 1], labels)
        report.auc, report.auc_kind = auc, "binary"
        report.roc = {"fpr": fpr.tolist(), "tpr": tpr.tolist(), "thresholds": thr.tolist()}
    elif present.size >= 2:
        report.auc, report.auc_kind = roc_auc_ovr(probs, labels, n_classes), "macro_ovr"
    return report
