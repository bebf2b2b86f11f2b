"""1-NN evaluation and the repeated-holdout experiment runners."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .baseline import eigen_fit
from .clustering import ClusteringError
from .dataset import HoldoutSplit, LabeledDataset, stratified_holdout
from .projection import (
    feature_variances,
    fit_pedacos_por_valor,
    variance_ranking,
)

log = logging.getLogger(__name__)

PV = "pedacos-por-valor"
AUTOFACES = "autofaces"
METHODS = (PV, AUTOFACES)

PAPER_K_VALUES = (2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048)

# independent random streams derived from one repetition seed
STREAM_SPLIT = 0
STREAM_KMEANS = 1
STREAM_CLASSES = 2

CSV_FIELDS = (
    "experiment", "dataset", "method", "clusters_formed",
    "features_kept", "repetition", "seed", "accuracy",
)
SUMMARY_FIELDS = (
    "experiment", "dataset", "method", "clusters_formed",
    "features_kept", "repetitions", "mean", "std",
)


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def stream_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


# ---------------------------------------------------------------- classifier


def _sq_distances(train: np.ndarray, queries: np.ndarray, budget: int = 4_000_000) -> np.ndarray:
    # explicit differences, not the |a|^2 - 2ab + |b|^2 expansion, so exact ties stay ties
    out = np.empty((queries.shape[0], train.shape[0]))
    step = max(1, budget // max(1, train.size))
    for s in range(0, queries.shape[0], step):
        q = queries[s : s + step]
        out[s : s + step] = ((q[:, None, :] - train[None, :, :]) ** 2).sum(axis=2)
    return out


def nn1_classify(train_features, train_labels, query):
    """Label of the Euclidean-nearest training vector (lowest index on ties).

    ``query`` may be one vector or a batch of rows; the return matches.
    """
    T = np.asarray(train_features, dtype=np.float64)
    y = np.asarray(train_labels)
    if T.ndim != 2 or T.shape[0] == 0:
        raise ValueError("1-NN needs at least one training vector")
    if y.shape[0] != T.shape[0]:
        raise ValueError("train features and labels differ in length")
    Q = np.asarray(query, dtype=np.float64)
    single = Q.ndim == 1
    Q = np.atleast_2d(Q)
    if Q.shape[1] != T.shape[1]:
        raise ValueError(f"query dimension {Q.shape[1]} != training dimension {T.shape[1]}")
    nearest = np.argmin(_sq_distances(T, Q), axis=1)
    labels = y[nearest]
    return labels[0] if single else labels


def accuracy_stats(accs: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (divisor m - 1, zero for one value)."""
    a = np.asarray(accs, dtype=np.float64)
    if a.size == 0:
        raise ValueError("no accuracies to summarize")
    mean = float(a.mean())
    std = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return mean, std


# ---------------------------------------------------------------- single split


def _classify_accuracy(F_train, y_train, F_test, y_test) -> float:
    pred = nn1_classify(F_train, y_train, F_test)
    return float(np.mean(pred == y_test))


def evaluate_split(
    ds: LabeledDataset,
    split: HoldoutSplit,
    method: str = PV,
    n_features: int = 512,
    clusters_formed: int | None = None,
    fit_indices: np.ndarray | None = None,
    seed: int = 0,
    kmeans_options: dict | None = None,
) -> tuple[float, int]:
    """Fit a projection, project train and test, score 1-NN on the test set.

    The projection is fitted on ``fit_indices`` (default: the whole train
    split) while classification always uses every training sample.
    Returns (accuracy, number of features used).
    """
    X = ds.vectors()
    y = ds.labels
    fit_idx = split.train_indices if fit_indices is None else np.asarray(fit_indices)
    if method == PV:
        model = fit_pedacos_por_valor(
            X[fit_idx], ds.width, ds.height, n_features, clusters_formed,
            seed=seed, **(kmeans_options or {}),
        )
        transform, used = model.transform, model.n_features
    elif method == AUTOFACES:
        model = eigen_fit(X[fit_idx], None if n_features is None else n_features)
        transform, used = model.transform, model.r
    elif method == "raw":
        transform, used = (lambda A: A), X.shape[1]
    else:
        raise ValueError(f"unknown method {method!r}")
    tr, te = split.train_indices, split.test_indices
    acc = _classify_accuracy(transform(X[tr]), y[tr], transform(X[te]), y[te])
    return acc, used


# ---------------------------------------------------------------- experiments


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str  # k_sweep | few_classes | overcluster
    dataset: str
    dataset_path: str = ""
    methods: tuple[str, ...] = (PV,)
    feature_counts: tuple[int, ...] = PAPER_K_VALUES
    clusters_formed: tuple[int, ...] = (64, 128, 256)
    projection_training_classes: tuple[int, ...] = (1, 2, 3)
    pv_features: int = 512
    holdout_repetitions: int = 10
    base_seed: int = 0
    train_fraction: float = 0.5
    image_format: str = "pgm"
    resize: tuple[int, int] | None = None
    max_iterations: int = 300
    tolerance: float = 1e-6
    restarts: int = 1

    def __post_init__(self):
        if self.holdout_repetitions < 1:
            raise ValueError("holdout_repetitions must be >= 1")
        if any(k < 1 for k in self.feature_counts):
            raise ValueError("feature_counts must all be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")

    @property
    def kmeans_options(self) -> dict:
        return dict(
            max_iterations=self.max_iterations, tolerance=self.tolerance, restarts=self.restarts
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["resize"] = list(self.resize) if self.resize else None
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


@dataclass(frozen=True)
class RunRow:
    experiment: str
    dataset: str
    method: str
    clusters_formed: int | None
    features_kept: int
    repetition: int
    seed: int
    accuracy: float


@dataclass(frozen=True)
class EvalResult:
    experiment: str
    dataset: str
    method: str
    clusters_formed: int | None
    features_kept: str
    accuracies: tuple[float, ...]
    mean: float = field(init=False)
    std: float = field(init=False)

    def __post_init__(self):
        finite = [a for a in self.accuracies if not math.isnan(a)]
        mean, std = accuracy_stats(finite) if finite else (math.nan, math.nan)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def _k_sweep_rep(ds: LabeledDataset, cfg: ExperimentConfig, rep: int) -> list[RunRow]:
    seed = cfg.base_seed + rep
    split = stratified_holdout(ds.labels, cfg.train_fraction, seed, rng=stream_rng(seed, STREAM_SPLIT))
    km_seed = stream_seed(seed, STREAM_KMEANS)
    p = ds.width * ds.height
    rows = []
    for method in cfg.methods:
        for k in cfg.feature_counts:
            if k > p:
                log.warning("k=%d exceeds p=%d; row flagged", k, p)
                acc, used = math.nan, k
            else:
                try:
                    acc, used = evaluate_split(
                        ds, split, method, k, seed=km_seed, kmeans_options=cfg.kmeans_options
                    )
                except ClusteringError as exc:
                    log.warning("k=%d: %s; row flagged", k, exc)
                    acc, used = math.nan, k
            formed = k if method == PV else None
            rows.append(RunRow("k_sweep", cfg.dataset, method, formed, used, rep, seed, acc))
    return rows


def _few_classes_rep(ds: LabeledDataset, cfg: ExperimentConfig, rep: int) -> list[RunRow]:
    seed = cfg.base_seed + rep
    split = stratified_holdout(ds.labels, cfg.train_fraction, seed, rng=stream_rng(seed, STREAM_SPLIT))
    km_seed = stream_seed(seed, STREAM_KMEANS)
    train_labels = ds.labels[split.train_indices]
    classes = np.unique(train_labels)
    rows = []
    for count in cfg.projection_training_classes:
        if not 1 <= count <= classes.size:
            raise ValueError(f"cannot pick {count} of {classes.size} classes")
        # one stream per class count, so adding counts to a config never shifts the others
        chosen = stream_rng(seed, STREAM_CLASSES, count).choice(classes, count, replace=False)
        fit_idx = split.train_indices[np.isin(train_labels, chosen)]
        for method in cfg.methods:
            n = cfg.pv_features if method == PV else None
            acc, used = evaluate_split(
                ds, split, method, n, fit_indices=fit_idx, seed=km_seed,
                kmeans_options=cfg.kmeans_options,
            )
            formed = cfg.pv_features if method == PV else None
            rows.append(RunRow(f"few_classes_{count}", cfg.dataset, method, formed, used, rep, seed, acc))
    return rows


def _overcluster_rep(ds: LabeledDataset, cfg: ExperimentConfig, rep: int) -> list[RunRow]:
    seed = cfg.base_seed + rep
    split = stratified_holdout(ds.labels, cfg.train_fraction, seed, rng=stream_rng(seed, STREAM_SPLIT))
    km_seed = stream_seed(seed, STREAM_KMEANS)
    X, y = ds.vectors(), ds.labels
    tr, te = split.train_indices, split.test_indices
    rows = []
    for formed in cfg.clusters_formed:
        model = fit_pedacos_por_valor(
            X[tr], ds.width, ds.height, formed, seed=km_seed, **cfg.kmeans_options
        )
        F_tr, F_te = model.transform(X[tr]), model.transform(X[te])
        ranking = variance_ranking(feature_variances(F_tr))
        for kept in range(formed, 0, -1):
            cols = np.sort(ranking[:kept])
            acc = _classify_accuracy(F_tr[:, cols], y[tr], F_te[:, cols], y[te])
            rows.append(RunRow("overcluster", cfg.dataset, PV, formed, kept, rep, seed, acc))
    return rows


_RUNNERS = {
    "k_sweep": _k_sweep_rep,
    "few_classes": _few_classes_rep,
    "overcluster": _overcluster_rep,
}

_worker_ds: LabeledDataset | None = None


def _init_worker(ds):
    global _worker_ds
    _worker_ds = ds


def _run_in_worker(args):
    name, cfg, rep = args
    return _RUNNERS[name](_worker_ds, cfg, rep)


def run_experiment(ds: LabeledDataset, cfg: ExperimentConfig, workers: int = 1) -> list[RunRow]:
    """All repetitions of ``cfg.experiment``, rows ordered by repetition."""
    if cfg.experiment not in _RUNNERS:
        raise ValueError(f"unknown experiment {cfg.experiment!r}")
    reps = range(cfg.holdout_repetitions)
    if workers <= 1:
        chunks = [_RUNNERS[cfg.experiment](ds, cfg, r) for r in reps]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(ds,)) as pool:
            chunks = list(pool.map(_run_in_worker, [(cfg.experiment, cfg, r) for r in reps]))
    return [row for chunk in chunks for row in chunk]


def run_k_sweep(ds, cfg, workers=1):
    return summarize(run_experiment(ds, _with(cfg, "k_sweep"), workers))


def run_few_classes(ds, cfg, workers=1):
    return summarize(run_experiment(ds, _with(cfg, "few_classes"), workers))


def run_overcluster(ds, cfg, workers=1):
    return summarize(run_experiment(ds, _with(cfg, "overcluster"), workers))


def _with(cfg: ExperimentConfig, experiment: str) -> ExperimentConfig:
    d = {**cfg.__dict__, "experiment": experiment}
    return ExperimentConfig(**d)


def summarize(rows: Iterable[RunRow]) -> list[EvalResult]:
    """Group per-repetition rows into mean/std results, in first-seen order.

    Autofaces rows are grouped regardless of how many components each
    repetition could keep.
    """
    groups: dict[tuple, list[RunRow]] = {}
    for r in rows:
        kept = r.features_kept if r.method == PV else None
        groups.setdefault((r.experiment, r.dataset, r.method, r.clusters_formed, kept), []).append(r)
    out = []
    for (exp, dataset, method, formed, _), members in groups.items():
        kepts = sorted({m.features_kept for m in members})
        kept_str = str(kepts[0]) if len(kepts) == 1 else f"{kepts[0]}..{kepts[-1]}"
        out.append(EvalResult(
            exp, dataset, method, formed, kept_str,
            tuple(m.accuracy for m in sorted(members, key=lambda m: m.repetition)),
        ))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def rows_to_csv(rows: Iterable[RunRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def summary_to_csv(results: Iterable[EvalResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for r in results:
        w.writerow([
            r.experiment, r.dataset, r.method, _fmt(r.clusters_formed), r.features_kept,
            len(r.accuracies), _fmt(r.mean), _fmt(r.std),
        ])
    return buf.getvalue()
