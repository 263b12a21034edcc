"""Repeated stratified k-fold evaluation of the one-vs-rest decoder.

Spatial filters and discriminants are refit on the training folds only, so
no test trial leaks into covariance averaging. Per-trial covariances are
precomputed once (they carry no cross-trial information) to keep 25 fold
fits cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csp import stack_covariances
from .epochs import EpochSet
from .pipeline import PipelineConfig, _fit_ovr, features_from_covariance


class CvError(ValueError):
    pass


@dataclass
class CvReport:
    fold_accuracies: np.ndarray  # (k, repeats)
    mean: float
    std: float
    confusion: np.ndarray        # (K, K) counts, rows = true class
    chance_level: float
    seed: int
    classes: tuple
    k: int
    repeats: int
    paradigm: str

    def to_dict(self) -> dict:
        return {
            "paradigm": self.paradigm,
            "classes": list(self.classes),
            "k": self.k,
            "repeats": self.repeats,
            "seed": self.seed,
            "fold_accuracies": self.fold_accuracies.T.tolist(),  # repeats x k
            "mean": self.mean,
            "std": self.std,
            "confusion": self.confusion.tolist(),
            "chance_level": self.chance_level,
        }


def stratified_folds(labels, class_list, k: int, rng: np.random.Generator):
    """Fold index per trial; each class is shuffled then dealt round-robin,
    so per-fold class proportions are preserved within one trial."""
    labels = np.asarray(labels)
    assignment = np.empty(len(labels), dtype=np.int64)
    for cls in class_list:
        idx = np.flatnonzero(labels == cls)
        perm = rng.permutation(idx)
        for pos, trial in enumerate(perm):
            assignment[trial] = pos % k
    return assignment


def cross_validate(
    epochs: EpochSet,
    config: PipelineConfig,
    k: int = 5,
    repeats: int = 5,
    seed: int | None = None,
) -> CvReport:
    """k-fold cross-validation repeated ``repeats`` times with reshuffling.

    Returns per-fold accuracies, their mean and population std, a confusion
    matrix summed over every fold of every repeat, and the 1/K chance level.
    """
    if seed is None:
        seed = config.seed
    class_list = epochs.classes()
    if len(class_list) < 2:
        raise CvError(f"need >= 2 classes, got {class_list}")
    counts = epochs.class_counts()
    for cls in class_list:
        if counts[cls] < k:
            raise CvError(f"class {cls!r} has {counts[cls]} trials, fewer than k={k}")

    labels = np.asarray(epochs.labels)
    covs = stack_covariances(epochs)
    class_index = {cls: i for i, cls in enumerate(class_list)}
    truth = np.array([class_index[lab] for lab in labels])

    n_classes = len(class_list)
    fold_acc = np.zeros((k, repeats))
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)

    for r in range(repeats):
        rng = np.random.default_rng(seed + r)
        assignment = stratified_folds(labels, class_list, k, rng)
        for f in range(k):
            test = assignment == f
            train = ~test
            models = _fit_ovr(covs[train], labels[train], class_list, config)
            scores = np.empty((int(test.sum()), n_classes))
            for col, (csp_model, lda_model) in enumerate(models):
                for row, cov in enumerate(covs[test]):
                    scores[row, col] = lda_model.score(
                        features_from_covariance(csp_model, cov)
                    )
            predicted = scores.argmax(axis=1)
            actual = truth[test]
            fold_acc[f, r] = float(np.mean(predicted == actual))
            for t, p in zip(actual, predicted):
                confusion[t, p] += 1

    return CvReport(
        fold_accuracies=fold_acc,
        mean=float(fold_acc.mean()),
        std=float(fold_acc.std()),
        confusion=confusion,
        chance_level=1.0 / n_classes,
        seed=seed,
        classes=class_list,
        k=k,
        repeats=repeats,
        paradigm=epochs.paradigm,
    )
