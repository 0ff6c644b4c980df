"""Training diagnostics, all computed on the evaluation path (no mixing):
per-class accuracy, classification ratio, per-sample feature-gradient
norms, and the train/test feature-deviation metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape
from .imbalance import Dataset
from .model import ModelParams, TapedModel, predict
from .rng import RngState

__all__ = ["EpochMetrics", "per_class_accuracy", "classification_ratio",
           "grad_norms_per_class", "feature_deviation", "snapshot", "eval_features"]


@dataclass
class EpochMetrics:
    epoch: int
    per_class_train_acc: np.ndarray
    per_class_test_acc: np.ndarray
    classification_ratio: np.ndarray
    grad_norm_per_class: np.ndarray
    feature_deviation: np.ndarray
    mean_train_loss: float


def per_class_accuracy(params: ModelParams, data: Dataset) -> np.ndarray:
    """Fraction of class-c samples predicted as c, per class."""
    pred = predict(params, data.features)
    acc = np.empty(data.num_classes)
    for c in range(data.num_classes):
        mask = data.labels == c
        if not mask.any():
            raise ValueError(f"class {c} has no samples")
        acc[c] = np.mean(pred[mask] == c)
    return acc


def classification_ratio(params: ModelParams, train: Dataset) -> np.ndarray:
    """(number of train samples predicted as c) / N_c, as a fraction."""
    pred = predict(params, train.features)
    predicted_as = np.bincount(pred, minlength=train.num_classes)
    return predicted_as / train.counts


def grad_norms_per_class(params: ModelParams, train: Dataset, batch_size: int = 512) -> np.ndarray:
    """Mean L2 norm, per class, of each sample's own loss gradient taken
    at its intermediate feature g(x).

    Per-sample losses are unweighted and unmixed; samples do not interact
    in the forward pass, so differentiating the batch-mean loss and
    rescaling by the batch size recovers the per-sample gradients.
    """
    C = train.num_classes
    sums = np.zeros(C)
    for start in range(0, train.size, batch_size):
        xb = train.features[start:start + batch_size]
        yb = train.labels[start:start + batch_size]
        B = len(yb)
        tape = Tape()
        model = TapedModel(params, tape)
        z = model.features_g(xb)
        scores = model.logits(model.head_h(z))
        loss = tape.softmax_xent(scores, yb, np.ones(B))
        adjoints = tape.backward(loss)
        per_sample = adjoints[z.idx] * B
        norms = np.linalg.norm(per_sample, axis=1)
        np.add.at(sums, yb, norms)
    return sums / train.counts


def eval_features(params: ModelParams, data: Dataset, normalize: bool = False) -> np.ndarray:
    """Final features f(x) for every sample, optionally L2-normalized per row."""
    tape = Tape()
    model = TapedModel(params, tape)
    f = model.head_h(model.features_g(data.features)).value
    if normalize:
        norms = np.linalg.norm(f, axis=1, keepdims=True)
        f = f / np.where(norms == 0.0, 1.0, norms)
    return f


def feature_deviation(params: ModelParams, train: Dataset, test: Dataset,
                      R: int, K: int, rng: RngState,
                      exhaustive: bool = False) -> np.ndarray:
    """Mean distance between subsampled train feature means and the test
    feature mean, per class, on L2-normalized features.

    Each of R rounds draws K train samples of the class without
    replacement; subsampling equalizes the estimation variance across
    class sizes.  With ``exhaustive`` the rounds are replaced by an
    enumeration of every size-K subset (only viable for tiny classes).
    """
    if K < 1 or R < 1:
        raise ValueError(f"need R >= 1 and K >= 1, got R={R}, K={K}")
    f_train = eval_features(params, train, normalize=True)
    f_test = eval_features(params, test, normalize=True)
    gen = rng.generator()
    dis = np.empty(train.num_classes)
    for c in range(train.num_classes):
        train_idx = np.flatnonzero(train.labels == c)
        if K > len(train_idx):
            raise ValueError(f"class {c}: K={K} exceeds train count {len(train_idx)}")
        test_mask = test.labels == c
        if not test_mask.any():
            raise ValueError(f"class {c} missing from test set")
        test_mean = f_test[test_mask].mean(axis=0)
        if exhaustive:
            import itertools
            subsets = [np.array(s) for s in itertools.combinations(train_idx, K)]
        else:
            subsets = [gen.choice(train_idx, size=K, replace=False) for _ in range(R)]
        total = sum(np.linalg.norm(f_train[sub].mean(axis=0) - test_mean)
                    for sub in subsets)
        dis[c] = total / len(subsets)
    return dis


def mean_eval_loss(params: ModelParams, data: Dataset) -> float:
    """Mean unweighted cross-entropy over the set, no mixing."""
    tape = Tape()
    model = TapedModel(params, tape)
    scores = model.logits(model.head_h(model.features_g(data.features)))
    loss = tape.softmax_xent(scores, data.labels, np.ones(data.size))
    return float(loss.value)


def snapshot(params: ModelParams, train: Dataset, test: Dataset, epoch: int,
             R: int, rng: RngState) -> EpochMetrics:
    """All diagnostics in one record; K is the smallest train class size."""
    K = int(train.counts.min())
    return EpochMetrics(
        epoch=epoch,
        per_class_train_acc=per_class_accuracy(params, train),
        per_class_test_acc=per_class_accuracy(params, test),
        classification_ratio=classification_ratio(params, train),
        grad_norm_per_class=grad_norms_per_class(params, train),
        feature_deviation=feature_deviation(params, train, test, R=R, K=K, rng=rng),
        mean_train_loss=mean_eval_loss(params, train),
    )
