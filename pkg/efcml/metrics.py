"""Average precision and partial accuracy, batch and accumulated."""
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DimensionMismatchError, NoPositiveLabelError


@dataclass(frozen=True)
class MetricState:
    """Accumulated evaluation measures of a prequential run.

    ``ap_count`` counts the samples that entered the average precision, which
    skips samples without any positive label.
    """

    num_labels: int
    ap: float = 0.0
    pa: float = 0.0
    n: int = 0
    ap_count: int = 0


def _pair(first: np.ndarray, second: np.ndarray):
    first = np.asarray(first, dtype=np.float64).ravel()
    second = np.asarray(second, dtype=np.float64).ravel()
    if first.shape != second.shape:
        raise DimensionMismatchError(
            f"Vectors of length {first.shape[0]} and {second.shape[0]} differ"
        )
    return first, second


def label_ranks(yhat: np.ndarray) -> np.ndarray:
    """1-based rank of every label in the descending order of yhat.

    Ties keep the lower label index first.
    """
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    order = np.lexsort((np.arange(yhat.shape[0]), -yhat))
    ranks = np.empty(yhat.shape[0], dtype=np.int64)
    ranks[order] = np.arange(1, yhat.shape[0] + 1)
    return ranks


def ap_contribution(yhat: np.ndarray, y: np.ndarray) -> float:
    """Average precision of one sample's label ranking."""
    yhat, y = _pair(yhat, y)
    positives = np.flatnonzero(y == 1)
    if positives.size == 0:
        raise NoPositiveLabelError("Average precision needs at least one positive label")
    ranks = label_ranks(yhat)
    scores = yhat[positives]
    total = 0.0
    for label in positives:
        above = np.count_nonzero(scores >= yhat[label])
        total += above / ranks[label]
    return float(total / positives.size)


def pa_contribution(ycrisp: np.ndarray, y: np.ndarray) -> int:
    """Number of label positions predicted correctly."""
    ycrisp, y = _pair(ycrisp, y)
    return int(np.count_nonzero(ycrisp == y))


def update_ap(state: MetricState, contribution: float) -> MetricState:
    """Fold one sample's average precision into the running mean."""
    count = state.ap_count
    return replace(
        state,
        ap=(state.ap * count + contribution) / (count + 1),
        ap_count=count + 1,
    )


def update_pa(state: MetricState, matches: int) -> MetricState:
    """Fold one sample's matching label count into the partial accuracy."""
    labels = state.num_labels
    return replace(
        state,
        pa=(state.pa * labels * state.n + matches) / (labels * (state.n + 1)),
        n=state.n + 1,
    )


def update_metrics(
    state: MetricState, yhat: np.ndarray, ycrisp: np.ndarray, y: np.ndarray
) -> MetricState:
    """Update both measures for one evaluated sample."""
    state = update_pa(state, pa_contribution(ycrisp, y))
    try:
        return update_ap(state, ap_contribution(yhat, y))
    except NoPositiveLabelError:
        return state


def batch_average_precision(yhat: np.ndarray, labels: np.ndarray) -> float:
    """Mean average precision over the samples with a positive label."""
    contributions = [
        ap_contribution(row_hat, row)
        for row_hat, row in zip(np.asarray(yhat), np.asarray(labels))
        if np.any(np.asarray(row) == 1)
    ]
    return float(np.mean(contributions)) if contributions else 0.0


def batch_partial_accuracy(ycrisp: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of correctly predicted label positions."""
    ycrisp = np.asarray(ycrisp)
    labels = np.asarray(labels)
    if ycrisp.shape != labels.shape:
        raise DimensionMismatchError(f"Shapes {ycrisp.shape} and {labels.shape} differ")
    if labels.size == 0:
        return 0.0
    return float(np.mean(ycrisp == labels))
