"""Consequent learning with weighted least squares, Lasso and label correlation."""
from dataclasses import dataclass
import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .config import LearnConfig
from .const import (
    ACTIVATION_FLOOR,
    DEGENERATE_VARIANCE,
    HESSIAN_STATISTICS,
    RIDGE_CONDITION_TARGET,
)
from .exceptions import DimensionMismatchError, NonFiniteInputError, SingularHessianError
from .rulebase import Rule, regressor

_LOGGER = logging.getLogger(__name__)

IterationCallback = Callable[[int, np.ndarray], None]


@dataclass(frozen=True)
class ObjectiveTerms:
    """Value of the consequent objective of one rule, split by term."""

    wls: float
    lasso: float
    corr: float
    total: float


def _require_finite(*arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NonFiniteInputError("Non-finite values reached the consequent learner")


def weighted_correlation(
    labels_c: np.ndarray, labels_d: np.ndarray, weights: np.ndarray
) -> float:
    """Weighted correlation coefficient of two label columns.

    Returns 0 when either weighted variance is degenerate.
    """
    labels_c = np.asarray(labels_c, dtype=np.float64)
    labels_d = np.asarray(labels_d, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if not labels_c.shape == labels_d.shape == weights.shape or labels_c.size == 0:
        raise DimensionMismatchError("Label columns and weights must have equal length")

    total = weights.sum()
    centered_c = labels_c - weights @ labels_c / total
    centered_d = labels_d - weights @ labels_d / total
    var_c = weights @ centered_c**2
    var_d = weights @ centered_d**2
    if var_c < DEGENERATE_VARIANCE or var_d < DEGENERATE_VARIANCE:
        return 0.0
    corr = (weights @ (centered_c * centered_d)) / math.sqrt(var_c * var_d)
    return float(np.clip(corr, -1.0, 1.0))


def anti_correlation(wvar: np.ndarray, wcov: np.ndarray) -> np.ndarray:
    """Anti-correlation matrix 1 - corr from unnormalized weighted statistics."""
    wvar = np.asarray(wvar, dtype=np.float64)
    valid = wvar >= DEGENERATE_VARIANCE
    scale = np.sqrt(np.where(valid, wvar, 1.0))
    corr = np.asarray(wcov, dtype=np.float64) / np.outer(scale, scale)
    corr = np.where(np.outer(valid, valid), np.clip(corr, -1.0, 1.0), 0.0)
    np.fill_diagonal(corr, np.where(valid, 1.0, 0.0))
    result = 1.0 - corr
    return (result + result.T) / 2.0


def batch_label_statistics(
    labels: np.ndarray, weights: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Weighted label mean and unnormalized covariance of an N×K label matrix."""
    labels = np.asarray(labels, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    total = float(weights.sum())
    mean = weights @ labels / total
    centered = labels - mean
    cov = (centered * weights[:, None]).T @ centered
    return mean, (cov + cov.T) / 2.0, total


def objective_terms(
    consequents: np.ndarray,
    regressors: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    anti_corr: np.ndarray,
    alpha: float,
    beta: float,
) -> ObjectiveTerms:
    """Objective of one rule on a batch.

    The correlation term carries the same factor 1/2 as the least squares
    term so that the gradient below is its exact derivative.
    """
    residuals = np.asarray(labels, dtype=np.float64) - regressors @ consequents
    wls = 0.5 * float(np.asarray(weights) @ np.sum(residuals**2, axis=1))
    lasso = alpha * float(np.abs(consequents[:-1]).sum())
    corr = 0.5 * beta * float(np.trace(anti_corr @ consequents.T @ consequents))
    return ObjectiveTerms(wls=wls, lasso=lasso, corr=corr, total=wls + lasso + corr)


def _surrogate(
    consequents: np.ndarray,
    hessian: np.ndarray,
    info: np.ndarray,
    anti_corr: np.ndarray,
    alpha: float,
    beta: float,
) -> float:
    """Objective up to a constant, from sufficient statistics only."""
    quadratic = 0.5 * np.sum(consequents * (hessian @ consequents))
    linear = np.sum(consequents * info)
    corr = 0.5 * beta * np.sum((consequents @ anti_corr) * consequents)
    lasso = alpha * np.abs(consequents[:-1]).sum()
    return float(quadratic - linear + corr + lasso)


def gradient(
    consequents: np.ndarray,
    hessian: np.ndarray,
    info: np.ndarray,
    anti_corr: np.ndarray,
    beta: float,
) -> np.ndarray:
    """Gradient of the smooth part of the objective."""
    if (
        hessian.shape != (consequents.shape[0],) * 2
        or info.shape != consequents.shape
        or anti_corr.shape != (consequents.shape[1],) * 2
    ):
        raise DimensionMismatchError(
            f"Shapes do not agree: W {consequents.shape}, hessian {hessian.shape}, "
            f"info {info.shape}, A {anti_corr.shape}"
        )
    return hessian @ consequents - info + beta * consequents @ anti_corr


def _lipschitz_value(largest: float, anti_corr: np.ndarray, beta: float) -> float:
    value = largest + linalg.eigvalsh(beta * anti_corr)[-1]
    if not math.isfinite(value) or value <= 0.0:
        raise NonFiniteInputError(f"Invalid Lipschitz constant from eigenvalue sum {value}")
    return math.sqrt(value)


def lipschitz(hessian: np.ndarray, anti_corr: np.ndarray, beta: float) -> float:
    """Step constant sqrt(λmax(H) + λmax(βA))."""
    return _lipschitz_value(linalg.eigvalsh(hessian)[-1], anti_corr, beta)


def soft_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    """Entrywise shrinkage towards zero; the intercept row is left untouched."""
    values = np.asarray(values, dtype=np.float64)
    shrunk = np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)
    if values.ndim == 2:
        shrunk[-1] = values[-1]
    return shrunk


def ridge_parameter(hessian: np.ndarray) -> float:
    """Ridge term used when the weighted Hessian is badly conditioned."""
    eigenvalues = linalg.eigvalsh(hessian)
    largest = eigenvalues[-1]
    if largest <= 0.0:
        return 1.0
    if eigenvalues[0] <= 0.0 or largest / eigenvalues[0] > RIDGE_CONDITION_TARGET:
        return largest / RIDGE_CONDITION_TARGET
    return 0.0


@dataclass(frozen=True)
class StepSetup:
    """Step size and effective correlation weight of a proximal solve."""

    step: float
    beta: float


def prepare_step(hessian: np.ndarray, anti_corr: np.ndarray, beta: float) -> StepSetup:
    """Compute the proximal step and keep the smooth part convex.

    When λmin(H) + β·λmin(A) is not positive the correlation weight is reduced
    so that the sum equals λmin(H) / 2.
    """
    eigenvalues = linalg.eigvalsh(hessian)
    anti_smallest = linalg.eigvalsh(anti_corr)[0]
    effective = beta
    if beta > 0.0 and anti_smallest < 0.0 and eigenvalues[0] + beta * anti_smallest <= 0.0:
        effective = max(eigenvalues[0], 0.0) / (2.0 * abs(anti_smallest))
        _LOGGER.debug("Correlation weight reduced from %s to %s", beta, effective)
    return StepSetup(
        step=1.0 / _lipschitz_value(eigenvalues[-1], anti_corr, effective),
        beta=effective,
    )


def proximal_descent(
    consequents: np.ndarray,
    hessian: np.ndarray,
    info: np.ndarray,
    anti_corr: np.ndarray,
    alpha: float,
    setup: StepSetup,
    max_iters: int,
    tol: float,
    max_halvings: int,
    columns: Optional[np.ndarray] = None,
    on_iteration: Optional[IterationCallback] = None,
) -> np.ndarray:
    """Proximal gradient iterations with backtracking on the step size.

    ``columns`` restricts the update to a subset of label columns.
    """
    current = np.array(consequents, dtype=np.float64)
    value = _surrogate(current, hessian, info, anti_corr, alpha, setup.beta)
    for iteration in range(max_iters):
        grad = gradient(current, hessian, info, anti_corr, setup.beta)
        step = setup.step
        for _ in range(max_halvings + 1):
            candidate = soft_threshold(current - step * grad, alpha * step)
            if columns is not None:
                candidate[:, ~columns] = current[:, ~columns]
            candidate_value = _surrogate(
                candidate, hessian, info, anti_corr, alpha, setup.beta
            )
            if candidate_value <= value:
                break
            step /= 2.0
        else:
            _LOGGER.debug(
                "Backtracking exhausted after %s halvings at iteration %s",
                max_halvings,
                iteration,
            )
            break

        change = float(np.linalg.norm(candidate - current))
        current, value = candidate, candidate_value
        if on_iteration is not None:
            on_iteration(iteration, current)
        if change < tol:
            break
    return current


def batch_fit(
    regressors: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    cfg: LearnConfig,
    trace: Optional[List[ObjectiveTerms]] = None,
    prior: float = 0.0,
) -> np.ndarray:
    """Fit the consequents of one rule on a batch.

    ``regressors`` is N×(p+1) with the intercept column last, ``labels`` is
    N×K and ``weights`` holds the rule's Ψ for every sample. ``prior`` adds
    prior·I to the Hessian, shrinking towards zero like the recursive
    estimator started from P = I/prior. When ``trace`` is given, the
    objective terms of every accepted iteration are appended.
    """
    regressors = np.asarray(regressors, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    _require_finite(regressors, labels, weights)
    if (
        regressors.ndim != 2
        or labels.ndim != 2
        or not regressors.shape[0] == labels.shape[0] == weights.shape[0]
        or regressors.shape[0] == 0
    ):
        raise DimensionMismatchError(
            f"Batch shapes do not agree: R {regressors.shape}, Y {labels.shape}, "
            f"weights {weights.shape}"
        )

    hessian = regressors.T @ (regressors * weights[:, None])
    hessian = hessian + prior * np.eye(hessian.shape[0])
    info = regressors.T @ (labels * weights[:, None])
    _, cov, _ = batch_label_statistics(labels, weights)
    anti_corr = anti_correlation(np.diag(cov), cov)

    gamma = ridge_parameter(hessian)
    if gamma > 0.0:
        _LOGGER.debug("Ridge term %s for a badly conditioned Hessian", gamma)
    try:
        start = linalg.solve(
            hessian + gamma * np.eye(hessian.shape[0]), info, assume_a="pos"
        )
    except linalg.LinAlgError as err:
        raise SingularHessianError(f"Regularized solve failed: {err}") from err
    _require_finite(start)

    setup = prepare_step(hessian, anti_corr, cfg.beta)

    def _record(iteration: int, consequents: np.ndarray) -> None:
        trace.append(
            objective_terms(
                consequents, regressors, labels, weights, anti_corr, cfg.alpha, setup.beta
            )
        )

    if trace is not None:
        trace.append(
            objective_terms(
                start, regressors, labels, weights, anti_corr, cfg.alpha, setup.beta
            )
        )
    return proximal_descent(
        start,
        hessian,
        info,
        anti_corr,
        cfg.alpha,
        setup,
        cfg.max_prox_iters,
        cfg.prox_tol,
        cfg.max_halvings,
        on_iteration=_record if trace is not None else None,
    )


def _masked(values: np.ndarray, label_mask: Optional[np.ndarray]) -> np.ndarray:
    if label_mask is None:
        return values
    return np.where(label_mask, values, 0.0)


def rfwls_step(
    rule: Rule,
    r: np.ndarray,
    y: np.ndarray,
    psi: float,
    label_mask: Optional[np.ndarray] = None,
) -> Rule:
    """One recursive fuzzily weighted least squares update.

    One Kalman gain is shared by all label columns; columns outside
    ``label_mask`` keep their consequents.
    """
    r = np.asarray(r, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _require_finite(r, y)
    psi = max(float(psi), ACTIVATION_FLOOR)

    projected = rule.inv_hessian @ r
    gain = projected / (1.0 / psi + r @ projected)
    error = _masked(y - r @ rule.consequents, label_mask)
    rule.consequents = rule.consequents + np.outer(gain, error)
    inv_hessian = rule.inv_hessian - np.outer(gain, projected)
    rule.inv_hessian = (inv_hessian + inv_hessian.T) / 2.0
    return rule


def update_weighted_stats(
    rule: Rule,
    y: np.ndarray,
    psi: float,
    label_mask: Optional[np.ndarray] = None,
) -> Rule:
    """Fold one sample into the rule's weighted label mean, variance and covariance.

    A sample with unannotated labels leaves the statistics untouched.
    """
    if label_mask is not None and not np.all(label_mask):
        return rule
    y = np.asarray(y, dtype=np.float64)
    psi = max(float(psi), ACTIVATION_FLOOR)
    old_mean = y if rule.weight_sum <= 0.0 else rule.wmean_y
    rule.weight_sum += psi
    new_mean = old_mean + psi * (y - old_mean) / rule.weight_sum

    cov = rule.wcov_y + psi * np.outer(y - old_mean, y - new_mean)
    rule.wcov_y = (cov + cov.T) / 2.0
    rule.wvar_y = rule.wvar_y + psi * (y - old_mean) * (y - new_mean)
    rule.wmean_y = new_mean
    return rule


def update_info_matrix(
    rule: Rule,
    r: np.ndarray,
    y: np.ndarray,
    psi: float,
    label_mask: Optional[np.ndarray] = None,
) -> Rule:
    """Add the weighted outer product r·ψ·yᵀ to the information matrix.

    Columns outside ``label_mask`` take the rule's own output rᵀw instead of
    y, so their current consequents remain the least squares point.
    """
    psi = max(float(psi), ACTIVATION_FLOOR)
    increment = psi * np.outer(r, np.asarray(y, dtype=np.float64))
    if label_mask is not None:
        held = psi * np.outer(r, r @ rule.consequents)
        increment = np.where(label_mask, increment, held)
    rule.info_matrix = rule.info_matrix + increment
    return rule


def update_hessian_statistics(rule: Rule, r: np.ndarray, psi: float) -> Rule:
    """Accumulate the weighted Hessian Rᵀ Q R directly."""
    psi = max(float(psi), ACTIVATION_FLOOR)
    rule.hessian = rule.hessian + psi * np.outer(r, r)
    return rule


def hessian_for(rule: Rule, mode: str) -> np.ndarray:
    """Weighted Hessian of a rule, from P or from the accumulated statistics."""
    if mode == HESSIAN_STATISTICS:
        return rule.hessian
    try:
        hessian = linalg.inv(rule.inv_hessian)
    except linalg.LinAlgError as err:
        raise SingularHessianError(f"Inverse Hessian is singular: {err}") from err
    return (hessian + hessian.T) / 2.0


def incremental_step(
    rule: Rule,
    x: np.ndarray,
    y: np.ndarray,
    psi: float,
    cfg: LearnConfig,
    label_mask: Optional[np.ndarray] = None,
) -> Rule:
    """Single-pass consequent update of one rule for one sample.

    RFWLS, weighted variance and covariance, anti-correlation matrix, Hessian,
    step constant, information matrix and finally the proximal correction, in
    that order. ``y`` must be complete; with ``label_mask`` only the marked
    columns learn from it.
    """
    r = regressor(x)
    rfwls_step(rule, r, y, psi, label_mask)
    update_weighted_stats(rule, y, psi, label_mask)
    update_hessian_statistics(rule, r, psi)
    if cfg.plain_rfwls:
        update_info_matrix(rule, r, y, psi, label_mask)
        return rule

    anti_corr = anti_correlation(rule.wvar_y, rule.wcov_y)
    hessian = hessian_for(rule, cfg.hessian_mode)
    setup = prepare_step(hessian, anti_corr, cfg.beta)
    update_info_matrix(rule, r, y, psi, label_mask)
    rule.consequents = proximal_descent(
        rule.consequents,
        hessian,
        rule.info_matrix,
        anti_corr,
        cfg.alpha,
        setup,
        cfg.max_prox_iters_incremental,
        cfg.prox_tol,
        cfg.max_halvings,
        columns=label_mask,
    )
    _require_finite(rule.consequents)
    return rule
