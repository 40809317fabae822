"""Evolving multi-label fuzzy classifier."""
import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .antecedent import (
    EvolutionOutcome,
    OutcomeKind,
    evolution_check,
    evolve_rule,
    merge_check,
    merge_rules,
    update_winner,
)
from .config import LearnConfig
from .const import METHOD_EFCML, SCHEMA_VERSION
from .consequent import (
    ObjectiveTerms,
    batch_fit,
    batch_label_statistics,
    incremental_step,
)
from .exceptions import (
    DimensionMismatchError,
    EmptyDatasetError,
    MalformedFileError,
    NonFiniteInputError,
    SingularHessianError,
)
from .rulebase import (
    RuleBase,
    normalized_activations,
    predict_continuous,
    predict_crisp,
)

_LOGGER = logging.getLogger(__name__)

DiagnosticsTrace = List[Tuple[int, int, ObjectiveTerms]]


class EvolvingMultiLabelClassifier:
    """Takagi-Sugeno classifier whose rules evolve in the feature-label space."""

    method = METHOD_EFCML

    def __init__(
        self,
        num_inputs: int,
        num_labels: int,
        config: Optional[LearnConfig] = None,
        rule_base: Optional[RuleBase] = None,
    ) -> None:
        """Initialize."""
        if rule_base is None:
            rule_base = RuleBase(num_inputs, num_labels, config or LearnConfig())
        self.rule_base = rule_base

    @property
    def config(self) -> LearnConfig:
        """Hyper-parameters of the classifier."""
        return self.rule_base.config

    @property
    def num_inputs(self) -> int:
        """Feature dimension p."""
        return self.rule_base.num_inputs

    @property
    def num_labels(self) -> int:
        """Label count K."""
        return self.rule_base.num_labels

    @property
    def rule_count(self) -> int:
        """Number of rules."""
        return self.rule_base.num_rules

    def _check_sample(
        self, x: np.ndarray, y: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape != (self.num_inputs,) or y.shape != (self.num_labels,):
            raise DimensionMismatchError(
                f"Sample shapes {x.shape} and {y.shape} do not fit "
                f"p={self.num_inputs}, K={self.num_labels}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise NonFiniteInputError("Sample contains NaN or Inf")
        return x, y

    def _complete_labels(
        self, x: np.ndarray, y: np.ndarray, label_mask: Optional[np.ndarray]
    ) -> np.ndarray:
        """Fill unannotated labels with the model's own crisp predictions."""
        if label_mask is None or label_mask.all():
            return y
        if self.rule_count:
            guess = predict_crisp(predict_continuous(self.rule_base, x))
        else:
            guess = np.zeros(self.num_labels)
        return np.where(label_mask, y, guess).astype(np.float64)

    def update(
        self,
        x: np.ndarray,
        y: np.ndarray,
        label_mask: Optional[np.ndarray] = None,
    ) -> EvolutionOutcome:
        """Learn from one sample.

        With ``label_mask`` only the marked labels count as annotated: the
        others take part in clustering with predicted values, and their
        consequent columns are left alone.
        """
        x, y = self._check_sample(x, y)
        if label_mask is not None:
            label_mask = np.asarray(label_mask, dtype=bool)
            if label_mask.shape != (self.num_labels,):
                raise DimensionMismatchError(
                    f"Label mask of shape {label_mask.shape} for K={self.num_labels}"
                )
            if not label_mask.any():
                return EvolutionOutcome(kind=OutcomeKind.UPDATED, index=-1)

        rule_base = self.rule_base
        y = self._complete_labels(x, y, label_mask)
        z = np.concatenate((x, y))
        rule_base.tracker.update(z)

        if not rule_base.rules:
            index = evolve_rule(rule_base, x, y)
            return EvolutionOutcome(kind=OutcomeKind.EVOLVED, index=index)

        check = evolution_check(rule_base, z)
        newborn = None
        if check.fires:
            index = newborn = evolve_rule(rule_base, x, y)
            kind = OutcomeKind.EVOLVED
        else:
            index = check.win
            update_winner(rule_base, index, z)
            kind = OutcomeKind.UPDATED

        psi = normalized_activations(rule_base, x)
        for position, rule in enumerate(rule_base.rules):
            if position != newborn:
                incremental_step(rule, x, y, psi[position], self.config, label_mask)

        removed = None
        pair = merge_check(rule_base, involving=index)
        if pair is not None:
            kept, other = pair
            if rule_base.rules[other].support > rule_base.rules[kept].support:
                kept, other = other, kept
            index = merge_rules(rule_base, kept, other)
            removed, kind = other, OutcomeKind.MERGED

        return EvolutionOutcome(
            kind=kind,
            index=index,
            min_distance=check.distance,
            threshold=check.threshold,
            removed=removed,
        )

    def fit_initial(
        self,
        features: np.ndarray,
        labels: np.ndarray,
        trace: Optional[DiagnosticsTrace] = None,
    ) -> "EvolvingMultiLabelClassifier":
        """Train on the initial batch.

        One incremental pass shapes the rules, then the consequents of every
        rule are refit on the whole batch with the final activations. Without
        Lasso and correlation weights the incremental estimate is already the
        weighted least squares solution and the refit is skipped.
        """
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64)
        if features.shape[0] == 0:
            raise EmptyDatasetError("The initial batch holds no samples")
        if labels.shape != (features.shape[0], self.num_labels):
            raise DimensionMismatchError(
                f"Labels of shape {labels.shape} for {features.shape[0]} samples "
                f"and K={self.num_labels}"
            )
        for x, y in zip(features, labels):
            self.update(x, y)

        _LOGGER.debug("Initial pass produced %s rules", self.rule_count)
        if not self.config.refits_consequents:
            return self
        return self.refit_consequents(features, labels, trace)

    def refit_consequents(
        self,
        features: np.ndarray,
        labels: np.ndarray,
        trace: Optional[DiagnosticsTrace] = None,
    ) -> "EvolvingMultiLabelClassifier":
        """Refit the consequents of every rule on a batch, keeping the antecedents."""
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64)
        regressors = np.column_stack((features, np.ones(features.shape[0])))
        weights = np.stack([normalized_activations(self.rule_base, x) for x in features])
        for position, rule in enumerate(self.rule_base.rules):
            rule_trace: Optional[List[ObjectiveTerms]] = [] if trace is not None else None
            psi = weights[:, position]
            prior = 1.0 / rule.p_init
            rule.consequents = batch_fit(
                regressors, labels, psi, self.config, rule_trace, prior=prior
            )
            hessian = regressors.T @ (regressors * psi[:, None]) + prior * np.eye(
                regressors.shape[1]
            )
            try:
                inv_hessian = linalg.inv(hessian)
            except linalg.LinAlgError as err:
                raise SingularHessianError(f"Rule {position}: {err}") from err
            rule.hessian = hessian
            rule.inv_hessian = (inv_hessian + inv_hessian.T) / 2.0
            rule.info_matrix = regressors.T @ (labels * psi[:, None])
            mean, cov, total = batch_label_statistics(labels, psi)
            rule.wmean_y, rule.wcov_y, rule.weight_sum = mean, cov, total
            rule.wvar_y = np.diag(cov).copy()
            if trace is not None:
                trace.extend(
                    (position, iteration, terms)
                    for iteration, terms in enumerate(rule_trace)
                )
        return self

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Continuous and crisp outputs for x."""
        yhat = predict_continuous(self.rule_base, x)
        return yhat, predict_crisp(yhat)

    def to_dict(self) -> Dict[str, Any]:
        """Versioned checkpoint with a method tag."""
        return {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "rule_base": self.rule_base.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvolvingMultiLabelClassifier":
        """Rebuild a classifier from ``to_dict`` output."""
        if data.get("method") != cls.method:
            raise MalformedFileError(f"Checkpoint holds method {data.get('method')}")
        rule_base = RuleBase.from_dict(data["rule_base"])
        return cls(rule_base.num_inputs, rule_base.num_labels, rule_base=rule_base)
