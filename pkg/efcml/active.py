"""Online active learning: which stream samples get their labels requested."""
from dataclasses import dataclass, field
import logging
from typing import Optional, Tuple

import numpy as np

from .antecedent import evolution_check
from .config import LearnConfig
from .const import (
    AL_LABELS,
    AL_RANDOM,
    AL_SAMPLES,
    CRITERION_INSTABILITY,
    CRITERION_NOVELTY,
    CRITERION_RANDOM,
    CRITERION_UNCERTAINTY,
    VERDICT_FULL,
    VERDICT_NONE,
    VERDICT_PARTIAL,
)
from .exceptions import DimensionMismatchError
from .rulebase import RuleBase, normalized_activations, regressor

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectionDecision:
    """Outcome of the selection step for one stream sample.

    ``trigger`` keeps the firing criterion even when the budget rejected the
    request. ``spend_after`` is the selected fraction once the sample has
    been accounted for.
    """

    verdict: str
    trigger: Tuple[str, ...] = ()
    labels: Tuple[int, ...] = ()
    spend_after: float = 0.0

    @property
    def selected(self) -> bool:
        """Whether labels were requested."""
        return self.verdict != VERDICT_NONE

    def label_mask(self, num_labels: int) -> Optional[np.ndarray]:
        """Boolean mask of the requested labels, None for full annotation."""
        if self.verdict != VERDICT_PARTIAL:
            return None
        mask = np.zeros(num_labels, dtype=bool)
        mask[list(self.labels)] = True
        return mask


@dataclass
class BudgetState:
    """Spend accounting of an active learner.

    In labels mode ``seen`` and ``selected`` count labels (K per sample), in
    samples mode they count samples.
    """

    mode: str
    budget: float
    num_labels: int
    seen: int = 0
    selected: int = 0
    adapt: float = 1.0
    exhausted: bool = field(default=False, repr=False)

    @property
    def unit(self) -> int:
        """Cost of one fully annotated sample."""
        return self.num_labels if self.mode == AL_LABELS else 1

    @property
    def fraction(self) -> float:
        """Selected fraction so far."""
        return self.selected / self.seen if self.seen else 0.0


def gate(state: BudgetState, decision_cost: int) -> bool:
    """Whether spending ``decision_cost`` on the next sample stays within budget."""
    if decision_cost < 1:
        raise ValueError(f"Decision cost must be positive, got {decision_cost}")
    return (state.selected + decision_cost) / (state.seen + state.unit) <= state.budget


def adapt_thresholds(
    state: BudgetState,
    selected: bool,
    rate: float,
    minimum: float,
    maximum: float,
) -> BudgetState:
    """Tighten the thresholds after a selection, relax them after a skip."""
    factor = 1.0 - rate if selected else 1.0 + rate
    state.adapt = float(np.clip(state.adapt * factor, minimum, maximum))
    return state


def novelty_criterion(rule_base: RuleBase, x: np.ndarray) -> bool:
    """Rule evolution criterion on the input-space part of every rule."""
    return evolution_check(rule_base, np.asarray(x, dtype=np.float64)).fires


def uncertainty_bound(thresh2: float, adapt: float) -> float:
    """Upper end of the band around 0.5 in which an output counts as uncertain."""
    return float(np.clip(0.5 + (thresh2 - 0.5) * adapt, 0.5, 1.0))


def output_uncertainty(yhat: np.ndarray, thresh2: float, adapt: float) -> np.ndarray:
    """Indices of the labels whose outputs lie inside the uncertainty band."""
    yhat = np.asarray(yhat, dtype=np.float64)
    bound = uncertainty_bound(thresh2, adapt)
    return np.flatnonzero((yhat < bound) & (yhat > 1.0 - bound))


def trace_drop(rule_base: RuleBase, x: np.ndarray) -> np.ndarray:
    """Relative trace decrease of every rule's P after an unsupervised update on x.

    P - (Pr)(Pr)ᵀ/(1/ψ + rᵀPr) loses ‖Pr‖²/(1/ψ + rᵀPr) of its trace, so
    P never has to be copied.
    """
    psi = normalized_activations(rule_base, x)
    r = regressor(x)
    drops = np.empty(len(rule_base.rules))
    for index, rule in enumerate(rule_base.rules):
        projected = rule.inv_hessian @ r
        removed = projected @ projected / (1.0 / psi[index] + r @ projected)
        drops[index] = removed / np.trace(rule.inv_hessian)
    return drops


def param_instability(
    rule_base: RuleBase, x: np.ndarray, thresh3: float, adapt: float
) -> bool:
    """Whether x would shrink some rule's parameter uncertainty markedly."""
    return bool(trace_drop(rule_base, x).max() > thresh3 / adapt)


def _cost(state: BudgetState, verdict: str, labels: Tuple[int, ...]) -> int:
    if state.mode == AL_LABELS and verdict == VERDICT_PARTIAL:
        return len(labels)
    return state.unit


def _account(state: BudgetState, cost: int, accepted: bool) -> None:
    state.seen += state.unit
    if accepted:
        state.selected += cost


class ActiveSelector:
    """Criterion-driven sample selection under a labels or samples budget."""

    def __init__(self, mode: str, config: LearnConfig, num_labels: int) -> None:
        """Initialize."""
        if mode not in (AL_LABELS, AL_SAMPLES):
            raise ValueError(f"Unsupported selection mode {mode}")
        self.config = config
        self.state = BudgetState(mode=mode, budget=config.budget, num_labels=num_labels)

    def _first_firing(
        self, rule_base: RuleBase, x: np.ndarray, yhat: np.ndarray
    ) -> Tuple[Optional[str], Tuple[int, ...]]:
        cfg = self.config
        adapt = self.state.adapt
        for criterion in (CRITERION_NOVELTY, CRITERION_UNCERTAINTY, CRITERION_INSTABILITY):
            if criterion not in cfg.criteria:
                continue
            if criterion == CRITERION_NOVELTY and novelty_criterion(rule_base, x):
                return criterion, ()
            if criterion == CRITERION_UNCERTAINTY:
                uncertain = output_uncertainty(yhat, cfg.thresh2, adapt)
                if uncertain.size:
                    return criterion, tuple(int(label) for label in uncertain)
            if criterion == CRITERION_INSTABILITY and param_instability(
                rule_base, x, cfg.thresh3, adapt
            ):
                return criterion, ()
        return None, ()

    def select(
        self, rule_base: RuleBase, x: np.ndarray, yhat: np.ndarray
    ) -> SelectionDecision:
        """Decide on one sample, account for it and adapt the thresholds."""
        yhat = np.asarray(yhat, dtype=np.float64)
        if yhat.shape != (self.state.num_labels,):
            raise DimensionMismatchError(
                f"Expected {self.state.num_labels} outputs, got shape {yhat.shape}"
            )
        state = self.state
        criterion, labels = self._first_firing(rule_base, x, yhat)

        verdict = VERDICT_NONE
        if criterion is not None:
            verdict = VERDICT_FULL
            if criterion == CRITERION_UNCERTAINTY and state.mode == AL_LABELS:
                if len(labels) < state.num_labels:
                    verdict = VERDICT_PARTIAL
            if verdict == VERDICT_FULL:
                labels = tuple(range(state.num_labels))

        cost = _cost(state, verdict, labels)
        accepted = criterion is not None and gate(state, cost)
        if criterion is not None and not accepted:
            if not state.exhausted:
                _LOGGER.warning(
                    "Budget %s exhausted, %s request rejected", state.budget, criterion
                )
            state.exhausted = True
            verdict, labels = VERDICT_NONE, ()
        elif accepted:
            state.exhausted = False

        _account(state, cost, accepted)
        cfg = self.config
        adapt_thresholds(state, accepted, cfg.adapt_rate, cfg.adapt_min, cfg.adapt_max)
        _LOGGER.debug(
            "Selection verdict %s (trigger %s), spend %s", verdict, criterion, state.fraction
        )
        return SelectionDecision(
            verdict=verdict,
            trigger=(criterion,) if criterion is not None else (),
            labels=labels,
            spend_after=state.fraction,
        )


class RandomSelector:
    """Uniform random selection with probability equal to the budget."""

    def __init__(self, config: LearnConfig, num_labels: int, seed: int) -> None:
        """Initialize."""
        self.config = config
        self.state = BudgetState(mode=AL_SAMPLES, budget=config.budget, num_labels=num_labels)
        self._rng = np.random.default_rng(seed)

    def select(
        self,
        rule_base: Optional[RuleBase],
        x: np.ndarray,
        yhat: np.ndarray,
    ) -> SelectionDecision:
        """Draw a verdict for one sample; the model arguments are not used."""
        state = self.state
        fires = self._rng.random() < state.budget
        accepted = fires and gate(state, state.unit)
        _account(state, state.unit, accepted)
        return SelectionDecision(
            verdict=VERDICT_FULL if accepted else VERDICT_NONE,
            trigger=(CRITERION_RANDOM,) if fires else (),
            labels=tuple(range(state.num_labels)) if accepted else (),
            spend_after=state.fraction,
        )


def make_selector(mode: str, config: LearnConfig, num_labels: int, seed: int):
    """Selector for an active learning mode."""
    if mode == AL_RANDOM:
        return RandomSelector(config, num_labels, seed)
    return ActiveSelector(mode, config, num_labels)
