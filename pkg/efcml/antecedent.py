"""Evolution of the rule antecedents in the product space."""
from dataclasses import dataclass
from enum import Enum
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from .const import COV_FLOOR_SCALE, COV_FLOOR_TRIGGER
from .exceptions import DimensionMismatchError, IndexOutOfRangeError
from .rulebase import Rule, RuleBase, mahalanobis

_LOGGER = logging.getLogger(__name__)


class OutcomeKind(str, Enum):
    """Structural effect of one sample on the rule base."""

    EVOLVED = "evolved"
    UPDATED = "updated"
    MERGED = "merged"


@dataclass(frozen=True)
class EvolutionCheck:
    """Result of the rule evolution criterion for one vector."""

    win: int
    distance: float
    threshold: float
    fires: bool


@dataclass(frozen=True)
class EvolutionOutcome:
    """What happened to the rule base for one sample."""

    kind: OutcomeKind
    index: int
    min_distance: float = 0.0
    threshold: float = math.inf
    removed: Optional[int] = None


def tolerance_radius(fac: float, dimension: int, support: int, m: int) -> float:
    """Tolerance region of a rule with the given support."""
    return fac * dimension ** (1.0 / math.sqrt(2.0)) / (1.0 - 1.0 / (support + 1)) ** m


def _distances(rule_base: RuleBase, z: np.ndarray) -> np.ndarray:
    if z.shape[0] not in (rule_base.dimension, rule_base.num_inputs):
        raise DimensionMismatchError(
            f"Vector of length {z.shape[0]} fits neither the product space "
            f"({rule_base.dimension}) nor the input space ({rule_base.num_inputs})"
        )
    return np.array([mahalanobis(rule, z) for rule in rule_base.rules])


def evolution_check(rule_base: RuleBase, z: np.ndarray) -> EvolutionCheck:
    """Evaluate the rule evolution criterion for z.

    Product-space vectors are compared with the full rule Gaussians, input
    vectors with their input-space marginals; the dimension term follows the
    length of z.
    """
    if not rule_base.rules:
        raise IndexOutOfRangeError("Evolution check needs at least one rule")
    z = np.asarray(z, dtype=np.float64)
    distances = _distances(rule_base, z)
    win = int(np.argmin(distances))
    threshold = tolerance_radius(
        rule_base.config.fac,
        z.shape[0],
        rule_base.rules[win].support,
        rule_base.config.m,
    )
    distance = float(distances[win])
    return EvolutionCheck(
        win=win, distance=distance, threshold=threshold, fires=distance > threshold
    )


def evolve_rule(rule_base: RuleBase, x: np.ndarray, y: np.ndarray) -> int:
    """Append a rule centered at (x, y) and return its index."""
    cfg = rule_base.config
    z = np.concatenate((np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)))
    if z.shape[0] != rule_base.dimension:
        raise DimensionMismatchError(
            f"Sample of length {z.shape[0]} does not fit dimension {rule_base.dimension}"
        )

    widths = rule_base.tracker.initial_widths(
        cfg.eps_fraction, cfg.sigma_floor_fraction
    )
    if rule_base.rules:
        nearest = int(np.argmin(_distances(rule_base, z)))
        consequents = rule_base.rules[nearest].consequents.copy()
    else:
        nearest = None
        consequents = np.zeros((rule_base.num_inputs + 1, rule_base.num_labels))

    rule = Rule(
        center=z,
        inv_cov=np.diag(1.0 / widths),
        consequents=consequents,
        support=1,
        wmean_y=np.asarray(y, dtype=np.float64).copy(),
        weight_sum=1.0,
        p_init=cfg.p_init,
    )
    index = rule_base.add_rule(rule)
    rule_base.evolutions += 1
    _LOGGER.debug(
        "Evolved rule %s (consequents from rule %s), %s rules now",
        index,
        nearest,
        rule_base.num_rules,
    )
    return index


def _condition_precision(inv_cov: np.ndarray, span: np.ndarray) -> np.ndarray:
    """Keep an updated inverse covariance symmetric positive definite."""
    eigenvalues = linalg.eigvalsh(inv_cov)
    if eigenvalues[0] > COV_FLOOR_TRIGGER:
        _LOGGER.debug("Covariance floor applied, smallest precision %s", eigenvalues[0])
        covariance = linalg.inv(inv_cov) + np.diag(COV_FLOOR_SCALE * span**2)
        inv_cov = linalg.inv(covariance)
    elif eigenvalues[0] <= 0.0:
        _LOGGER.warning(
            "Inverse covariance lost definiteness (eigenvalue %s), clipping", eigenvalues[0]
        )
        values, vectors = linalg.eigh(inv_cov)
        values = np.maximum(values, values[-1] * 1e-12)
        inv_cov = (vectors * values) @ vectors.T
    return (inv_cov + inv_cov.T) / 2.0


def update_winner(rule_base: RuleBase, win: int, z: np.ndarray) -> Rule:
    """Move the winning rule towards z and update its inverse covariance.

    The covariance recursion is Σ_k = (k-1)/k Σ_{k-1} + (k-1)/k² δδᵀ with
    δ = z - c_old, inverted in place with the Sherman-Morrison identity.
    """
    if not 0 <= win < rule_base.num_rules:
        raise IndexOutOfRangeError(f"Rule {win} does not exist")
    z = np.asarray(z, dtype=np.float64)
    rule = rule_base.rules[win]
    if z.shape[0] != rule.center.shape[0]:
        raise DimensionMismatchError(
            f"Vector of length {z.shape[0]} does not fit rule space {rule.center.shape[0]}"
        )

    rule.support += 1
    support = rule.support
    delta = z - rule.center
    rule.center = rule.center + delta / support

    projected = rule.inv_cov @ delta
    inv_cov = (support / (support - 1.0)) * (
        rule.inv_cov - np.outer(projected, projected) / (support + delta @ projected)
    )
    span = rule_base.tracker.span
    if span.shape[0] != inv_cov.shape[0]:
        span = span[: inv_cov.shape[0]]
    rule.inv_cov = _condition_precision((inv_cov + inv_cov.T) / 2.0, span)
    rule.refresh_input_precision()
    return rule


def merge_check(
    rule_base: RuleBase, involving: Optional[int] = None
) -> Optional[Tuple[int, int]]:
    """Return the closest pair of mutually overlapping rules, if any.

    Two rules overlap when each center lies within ``merge_kappa`` of the
    other under the other's inverse covariance. With ``involving`` only pairs
    containing that rule are checked.
    """
    kappa = rule_base.config.merge_kappa
    rules = rule_base.rules
    if involving is None:
        pairs = [(i, k) for i in range(len(rules)) for k in range(i + 1, len(rules))]
    else:
        pairs = [tuple(sorted((involving, k))) for k in range(len(rules)) if k != involving]

    candidates: List[Tuple[float, int, int]] = []
    for i, k in pairs:
        forward = mahalanobis(rules[i], rules[k].center)
        backward = mahalanobis(rules[k], rules[i].center)
        if forward <= kappa and backward <= kappa:
            candidates.append((max(forward, backward), i, k))
    if not candidates:
        return None
    _, i, k = min(candidates)
    return i, k


def consequent_similarity(first: np.ndarray, second: np.ndarray) -> float:
    """Mean similarity of consequent hyperplanes from their dihedral angles."""
    similarities = []
    for column in range(first.shape[1]):
        normal_first = np.append(first[:-1, column], -1.0)
        normal_second = np.append(second[:-1, column], -1.0)
        cosine = normal_first @ normal_second / (
            np.linalg.norm(normal_first) * np.linalg.norm(normal_second)
        )
        angle = math.acos(float(np.clip(cosine, -1.0, 1.0)))
        similarities.append(1.0 - angle / math.pi)
    return float(np.mean(similarities))


def merge_consequents(
    kept: np.ndarray, other: np.ndarray, support_kept: int, support_other: int, rho: float
) -> np.ndarray:
    """Blend consequents towards the other rule by its support share times rho."""
    share = support_other / (support_kept + support_other)
    return kept + share * rho * (other - kept)


def _pool_statistics(first: Rule, second: Rule) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    total = first.weight_sum + second.weight_sum
    if total <= 0.0:
        return first.wmean_y.copy(), first.wvar_y.copy(), first.wcov_y.copy(), total
    mean = (first.weight_sum * first.wmean_y + second.weight_sum * second.wmean_y) / total
    shift = first.wmean_y - second.wmean_y
    factor = first.weight_sum * second.weight_sum / total
    cov = first.wcov_y + second.wcov_y + factor * np.outer(shift, shift)
    cov = (cov + cov.T) / 2.0
    return mean, np.diag(cov).copy(), cov, total


def merge_rules(rule_base: RuleBase, i: int, k: int) -> int:
    """Fuse rule k into rule i, remove rule k and return the kept rule's index."""
    count = rule_base.num_rules
    if i == k or not (0 <= i < count and 0 <= k < count):
        raise IndexOutOfRangeError(f"Cannot merge rules {i} and {k} of {count}")

    kept, other = rule_base.rules[i], rule_base.rules[k]
    support = kept.support + other.support

    overlap = math.exp(-0.5 * mahalanobis(kept, other.center) ** 2)
    consistency = consequent_similarity(kept.consequents, other.consequents)
    rho = 0.0 if consistency < overlap else 1.0
    consequents = merge_consequents(
        kept.consequents, other.consequents, kept.support, other.support, rho
    )

    shift = kept.center - other.center
    covariance = (
        kept.support * linalg.inv(kept.inv_cov) + other.support * linalg.inv(other.inv_cov)
    ) / support + (kept.support * other.support / support**2) * np.outer(shift, shift)
    center = (kept.support * kept.center + other.support * other.center) / support
    inv_cov = linalg.inv(covariance)

    prior = np.eye(kept.inv_hessian.shape[0]) / kept.p_init
    information = linalg.inv(kept.inv_hessian) + linalg.inv(other.inv_hessian) - prior
    inv_hessian = linalg.inv((information + information.T) / 2.0)
    mean, var, cov, weight_sum = _pool_statistics(kept, other)

    merged = Rule(
        center=center,
        inv_cov=(inv_cov + inv_cov.T) / 2.0,
        consequents=consequents,
        support=support,
        inv_hessian=(inv_hessian + inv_hessian.T) / 2.0,
        info_matrix=kept.info_matrix + other.info_matrix,
        hessian=kept.hessian + other.hessian - prior,
        wmean_y=mean,
        wvar_y=var,
        wcov_y=cov,
        weight_sum=weight_sum,
        p_init=kept.p_init,
    )
    rule_base.rules[i] = merged
    del rule_base.rules[k]
    rule_base.merges += 1

    index = i if i < k else i - 1
    _LOGGER.debug(
        "Merged rule %s into rule %s (rho=%s, support=%s), %s rules now",
        k,
        i,
        rho,
        support,
        rule_base.num_rules,
    )
    return index
