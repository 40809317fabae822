"""Takagi-Sugeno rule structures and inference."""
from dataclasses import dataclass, field
import logging
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import linalg

from .config import LearnConfig
from .const import (
    ACTIVATION_FLOOR,
    CRISP_THRESHOLD,
    DEFAULT_P_INIT,
    SCHEMA_VERSION,
)
from .exceptions import DimensionMismatchError, MalformedFileError
from .ingest import update_ranges

_LOGGER = logging.getLogger(__name__)


def regressor(x: np.ndarray) -> np.ndarray:
    """Regressor vector [x_1 ... x_p 1], intercept last."""
    return np.append(np.asarray(x, dtype=np.float64), 1.0)


def marginal_precision(inv_cov: np.ndarray, num_inputs: int) -> np.ndarray:
    """Precision of the first ``num_inputs`` coordinates of a Gaussian.

    Marginalizing restricts the covariance, which for the inverse covariance
    is the Schur complement of the trailing block.
    """
    if inv_cov.shape[0] == num_inputs:
        return inv_cov
    head = inv_cov[:num_inputs, :num_inputs]
    cross = inv_cov[:num_inputs, num_inputs:]
    tail = inv_cov[num_inputs:, num_inputs:]
    result = head - cross @ linalg.solve(tail, cross.T, assume_a="sym")
    return (result + result.T) / 2.0


@dataclass
class Rule:
    """One fuzzy rule with the statistics needed to learn it incrementally.

    The center either lives in input space (length p) or in the product space
    of inputs and labels (length p+K); p and K follow from the shape of the
    consequent matrix, which is (p+1)×K with the intercept in the last row.
    """

    center: np.ndarray
    inv_cov: np.ndarray
    consequents: np.ndarray
    support: int = 1
    inv_hessian: Optional[np.ndarray] = None
    info_matrix: Optional[np.ndarray] = None
    hessian: Optional[np.ndarray] = None
    wmean_y: Optional[np.ndarray] = None
    wvar_y: Optional[np.ndarray] = None
    wcov_y: Optional[np.ndarray] = None
    weight_sum: float = 0.0
    p_init: float = DEFAULT_P_INIT
    input_inv_cov: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.center = np.array(self.center, dtype=np.float64).ravel()
        self.inv_cov = np.array(self.inv_cov, dtype=np.float64, ndmin=2)
        self.consequents = np.array(self.consequents, dtype=np.float64, ndmin=2)

        width = self.consequents.shape[0]
        num_labels = self.consequents.shape[1]
        if self.center.shape[0] not in (width - 1, width - 1 + num_labels):
            raise DimensionMismatchError(
                f"Center of length {self.center.shape[0]} does not fit consequents "
                f"of shape {self.consequents.shape}"
            )
        if self.inv_cov.shape != (self.center.shape[0],) * 2:
            raise DimensionMismatchError(
                f"Inverse covariance of shape {self.inv_cov.shape} does not fit a "
                f"center of length {self.center.shape[0]}"
            )

        if self.inv_hessian is None:
            self.inv_hessian = self.p_init * np.eye(width)
        if self.hessian is None:
            self.hessian = np.eye(width) / self.p_init
        if self.info_matrix is None:
            self.info_matrix = self.consequents / self.p_init
        if self.wmean_y is None:
            self.wmean_y = np.zeros(num_labels)
        if self.wvar_y is None:
            self.wvar_y = np.zeros(num_labels)
        if self.wcov_y is None:
            self.wcov_y = np.zeros((num_labels, num_labels))
        for name in (
            "inv_hessian",
            "hessian",
            "info_matrix",
            "wmean_y",
            "wvar_y",
            "wcov_y",
        ):
            setattr(self, name, np.array(getattr(self, name), dtype=np.float64))
        self.refresh_input_precision()

    @property
    def num_inputs(self) -> int:
        """Input dimension p."""
        return self.consequents.shape[0] - 1

    @property
    def num_labels(self) -> int:
        """Label count K."""
        return self.consequents.shape[1]

    @property
    def input_center(self) -> np.ndarray:
        """Center restricted to the input coordinates."""
        return self.center[: self.num_inputs]

    def refresh_input_precision(self) -> None:
        """Recompute the cached input-space precision after inv_cov changed."""
        self.input_inv_cov = marginal_precision(self.inv_cov, self.num_inputs)

    def copy(self) -> "Rule":
        """Deep copy of the rule."""
        return Rule.from_dict(self.to_dict())

    def to_dict(self) -> Dict[str, Any]:
        """Plain mapping of the rule for JSON checkpoints."""
        return {
            "center": self.center.tolist(),
            "inv_cov": self.inv_cov.tolist(),
            "consequents": self.consequents.tolist(),
            "support": self.support,
            "inv_hessian": self.inv_hessian.tolist(),
            "info_matrix": self.info_matrix.tolist(),
            "hessian": self.hessian.tolist(),
            "wmean_y": self.wmean_y.tolist(),
            "wvar_y": self.wvar_y.tolist(),
            "wcov_y": self.wcov_y.tolist(),
            "weight_sum": self.weight_sum,
            "p_init": self.p_init,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Rule":
        """Rebuild a rule from ``to_dict`` output."""
        return cls(**data)


@dataclass
class SpaceTracker:
    """Observed ranges and running deviation per coordinate (Welford)."""

    ranges: np.ndarray
    mean: np.ndarray
    m2: np.ndarray
    count: int = 0

    @classmethod
    def empty(cls, dimension: int) -> "SpaceTracker":
        """Tracker that has not seen any sample."""
        return cls(
            ranges=np.zeros((dimension, 2)),
            mean=np.zeros(dimension),
            m2=np.zeros(dimension),
        )

    @property
    def dimension(self) -> int:
        """Number of tracked coordinates."""
        return self.mean.shape[0]

    def update(self, z: np.ndarray) -> None:
        """Fold one vector into ranges, mean and squared deviations."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape[0] != self.dimension:
            raise DimensionMismatchError(
                f"Tracker of dimension {self.dimension} got a vector of length {z.shape[0]}"
            )
        self.count += 1
        if self.count == 1:
            self.ranges = np.column_stack((z, z))
        else:
            self.ranges = update_ranges(self.ranges, z)
        delta = z - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (z - self.mean)

    @property
    def span(self) -> np.ndarray:
        """Range width per coordinate, 1 where nothing varied yet."""
        span = self.ranges[:, 1] - self.ranges[:, 0]
        return np.where(span > 0.0, span, 1.0)

    @property
    def std(self) -> np.ndarray:
        """Running population standard deviation."""
        if self.count == 0:
            return np.zeros(self.dimension)
        return np.sqrt(self.m2 / self.count)

    def initial_widths(
        self, eps_fraction: float, sigma_floor_fraction: float
    ) -> np.ndarray:
        """Diagonal covariance entries eps·σ for a newborn rule.

        Coordinates that have not varied yet get unit scale.
        """
        span = self.span
        varied = self.ranges[:, 1] > self.ranges[:, 0]
        sigma = np.where(varied, np.maximum(self.std, sigma_floor_fraction * span), 1.0)
        return eps_fraction * span * sigma

    def to_dict(self) -> Dict[str, Any]:
        """Plain mapping for JSON checkpoints."""
        return {
            "ranges": self.ranges.tolist(),
            "mean": self.mean.tolist(),
            "m2": self.m2.tolist(),
            "count": self.count,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SpaceTracker":
        """Rebuild a tracker from ``to_dict`` output."""
        return cls(
            ranges=np.array(data["ranges"], dtype=np.float64).reshape(-1, 2),
            mean=np.array(data["mean"], dtype=np.float64),
            m2=np.array(data["m2"], dtype=np.float64),
            count=int(data["count"]),
        )


@dataclass
class RuleBase:
    """Ordered rule collection of one evolving classifier."""

    num_inputs: int
    num_labels: int
    config: LearnConfig = field(default_factory=LearnConfig)
    rules: List[Rule] = field(default_factory=list)
    tracker: Optional[SpaceTracker] = None
    evolutions: int = 0
    merges: int = 0

    def __post_init__(self) -> None:
        if self.tracker is None:
            self.tracker = SpaceTracker.empty(self.dimension)
        for rule in self.rules:
            self._check_rule(rule)

    @property
    def dimension(self) -> int:
        """Dimension of the clustered product space."""
        return self.num_inputs + self.num_labels

    @property
    def num_rules(self) -> int:
        """Rule count C."""
        return len(self.rules)

    @property
    def support_total(self) -> int:
        """Sum of rule supports."""
        return sum(rule.support for rule in self.rules)

    def _check_rule(self, rule: Rule) -> None:
        if rule.num_inputs != self.num_inputs or rule.num_labels != self.num_labels:
            raise DimensionMismatchError(
                f"Rule with p={rule.num_inputs}, K={rule.num_labels} does not fit a "
                f"rule base with p={self.num_inputs}, K={self.num_labels}"
            )

    def add_rule(self, rule: Rule) -> int:
        """Append a rule and return its index."""
        self._check_rule(rule)
        self.rules.append(rule)
        return len(self.rules) - 1

    def to_dict(self) -> Dict[str, Any]:
        """Versioned JSON document of the rule base."""
        return {
            "schema_version": SCHEMA_VERSION,
            "num_inputs": self.num_inputs,
            "num_labels": self.num_labels,
            "config": self.config.as_dict(),
            "tracker": self.tracker.to_dict(),
            "evolutions": self.evolutions,
            "merges": self.merges,
            "rules": [rule.to_dict() for rule in self.rules],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RuleBase":
        """Rebuild a rule base from ``to_dict`` output."""
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise MalformedFileError(
                f"Unsupported rule base schema version {version}, expected {SCHEMA_VERSION}"
            )
        return cls(
            num_inputs=int(data["num_inputs"]),
            num_labels=int(data["num_labels"]),
            config=LearnConfig.from_dict(data["config"]),
            rules=[Rule.from_dict(item) for item in data["rules"]],
            tracker=SpaceTracker.from_dict(data["tracker"]),
            evolutions=int(data.get("evolutions", 0)),
            merges=int(data.get("merges", 0)),
        )


def _squared_distance(delta: np.ndarray, precision: np.ndarray) -> float:
    return max(float(delta @ precision @ delta), 0.0)


def mahalanobis(rule: Rule, z: np.ndarray) -> float:
    """Mahalanobis distance of z to the rule center.

    Vectors as long as the center use the stored space; vectors of length p
    use the input-space marginal.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] == rule.center.shape[0]:
        return float(np.sqrt(_squared_distance(z - rule.center, rule.inv_cov)))
    if z.shape[0] == rule.num_inputs:
        return float(
            np.sqrt(_squared_distance(z - rule.input_center, rule.input_inv_cov))
        )
    raise DimensionMismatchError(
        f"Vector of length {z.shape[0]} does not fit a rule over {rule.center.shape[0]} coordinates"
    )


def _check_input(x: np.ndarray, num_inputs: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != num_inputs:
        raise DimensionMismatchError(
            f"Expected a feature vector of length {num_inputs}, got shape {x.shape}"
        )
    return x


def activation(rule: Rule, x: np.ndarray) -> float:
    """Gaussian membership degree of x in the rule, in (0, 1]."""
    x = _check_input(x, rule.num_inputs)
    delta = x - rule.input_center
    return float(np.exp(-0.5 * _squared_distance(delta, rule.input_inv_cov)))


def normalized_activations(rule_base: RuleBase, x: np.ndarray) -> np.ndarray:
    """Normalized rule weights Ψ(x), summing to one."""
    x = _check_input(x, rule_base.num_inputs)
    if not rule_base.rules:
        raise DimensionMismatchError("A rule base without rules has no activations")
    memberships = np.array([activation(rule, x) for rule in rule_base.rules])
    memberships = np.maximum(memberships, ACTIVATION_FLOOR)
    return memberships / memberships.sum()


def rule_outputs(rule_base: RuleBase, x: np.ndarray) -> np.ndarray:
    """Per-rule hyperplane outputs as a C×K matrix."""
    r = regressor(_check_input(x, rule_base.num_inputs))
    return np.stack([r @ rule.consequents for rule in rule_base.rules])


def predict_continuous(rule_base: RuleBase, x: np.ndarray) -> np.ndarray:
    """Activation-weighted blend of the rule consequents."""
    psi = normalized_activations(rule_base, x)
    return psi @ rule_outputs(rule_base, x)


def predict_crisp(yhat: np.ndarray) -> np.ndarray:
    """Threshold continuous outputs at 0.5, boundary inclusive."""
    return (np.asarray(yhat, dtype=np.float64) >= CRISP_THRESHOLD).astype(np.int64)


def describe_rules(rule_base: RuleBase) -> List[Dict[str, Any]]:
    """Per-rule summary with the axis-parallel view of the input precision."""
    return [
        {
            "rule": index,
            "support": rule.support,
            "center": rule.input_center.tolist(),
            "precision_diagonal": np.diag(rule.input_inv_cov).tolist(),
        }
        for index, rule in enumerate(rule_base.rules)
    ]
