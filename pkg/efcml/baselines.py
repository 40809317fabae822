"""Comparison learners: one-versus-rest, classifier chains and frozen models."""
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .classifier import DiagnosticsTrace, EvolvingMultiLabelClassifier
from .config import LearnConfig
from .const import (
    METHOD_CHAIN,
    METHOD_EFCML,
    METHOD_OVR,
    METHODS,
    SCHEMA_VERSION,
    STATIC_PREFIX,
)
from .exceptions import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    MalformedFileError,
)
from .rulebase import predict_crisp

_LOGGER = logging.getLogger(__name__)


def _member_config(config: LearnConfig) -> LearnConfig:
    """Members learn their consequents with plain RFWLS."""
    return config.updated(alpha=0.0, beta=0.0, correlation_learning=False)


def _check_dimensions(model, features: np.ndarray, labels: np.ndarray) -> None:
    if features.ndim != 2 or features.shape[1] != model.num_inputs:
        raise DimensionMismatchError(
            f"Features of shape {features.shape} for p={model.num_inputs}"
        )
    if labels.shape != (features.shape[0], model.num_labels):
        raise DimensionMismatchError(
            f"Labels of shape {labels.shape} for K={model.num_labels}"
        )


class OneVsRestModel:
    """K independent single-label evolving classifiers."""

    method = METHOD_OVR

    def __init__(
        self,
        num_inputs: int,
        num_labels: int,
        config: Optional[LearnConfig] = None,
        members: Optional[List[EvolvingMultiLabelClassifier]] = None,
    ) -> None:
        """Initialize."""
        self.num_inputs = num_inputs
        self.num_labels = num_labels
        self.config = _member_config(config or LearnConfig())
        self.members = members or [
            EvolvingMultiLabelClassifier(num_inputs, 1, self.config)
            for _ in range(num_labels)
        ]
        if len(self.members) != num_labels:
            raise DimensionMismatchError(
                f"{len(self.members)} members for K={num_labels}"
            )

    @property
    def rule_count(self) -> int:
        """Rules summed over all members."""
        return sum(member.rule_count for member in self.members)

    def update(
        self,
        x: np.ndarray,
        y: np.ndarray,
        label_mask: Optional[np.ndarray] = None,
    ) -> None:
        """Update every member on its own label column."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.num_labels,):
            raise DimensionMismatchError(f"Labels of shape {y.shape} for K={self.num_labels}")
        for label, member in enumerate(self.members):
            if label_mask is None or label_mask[label]:
                member.update(x, y[label : label + 1])

    def fit_initial(
        self,
        features: np.ndarray,
        labels: np.ndarray,
        trace: Optional[DiagnosticsTrace] = None,
    ) -> "OneVsRestModel":
        """Train every member on the initial batch."""
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64)
        _check_dimensions(self, features, labels)
        for label, member in enumerate(self.members):
            member.fit_initial(features, labels[:, label : label + 1])
        return self

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Continuous and crisp outputs, one per member."""
        yhat = np.array([member.predict(x)[0][0] for member in self.members])
        return yhat, predict_crisp(yhat)

    def to_dict(self) -> Dict[str, Any]:
        """Versioned checkpoint with a method tag."""
        return {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "num_inputs": self.num_inputs,
            "num_labels": self.num_labels,
            "members": [member.to_dict() for member in self.members],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OneVsRestModel":
        """Rebuild a model from ``to_dict`` output."""
        members = [EvolvingMultiLabelClassifier.from_dict(item) for item in data["members"]]
        config = members[0].config if members else None
        return cls(int(data["num_inputs"]), int(data["num_labels"]), config, members)


def _resolve_order(order: Optional[Sequence[int]], num_labels: int) -> Tuple[int, ...]:
    if order is None:
        return tuple(range(num_labels))
    order = tuple(int(label) for label in order)
    if sorted(order) != list(range(num_labels)):
        raise IndexOutOfRangeError(
            f"Chain order {list(order)} is not a permutation of {num_labels} labels"
        )
    return order


class ChainModel:
    """Classifier chain; link c also sees the labels of links before it.

    Training feeds the true previous labels, prediction the crisp outputs of
    the earlier links. Outputs are returned in natural label order.
    """

    method = METHOD_CHAIN

    def __init__(
        self,
        num_inputs: int,
        num_labels: int,
        config: Optional[LearnConfig] = None,
        links: Optional[List[EvolvingMultiLabelClassifier]] = None,
    ) -> None:
        """Initialize."""
        self.num_inputs = num_inputs
        self.num_labels = num_labels
        self.config = _member_config(config or LearnConfig())
        self.order = _resolve_order(self.config.chain_order, num_labels)
        self.links = links or [
            EvolvingMultiLabelClassifier(num_inputs + position, 1, self.config)
            for position in range(num_labels)
        ]
        for position, link in enumerate(self.links):
            if link.num_inputs != num_inputs + position:
                raise DimensionMismatchError(
                    f"Link {position} takes {link.num_inputs} inputs, "
                    f"expected {num_inputs + position}"
                )

    @property
    def rule_count(self) -> int:
        """Rules summed over all links."""
        return sum(link.rule_count for link in self.links)

    def _augmented(self, x: np.ndarray, previous: np.ndarray, position: int) -> np.ndarray:
        return np.concatenate((x, previous[list(self.order[:position])]))

    def update(
        self,
        x: np.ndarray,
        y: np.ndarray,
        label_mask: Optional[np.ndarray] = None,
    ) -> None:
        """Update every link on the true labels of the links before it."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.num_labels,):
            raise DimensionMismatchError(f"Labels of shape {y.shape} for K={self.num_labels}")
        for position, link in enumerate(self.links):
            label = self.order[position]
            if label_mask is not None and not label_mask[label]:
                continue
            link.update(self._augmented(x, y, position), y[label : label + 1])

    def fit_initial(
        self,
        features: np.ndarray,
        labels: np.ndarray,
        trace: Optional[DiagnosticsTrace] = None,
    ) -> "ChainModel":
        """Train every link on the initial batch."""
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64)
        _check_dimensions(self, features, labels)
        for position, link in enumerate(self.links):
            previous = labels[:, list(self.order[:position])]
            label = self.order[position]
            link.fit_initial(
                np.column_stack((features, previous)), labels[:, label : label + 1]
            )
        return self

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Sequential prediction feeding crisp outputs down the chain."""
        x = np.asarray(x, dtype=np.float64)
        yhat = np.zeros(self.num_labels)
        crisp = np.zeros(self.num_labels, dtype=np.int64)
        for position, link in enumerate(self.links):
            label = self.order[position]
            output, decided = link.predict(self._augmented(x, crisp.astype(np.float64), position))
            yhat[label] = output[0]
            crisp[label] = decided[0]
        return yhat, crisp

    def to_dict(self) -> Dict[str, Any]:
        """Versioned checkpoint with a method tag."""
        return {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "num_inputs": self.num_inputs,
            "num_labels": self.num_labels,
            "links": [link.to_dict() for link in self.links],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ChainModel":
        """Rebuild a model from ``to_dict`` output."""
        links = [EvolvingMultiLabelClassifier.from_dict(item) for item in data["links"]]
        config = links[0].config if links else None
        return cls(int(data["num_inputs"]), int(data["num_labels"]), config, links)


Model = Union[EvolvingMultiLabelClassifier, OneVsRestModel, ChainModel]


class FrozenModel:
    """Prediction-only view of a trained model; updates are ignored."""

    def __init__(self, model: Model) -> None:
        """Initialize."""
        self.model = model

    @property
    def method(self) -> str:
        """Method tag of the frozen model."""
        return STATIC_PREFIX + self.model.method

    @property
    def num_inputs(self) -> int:
        """Feature dimension p."""
        return self.model.num_inputs

    @property
    def num_labels(self) -> int:
        """Label count K."""
        return self.model.num_labels

    @property
    def rule_count(self) -> int:
        """Rules of the wrapped model."""
        return self.model.rule_count

    def update(
        self,
        x: np.ndarray,
        y: np.ndarray,
        label_mask: Optional[np.ndarray] = None,
    ) -> None:
        """Frozen models do not learn."""

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Continuous and crisp outputs of the wrapped model."""
        return self.model.predict(x)

    def to_dict(self) -> Dict[str, Any]:
        """Versioned checkpoint with a method tag."""
        return {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "model": self.model.to_dict(),
        }


def freeze(model: Union[Model, FrozenModel]) -> FrozenModel:
    """Wrap a trained model so that stream updates leave it unchanged."""
    if isinstance(model, FrozenModel):
        return model
    return FrozenModel(model)


_MODEL_TYPES = {
    METHOD_EFCML: EvolvingMultiLabelClassifier,
    METHOD_OVR: OneVsRestModel,
    METHOD_CHAIN: ChainModel,
}


def base_method(method: str) -> str:
    """Method name without the static prefix."""
    if method not in METHODS:
        raise ValueError(f"Unknown method {method}")
    return method[len(STATIC_PREFIX) :] if method.startswith(STATIC_PREFIX) else method


def is_static(method: str) -> bool:
    """Whether the method is frozen after initial training."""
    return method.startswith(STATIC_PREFIX)


def build_model(method: str, num_inputs: int, num_labels: int, config: LearnConfig) -> Model:
    """Untrained model for a method name; static methods are frozen after training."""
    _LOGGER.debug("Building %s model for p=%s, K=%s", method, num_inputs, num_labels)
    return _MODEL_TYPES[base_method(method)](num_inputs, num_labels, config)


def model_from_dict(data: Dict[str, Any]) -> Union[Model, FrozenModel]:
    """Rebuild any model from its checkpoint."""
    if data.get("schema_version") != SCHEMA_VERSION:
        raise MalformedFileError(
            f"Unsupported model schema version {data.get('schema_version')}, "
            f"expected {SCHEMA_VERSION}"
        )
    method = data.get("method")
    if method not in METHODS:
        raise MalformedFileError(f"Unknown method tag {method}")
    if is_static(method):
        return freeze(model_from_dict(data["model"]))
    return _MODEL_TYPES[method].from_dict(data)
