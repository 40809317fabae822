"""Dataset loading, validation and stream splitting."""
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union
from xml.etree import ElementTree

import numpy as np
import pandas as pd
from scipy.io import arff

from .exceptions import (
    DimensionMismatchError,
    EmptyDatasetError,
    InvalidSplitError,
    MalformedFileError,
    MissingValueError,
    NonBinaryLabelError,
    NonNumericFeatureError,
    RaggedRowsError,
    StreamEmptyError,
    UnknownLabelError,
)

_LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]
LabelSpec = Union[PathLike, Sequence[str]]

_TRUE_VALUES = {"1", "true", "1.0"}
_FALSE_VALUES = {"0", "false", "0.0"}
_MISSING_VALUES = {"", "?"}


@dataclass(frozen=True)
class Sample:
    """One stream instance."""

    x: np.ndarray
    y: np.ndarray
    id: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable multi-label dataset held as a feature and a label matrix."""

    features: np.ndarray
    labels: np.ndarray
    label_names: Tuple[str, ...]
    feature_names: Tuple[str, ...] = ()
    ids: Optional[np.ndarray] = field(default=None)

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64, ndmin=2)
        labels = np.array(self.labels, dtype=np.int64, ndmin=2)
        if features.shape[0] != labels.shape[0]:
            raise DimensionMismatchError(
                f"{features.shape[0]} feature rows but {labels.shape[0]} label rows"
            )
        if labels.shape[1] != len(self.label_names):
            raise DimensionMismatchError(
                f"{labels.shape[1]} label columns but {len(self.label_names)} label names"
            )
        if not np.isin(labels, (0, 1)).all():
            raise NonBinaryLabelError("Label values must be 0 or 1")

        feature_names = tuple(self.feature_names) or tuple(
            f"x{index + 1}" for index in range(features.shape[1])
        )
        ids = (
            np.arange(features.shape[0])
            if self.ids is None
            else np.array(self.ids, dtype=np.int64)
        )
        for array in (features, labels, ids):
            array.flags.writeable = False

        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "label_names", tuple(self.label_names))
        object.__setattr__(self, "feature_names", feature_names)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return self.features.shape[0]

    def __iter__(self) -> Iterator[Sample]:
        for row in range(len(self)):
            yield self.sample(row)

    @property
    def num_features(self) -> int:
        """Feature count p."""
        return self.features.shape[1]

    @property
    def num_labels(self) -> int:
        """Label count K."""
        return self.labels.shape[1]

    @property
    def feature_ranges(self) -> np.ndarray:
        """Per-feature (min, max) as a p×2 array."""
        if len(self) == 0:
            return np.zeros((self.num_features, 2))
        return np.column_stack(
            (self.features.min(axis=0), self.features.max(axis=0))
        )

    @property
    def samples(self) -> List[Sample]:
        """Samples in source order."""
        return list(self)

    def sample(self, row: int) -> Sample:
        """Return the sample stored at a row position."""
        return Sample(
            x=self.features[row], y=self.labels[row], id=int(self.ids[row])
        )

    def take(self, rows: Union[slice, Sequence[int], np.ndarray]) -> "Dataset":
        """Return the dataset restricted to some rows, order preserved."""
        return Dataset(
            features=self.features[rows],
            labels=self.labels[rows],
            label_names=self.label_names,
            feature_names=self.feature_names,
            ids=self.ids[rows],
        )

    def equals(self, other: "Dataset") -> bool:
        """Compare values and names, ignoring source ids."""
        return (
            self.label_names == other.label_names
            and self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    def to_csv(self, csv_path: PathLike) -> None:
        """Write the dataset as a CSV file with a header, labels last."""
        frame = pd.DataFrame(self.features, columns=list(self.feature_names))
        for column, name in enumerate(self.label_names):
            frame[name] = self.labels[:, column]
        frame.to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")


@dataclass(frozen=True)
class StreamSplit:
    """Initial training batch followed by the stream."""

    initial_batch: Dataset
    stream: Dataset
    split_fraction: float


def load_label_xml(xml_path: PathLike) -> Tuple[str, ...]:
    """Read label names from a MULAN label specification."""
    try:
        tree = ElementTree.parse(str(xml_path))
    except ElementTree.ParseError as err:
        raise MalformedFileError(f"Unable to parse label file {xml_path}: {err}") from err

    names = tuple(
        element.get("name")
        for element in tree.iter()
        if element.tag.rsplit("}", 1)[-1] == "label" and element.get("name")
    )
    if not names:
        raise UnknownLabelError(f"No labels declared in {xml_path}")
    return names


def _resolve_label_names(label_spec: LabelSpec) -> Tuple[str, ...]:
    if isinstance(label_spec, (str, Path)):
        return load_label_xml(label_spec)
    names = tuple(label_spec)
    if not names:
        raise UnknownLabelError("At least one label name is required")
    return names


def _nominal_to_indicator(values: np.ndarray, name: str) -> np.ndarray:
    decoded = [
        value.decode() if isinstance(value, bytes) else str(value) for value in values
    ]
    indicators = np.empty(len(decoded), dtype=np.int64)
    for row, value in enumerate(decoded):
        value = value.strip().lower()
        if value in _TRUE_VALUES:
            indicators[row] = 1
        elif value in _FALSE_VALUES:
            indicators[row] = 0
        elif value in _MISSING_VALUES:
            raise MissingValueError(f"label {name}, row {row + 1}")
        else:
            raise NonBinaryLabelError(f"Label {name} has value {value!r} in row {row + 1}")
    return indicators


def _numeric_to_indicator(values: np.ndarray, name: str) -> np.ndarray:
    if np.isnan(values).any():
        raise MissingValueError(f"label {name}")
    if not np.isin(values, (0.0, 1.0)).all():
        raise NonBinaryLabelError(f"Label {name} holds values other than 0 and 1")
    return values.astype(np.int64)


def load_arff(arff_path: PathLike, label_spec: LabelSpec) -> Dataset:
    """Load a MULAN style ARFF file.

    ``label_spec`` is either the path of the MULAN XML label file or the list
    of label attribute names. Every other attribute is a feature and must be
    numeric.
    """
    label_names = _resolve_label_names(label_spec)
    try:
        data, meta = arff.loadarff(str(arff_path))
    except NotImplementedError as err:
        raise NonNumericFeatureError(f"{arff_path}: {err}") from err
    except (arff.ArffError, ValueError, StopIteration, IndexError, TypeError) as err:
        raise MalformedFileError(f"Unable to parse {arff_path}: {err}") from err

    attributes = list(meta.names())
    missing = [name for name in label_names if name not in attributes]
    if missing:
        raise UnknownLabelError(f"Labels not declared in {arff_path}: {missing}")

    feature_names = [name for name in attributes if name not in label_names]
    for name in feature_names:
        if meta[name][0] != "numeric":
            raise NonNumericFeatureError(
                f"Feature {name} has type {meta[name][0]}, only numeric is supported"
            )

    num_rows = data.shape[0]
    features = np.empty((num_rows, len(feature_names)))
    for column, name in enumerate(feature_names):
        features[:, column] = data[name].astype(np.float64)
    if np.isnan(features).any():
        row = int(np.argwhere(np.isnan(features))[0][0])
        raise MissingValueError(f"{arff_path}, row {row + 1}")
    if not np.isfinite(features).all():
        row = int(np.argwhere(~np.isfinite(features))[0][0])
        raise NonNumericFeatureError(
            f"{arff_path}: row {row + 1} holds an infinite feature"
        )

    labels = np.empty((num_rows, len(label_names)), dtype=np.int64)
    for column, name in enumerate(label_names):
        if meta[name][0] == "numeric":
            labels[:, column] = _numeric_to_indicator(data[name].astype(np.float64), name)
        else:
            labels[:, column] = _nominal_to_indicator(data[name], name)

    _LOGGER.debug(
        "Loaded %s with N=%s, p=%s, K=%s",
        arff_path,
        num_rows,
        len(feature_names),
        len(label_names),
    )
    return Dataset(
        features=features.reshape(num_rows, len(feature_names)),
        labels=labels,
        label_names=label_names,
        feature_names=tuple(feature_names),
    )


def load_csv(
    csv_path: PathLike,
    num_labels: int,
    labels_at_end: bool = True,
    header: bool = False,
) -> Dataset:
    """Load a CSV file whose label columns sit at the end or at the start."""
    try:
        frame = pd.read_csv(
            csv_path,
            header=0 if header else None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=True,
        )
    except pd.errors.ParserError as err:
        raise RaggedRowsError(f"{csv_path}: {err}") from err
    except pd.errors.EmptyDataError as err:
        raise MalformedFileError(f"{csv_path} is empty") from err

    num_columns = frame.shape[1]
    if num_labels >= num_columns:
        raise MalformedFileError(
            f"{csv_path} has {num_columns} columns, too few for {num_labels} labels"
        )

    # short rows are padded with NaN by pandas
    short_rows = frame.isna().any(axis=1)
    if short_rows.any():
        row = int(np.flatnonzero(short_rows.to_numpy())[0])
        raise RaggedRowsError(f"{csv_path}: row {row + 1} has too few columns")

    if labels_at_end:
        feature_frame = frame.iloc[:, : num_columns - num_labels]
        label_frame = frame.iloc[:, num_columns - num_labels :]
    else:
        label_frame = frame.iloc[:, :num_labels]
        feature_frame = frame.iloc[:, num_labels:]

    cells = frame.apply(lambda column: column.str.strip())
    if cells.isin(_MISSING_VALUES).any().any():
        raise MissingValueError(str(csv_path))

    try:
        features = feature_frame.astype(np.float64).to_numpy()
    except ValueError as err:
        raise NonNumericFeatureError(f"{csv_path}: {err}") from err
    if not np.isfinite(features).all():
        raise NonNumericFeatureError(f"{csv_path}: features must be finite")

    labels = np.empty(label_frame.shape, dtype=np.int64)
    for column, name in enumerate(label_frame.columns):
        labels[:, column] = _nominal_to_indicator(label_frame[name].to_numpy(), str(name))

    if header:
        feature_names = tuple(str(name) for name in feature_frame.columns)
        label_names = tuple(str(name) for name in label_frame.columns)
    else:
        feature_names = tuple(f"x{index + 1}" for index in range(features.shape[1]))
        label_names = tuple(f"label{index + 1}" for index in range(num_labels))

    _LOGGER.debug(
        "Loaded %s with N=%s, p=%s, K=%s",
        csv_path,
        features.shape[0],
        features.shape[1],
        num_labels,
    )
    return Dataset(
        features=features,
        labels=labels,
        label_names=label_names,
        feature_names=feature_names,
    )


def split_stream(dataset: Dataset, fraction: float) -> StreamSplit:
    """Split a dataset into an initial batch and the remaining stream."""
    if not 0.0 < fraction < 1.0:
        raise InvalidSplitError(f"Split fraction must lie in (0, 1), got {fraction}")
    total = len(dataset)
    if total < 2:
        raise EmptyDatasetError(f"At least 2 samples are required, got {total}")

    # rounding first keeps 0.3 * 10 at 3
    batch_size = math.ceil(round(fraction * total, 9))
    if batch_size >= total:
        raise StreamEmptyError()

    return StreamSplit(
        initial_batch=dataset.take(slice(0, batch_size)),
        stream=dataset.take(slice(batch_size, total)),
        split_fraction=fraction,
    )


def update_ranges(ranges: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Widen per-coordinate (min, max) ranges so they include x."""
    ranges = np.asarray(ranges, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if ranges.ndim != 2 or ranges.shape[1] != 2 or ranges.shape[0] != x.shape[0]:
        raise DimensionMismatchError(
            f"Ranges of shape {ranges.shape} do not match a vector of length {x.shape[0]}"
        )
    return np.column_stack(
        (np.minimum(ranges[:, 0], x), np.maximum(ranges[:, 1], x))
    )
