"""Grid search, interleaved test-then-train runs and their output files."""
from concurrent.futures import ThreadPoolExecutor
import copy
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
import time
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .active import SelectionDecision, make_selector
from .baselines import base_method, build_model, freeze, is_static, model_from_dict
from .classifier import DiagnosticsTrace, EvolvingMultiLabelClassifier
from .config import RUN_SPEC_SCHEMA, LearnConfig, SearchGrid, load_grid_file
from .const import (
    AL_OFF,
    CONF_AL,
    CONF_BUDGET,
    CONF_CSV_HEADER,
    CONF_CSV_LABELS,
    CONF_DATA,
    CONF_DIAGNOSTICS,
    CONF_GRID_FILE,
    CONF_LABELS_XML,
    CONF_METHOD,
    CONF_OUT,
    CONF_RECORD_TIMING,
    CONF_SEED,
    CONF_SPLIT,
    CONFIG_FILE,
    DIAGNOSTICS_COLUMNS,
    DIAGNOSTICS_FILE,
    METHOD_EFCML,
    MODEL_FILE,
    SELECTION_COLUMNS,
    SELECTION_FILE,
    TREND_COLUMNS,
    TREND_FILE,
    VERDICT_FULL,
    VERSION,
)
from .exceptions import BatchTooSmallError, EfcmlError, RunAbortedError
from .helpers import PathLike, ensure_output_dir, read_json, write_json, write_rows
from .ingest import Dataset, load_arff, load_csv, split_stream
from .metrics import MetricState, batch_partial_accuracy, update_metrics

_LOGGER = logging.getLogger(__name__)

_LEARNER_FAILURES = (EfcmlError, linalg.LinAlgError, FloatingPointError)


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to reproduce one streaming run."""

    data: str
    labels_xml: Optional[str] = None
    csv_labels: Optional[int] = None
    csv_header: bool = False
    method: str = METHOD_EFCML
    split: float = 0.25
    al: str = AL_OFF
    budget: float = 1.0
    grid: SearchGrid = field(default_factory=SearchGrid)
    seed: int = 42
    out: str = "out"
    record_timing: bool = True
    diagnostics: bool = False
    config: LearnConfig = field(default_factory=LearnConfig)
    workers: int = 1

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunSpec":
        """Validate a plain mapping (CLI arguments) and build a spec."""
        validated = RUN_SPEC_SCHEMA(dict(data))
        grid_file = validated[CONF_GRID_FILE]
        grid = load_grid_file(grid_file) if grid_file else SearchGrid()
        return cls(
            data=validated[CONF_DATA],
            labels_xml=validated.get(CONF_LABELS_XML),
            csv_labels=validated.get(CONF_CSV_LABELS),
            csv_header=validated[CONF_CSV_HEADER],
            method=validated[CONF_METHOD],
            split=validated[CONF_SPLIT],
            al=validated[CONF_AL],
            budget=validated[CONF_BUDGET],
            grid=grid,
            seed=validated[CONF_SEED],
            out=validated[CONF_OUT],
            record_timing=validated[CONF_RECORD_TIMING],
            diagnostics=validated[CONF_DIAGNOSTICS],
        )


@dataclass(frozen=True)
class TrendPoint:
    """Accumulated measures after one stream sample."""

    n: int
    pa: float
    ap: float
    rules: int
    selected_fraction: float
    cum_update_seconds: float

    def as_row(self) -> Tuple[Any, ...]:
        """Values in trend file column order."""
        return tuple(getattr(self, column) for column in TREND_COLUMNS)


@dataclass
class RunResult:
    """Trend, selection log and final model of a streaming run."""

    points: List[TrendPoint] = field(default_factory=list)
    decisions: List[Tuple[Any, SelectionDecision]] = field(default_factory=list)
    model: Any = None
    config: Optional[LearnConfig] = None
    diagnostics: DiagnosticsTrace = field(default_factory=list)


def load_dataset(spec: RunSpec) -> Dataset:
    """Load the dataset named by a run spec."""
    if spec.labels_xml is not None:
        return load_arff(spec.data, Path(spec.labels_xml))
    return load_csv(spec.data, spec.csv_labels, header=spec.csv_header)


def _fold_error(
    method: str,
    config: LearnConfig,
    batch: Dataset,
    train: np.ndarray,
    test: np.ndarray,
    structure: Any = None,
) -> float:
    if structure is None:
        model = build_model(method, batch.num_features, batch.num_labels, config)
        model.fit_initial(batch.features[train], batch.labels[train])
    else:
        model = copy.deepcopy(structure)
        model.rule_base.config = config
        if config.refits_consequents:
            model.refit_consequents(batch.features[train], batch.labels[train])
    crisp = np.stack([model.predict(x)[1] for x in batch.features[test]])
    return 1.0 - batch_partial_accuracy(crisp, batch.labels[test])


def _train_indices(folds: List[np.ndarray], index: int) -> np.ndarray:
    return np.concatenate([fold for other, fold in enumerate(folds) if other != index])


def _fit_structure(
    config: LearnConfig, batch: Dataset, train: np.ndarray
) -> Optional[EvolvingMultiLabelClassifier]:
    """Rule structure of one vigilance and fold, with unpenalized consequents."""
    model = EvolvingMultiLabelClassifier(
        batch.num_features, batch.num_labels, config.updated(alpha=0.0, beta=0.0)
    )
    try:
        return model.fit_initial(batch.features[train], batch.labels[train])
    except _LEARNER_FAILURES as err:
        _LOGGER.warning("Rule structure for fac=%s failed: %s", config.fac, err)
        return None


def _point_error(
    method: str,
    config: LearnConfig,
    batch: Dataset,
    folds: List[np.ndarray],
    structures: Optional[List[Optional[EvolvingMultiLabelClassifier]]] = None,
) -> float:
    errors = []
    for index, test in enumerate(folds):
        structure = None
        if structures is not None:
            structure = structures[index]
            if structure is None:
                return math.inf
        train = _train_indices(folds, index)
        try:
            errors.append(_fold_error(method, config, batch, train, test, structure))
        except _LEARNER_FAILURES as err:
            _LOGGER.warning(
                "Grid point alpha=%s, beta=%s, fac=%s failed: %s",
                config.alpha,
                config.beta,
                config.fac,
                err,
            )
            return math.inf
    return float(np.mean(errors))


def grid_search(
    batch: Dataset,
    method: str,
    grid: SearchGrid,
    base: Optional[LearnConfig] = None,
    seed: int = 42,
    workers: int = 1,
) -> LearnConfig:
    """Pick the grid point with the lowest cross-validated error 1 - PA.

    Ties go to the earlier point in grid order. Methods without correlation
    learning only search the vigilance grid. For the evolving classifier the
    rule structure of every vigilance and fold is built once; the Lasso and
    correlation weights only refit its consequents.
    """
    base = base or LearnConfig()
    method = base_method(method)
    if method != METHOD_EFCML:
        grid = grid.vigilance_only()
        base = base.updated(correlation_learning=False)

    candidates = [
        base.updated(alpha=alpha, beta=beta, fac=vigilance)
        for alpha, beta, vigilance in grid.points()
    ]
    if len(candidates) == 1:
        return candidates[0]
    if len(batch) < grid.folds:
        raise BatchTooSmallError(
            f"{len(batch)} samples cannot be split into {grid.folds} folds"
        )

    order = np.random.default_rng(seed).permutation(len(batch))
    folds = np.array_split(order, grid.folds)
    _LOGGER.info(
        "Searching %s grid points with %s-fold cross-validation", len(candidates), grid.folds
    )

    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    mapper = executor.map if executor is not None else map
    try:
        structures: Dict[float, List[Optional[EvolvingMultiLabelClassifier]]] = {}
        if method == METHOD_EFCML:
            pairs = [
                (vigilance, index)
                for vigilance in grid.vigilance
                for index in range(len(folds))
            ]

            def _structure(
                pair: Tuple[float, int]
            ) -> Optional[EvolvingMultiLabelClassifier]:
                vigilance, index = pair
                return _fit_structure(
                    base.updated(fac=vigilance), batch, _train_indices(folds, index)
                )

            for (vigilance, _), structure in zip(pairs, mapper(_structure, pairs)):
                structures.setdefault(vigilance, []).append(structure)

        def _evaluate(config: LearnConfig) -> float:
            return _point_error(method, config, batch, folds, structures.get(config.fac))

        errors = list(mapper(_evaluate, candidates))
    finally:
        if executor is not None:
            executor.shutdown()

    best = int(np.argmin(errors))
    if not math.isfinite(errors[best]):
        raise RunAbortedError("Every grid point failed during cross-validation")
    chosen = candidates[best]
    _LOGGER.info(
        "Selected alpha=%s, beta=%s, fac=%s with error %s",
        chosen.alpha,
        chosen.beta,
        chosen.fac,
        errors[best],
    )
    return chosen


def _full_decision(num_labels: int) -> SelectionDecision:
    return SelectionDecision(
        verdict=VERDICT_FULL, labels=tuple(range(num_labels)), spend_after=1.0
    )


def run_stream(
    model: Any,
    stream: Dataset,
    selector: Any = None,
    record_timing: bool = True,
    result: Optional[RunResult] = None,
) -> RunResult:
    """Interleaved test-then-train over the stream.

    Each sample is predicted and scored before the model may learn from it.
    With a selector, only selected samples reach the model.
    """
    result = result or RunResult()
    result.model = model
    state = MetricState(num_labels=stream.num_labels)
    elapsed = 0.0
    for sample in stream:
        yhat, crisp = model.predict(sample.x)
        state = update_metrics(state, yhat, crisp, sample.y)

        if selector is None:
            decision = _full_decision(stream.num_labels)
        else:
            decision = selector.select(getattr(model, "rule_base", None), sample.x, yhat)
        result.decisions.append((sample.id, decision))

        if decision.selected:
            start = time.perf_counter()
            model.update(sample.x, sample.y, decision.label_mask(stream.num_labels))
            elapsed += time.perf_counter() - start

        result.points.append(
            TrendPoint(
                n=state.n,
                pa=state.pa,
                ap=state.ap,
                rules=model.rule_count,
                selected_fraction=decision.spend_after,
                cum_update_seconds=elapsed if record_timing else 0.0,
            )
        )
    return result


def emit_trends(points: List[TrendPoint], csv_path: Path) -> None:
    """Write the trend lines of a run."""
    write_rows((point.as_row() for point in points), TREND_COLUMNS, csv_path)


def emit_selection(decisions: List[Tuple[Any, SelectionDecision]], csv_path: Path) -> None:
    """Write one selection log row per stream sample."""
    write_rows(
        (
            (
                sample_id,
                decision.verdict,
                "|".join(decision.trigger),
                "|".join(str(label) for label in decision.labels),
                decision.spend_after,
            )
            for sample_id, decision in decisions
        ),
        SELECTION_COLUMNS,
        csv_path,
    )


def emit_diagnostics(trace: DiagnosticsTrace, csv_path: Path) -> None:
    """Write the objective terms of every initial batch fit iteration."""
    write_rows(
        (
            (rule, iteration, terms.wls, terms.lasso, terms.corr, terms.total)
            for rule, iteration, terms in trace
        ),
        DIAGNOSTICS_COLUMNS,
        csv_path,
    )


def _emit(spec: RunSpec, result: RunResult, output_path: Path) -> None:
    emit_trends(result.points, output_path / TREND_FILE)
    emit_selection(result.decisions, output_path / SELECTION_FILE)
    if spec.diagnostics:
        emit_diagnostics(result.diagnostics, output_path / DIAGNOSTICS_FILE)


def prepare_run(spec: RunSpec, dataset: Optional[Dataset] = None) -> Tuple[Any, Dataset, RunResult]:
    """Load, split, tune and train on the initial batch.

    Returns the trained model, the stream and a result holding the chosen
    config and the initial fit diagnostics.
    """
    dataset = dataset if dataset is not None else load_dataset(spec)
    split = split_stream(dataset, spec.split)
    _LOGGER.info(
        "Dataset with N=%s, p=%s, K=%s: %s initial samples, %s stream samples",
        len(dataset),
        dataset.num_features,
        dataset.num_labels,
        len(split.initial_batch),
        len(split.stream),
    )

    base = spec.config.updated(budget=spec.budget)
    config = grid_search(
        split.initial_batch, spec.method, spec.grid, base, spec.seed, spec.workers
    )
    result = RunResult(config=config)
    model = build_model(
        spec.method, dataset.num_features, dataset.num_labels, config
    )
    batch = split.initial_batch
    trace = result.diagnostics if spec.diagnostics else None
    model.fit_initial(batch.features, batch.labels, trace)
    if is_static(spec.method):
        model = freeze(model)
    result.model = model
    return model, split.stream, result


def run_interleaved(spec: RunSpec, dataset: Optional[Dataset] = None) -> List[TrendPoint]:
    """Run one spec end to end and write its output files.

    On a learner failure the partial trend and selection files are written
    before ``RunAbortedError`` is raised.
    """
    _LOGGER.info("efcml %s running %s on %s", VERSION, spec.method, spec.data)
    output_path = ensure_output_dir(spec.out)
    model, stream, result = prepare_run(spec, dataset)

    selector = None
    if spec.al != AL_OFF:
        selector = make_selector(spec.al, result.config, stream.num_labels, spec.seed)

    try:
        run_stream(model, stream, selector, spec.record_timing, result)
    except _LEARNER_FAILURES as err:
        _LOGGER.error("Error running %s at sample %s: %s", spec.method, len(result.points) + 1, err)
        _emit(spec, result, output_path)
        raise RunAbortedError(
            f"Run aborted after {len(result.points)} samples: {err}"
        ) from err

    _emit(spec, result, output_path)
    write_json(model.to_dict(), output_path / MODEL_FILE)
    write_json(result.config.as_dict(), output_path / CONFIG_FILE)
    if result.points:
        last = result.points[-1]
        _LOGGER.info(
            "Final PA %s, AP %s, %s rules; outputs in %s",
            last.pa,
            last.ap,
            last.rules,
            output_path,
        )
    return result.points


def load_model(model_path: PathLike) -> Any:
    """Rebuild the model stored in the model.json of a run."""
    return model_from_dict(read_json(model_path))


def mean_update_seconds(points: List[TrendPoint]) -> float:
    """Average update time per stream sample."""
    if not points:
        return 0.0
    return points[-1].cum_update_seconds / len(points)


def time_updates(spec: RunSpec, dataset: Optional[Dataset] = None) -> float:
    """Mean wall-clock seconds per stream update, without writing files."""
    model, stream, result = prepare_run(spec, dataset)
    selector = None
    if spec.al != AL_OFF:
        selector = make_selector(spec.al, result.config, stream.num_labels, spec.seed)
    run_stream(model, stream, selector, True, result)
    return mean_update_seconds(result.points)

