""" Test efcml runs and their output files """
import logging

import numpy as np
import pytest

from efcml import harness
from efcml.active import ActiveSelector, RandomSelector, SelectionDecision
from efcml.antecedent import OutcomeKind
from efcml.baselines import FrozenModel
from efcml.classifier import EvolvingMultiLabelClassifier
from efcml.config import LearnConfig, SearchGrid
from efcml.const import (
    CONFIG_FILE,
    DIAGNOSTICS_COLUMNS,
    DIAGNOSTICS_FILE,
    MODEL_FILE,
    SELECTION_COLUMNS,
    SELECTION_FILE,
    TREND_COLUMNS,
    TREND_FILE,
)
from efcml.exceptions import BatchTooSmallError, RunAbortedError, SingularHessianError
from efcml.harness import (
    RunSpec,
    TrendPoint,
    emit_selection,
    emit_trends,
    grid_search,
    load_model,
    mean_update_seconds,
    run_interleaved,
    run_stream,
    time_updates,
)
from efcml.helpers import read_json, read_rows

from .common import as_dataset, fixture_path, region_stream, two_cluster_stream
from .const import SINGLE_POINT_GRID, TOY_CONFIG


@pytest.fixture()
def cluster_dataset():
    """Two-cluster stream as a dataset."""
    return as_dataset(*two_cluster_stream())


def _spec(tmp_path, name="run", **changes):
    values = {
        "data": "two-clusters",
        "csv_labels": 2,
        "grid": SearchGrid.from_dict(SINGLE_POINT_GRID),
        "out": str(tmp_path / name),
        "record_timing": False,
    }
    values.update(changes)
    return RunSpec(**values)


def test_grid_search_single_point(cluster_dataset):
    """Test a one-point grid needs no cross-validation"""
    config = grid_search(
        cluster_dataset.take(slice(0, 3)), "efcml", SearchGrid.from_dict(SINGLE_POINT_GRID)
    )
    assert config.fac == 2.0
    assert config.alpha == 0.0


def test_grid_search_batch_too_small(cluster_dataset):
    """Test a batch with fewer samples than folds"""
    grid = SearchGrid.from_dict({"alpha": [0.0, 0.1], "beta": [0.0], "vigilance": [0.5]})
    with pytest.raises(BatchTooSmallError):
        grid_search(cluster_dataset.take(slice(0, 3)), "efcml", grid)


def test_grid_search_picks_a_grid_point(cluster_dataset):
    """Test the chosen config comes from the grid and keeps the base settings"""
    grid = SearchGrid.from_dict(
        {"alpha": [0.0, 0.1], "beta": [0.0, 1.0], "vigilance": [0.5], "folds": 3}
    )
    batch = cluster_dataset.take(slice(0, 60))
    base = LearnConfig(budget=0.4)
    config = grid_search(batch, "efcml", grid, base)
    assert config.alpha in (0.0, 0.1)
    assert config.beta in (0.0, 1.0)
    assert config.fac == 0.5
    assert config.budget == 0.4
    assert grid_search(batch, "efcml", grid, base, workers=2) == config


def test_grid_search_baselines_tune_vigilance_only(cluster_dataset):
    """Test one-versus-rest ignores the alpha and beta grids"""
    grid = SearchGrid.from_dict(
        {"alpha": [0.5, 1.0], "beta": [5.0], "vigilance": [0.3, 0.6], "folds": 3}
    )
    config = grid_search(cluster_dataset.take(slice(0, 60)), "static-ovr", grid)
    assert config.alpha == 0.0
    assert config.beta == 0.0
    assert not config.correlation_learning
    assert config.fac in (0.3, 0.6)


def test_grid_search_builds_rule_structure_once(cluster_dataset, monkeypatch):
    """Test the antecedents are learned once per vigilance and fold"""
    calls = {"fit": 0, "refit": 0}
    fit_initial = EvolvingMultiLabelClassifier.fit_initial
    refit = EvolvingMultiLabelClassifier.refit_consequents

    def _counted_fit(self, *args, **kwargs):
        calls["fit"] += 1
        return fit_initial(self, *args, **kwargs)

    def _counted_refit(self, *args, **kwargs):
        calls["refit"] += 1
        return refit(self, *args, **kwargs)

    monkeypatch.setattr(EvolvingMultiLabelClassifier, "fit_initial", _counted_fit)
    monkeypatch.setattr(EvolvingMultiLabelClassifier, "refit_consequents", _counted_refit)
    grid = SearchGrid.from_dict(
        {"alpha": [0.0, 0.1], "beta": [0.0, 1.0], "vigilance": [0.5, 2.0], "folds": 3}
    )
    grid_search(cluster_dataset.take(slice(0, 60)), "efcml", grid)
    assert calls["fit"] == 2 * 3
    assert calls["refit"] == 3 * 2 * 3


@pytest.mark.parametrize("alpha, beta", [(0.0, 0.0), (0.1, 0.0), (0.05, 1.0)])
def test_fold_error_shared_structure_matches_full_fit(cluster_dataset, alpha, beta):
    """Test refitting a shared rule structure scores like a fresh fit"""
    batch = cluster_dataset.take(slice(0, 60))
    train, test = np.arange(40), np.arange(40, 60)
    config = LearnConfig(alpha=alpha, beta=beta, fac=0.5)
    structure = harness._fit_structure(config, batch, train)
    shared = harness._fold_error("efcml", config, batch, train, test, structure)
    fresh = harness._fold_error("efcml", config, batch, train, test)
    assert shared == pytest.approx(fresh, abs=1e-12)
    assert structure.config.alpha == 0.0


def test_grid_search_every_point_fails(cluster_dataset, monkeypatch, caplog):
    """Test the run stops when no grid point can be evaluated"""

    def _fail(*args):
        raise SingularHessianError("singular")

    monkeypatch.setattr(harness, "_fold_error", _fail)
    grid = SearchGrid.from_dict({"alpha": [0.0, 0.1], "beta": [0.0], "vigilance": [0.5]})
    with pytest.raises(RunAbortedError):
        grid_search(cluster_dataset.take(slice(0, 20)), "efcml", grid)
    assert "failed" in caplog.text


def test_run_stream_test_then_train(cluster_dataset):
    """Test every sample is scored before the model sees it"""
    model = EvolvingMultiLabelClassifier(2, 2)
    model.fit_initial(cluster_dataset.features[:20], cluster_dataset.labels[:20])
    stream = cluster_dataset.take(slice(20, 60))
    result = run_stream(model, stream, record_timing=False)
    assert [point.n for point in result.points] == list(range(1, 41))
    assert all(point.cum_update_seconds == 0.0 for point in result.points)
    assert all(0.0 <= point.pa <= 1.0 for point in result.points)
    assert [sample_id for sample_id, _ in result.decisions] == list(range(20, 60))
    assert all(decision.verdict == "full" for _, decision in result.decisions)


def test_run_interleaved_outputs(tmp_path, cluster_dataset):
    """Test the trend, selection, model and config files of a run"""
    grid = SearchGrid.from_dict({"alpha": [0.01], "beta": [0.5], "vigilance": [2.0]})
    spec = _spec(tmp_path, diagnostics=True, grid=grid)
    points = run_interleaved(spec, cluster_dataset)
    assert len(points) == 150

    trend = read_rows(tmp_path / "run" / TREND_FILE)
    assert list(trend.columns) == TREND_COLUMNS
    assert len(trend) == 150
    assert list(trend["n"]) == list(range(1, 151))
    assert (trend["cum_update_seconds"] == 0).all()

    selection = read_rows(tmp_path / "run" / SELECTION_FILE)
    assert list(selection.columns) == SELECTION_COLUMNS
    assert list(selection["id"]) == list(range(50, 200))
    assert set(selection["verdict"]) == {"full"}

    diagnostics = read_rows(tmp_path / "run" / DIAGNOSTICS_FILE)
    assert list(diagnostics.columns) == DIAGNOSTICS_COLUMNS
    assert len(diagnostics) > 0

    config = read_json(tmp_path / "run" / CONFIG_FILE)
    assert config["fac"] == 2.0
    model = load_model(tmp_path / "run" / MODEL_FILE)
    assert model.rule_count == points[-1].rules


def test_run_interleaved_is_reproducible(tmp_path, cluster_dataset):
    """Test runs without timing produce byte-identical files"""
    spec = _spec(tmp_path, "first", al="random", budget=0.5)
    run_interleaved(spec, cluster_dataset)
    run_interleaved(_spec(tmp_path, "second", al="random", budget=0.5), cluster_dataset)
    for name in (TREND_FILE, SELECTION_FILE, MODEL_FILE):
        first = (tmp_path / "first" / name).read_bytes()
        assert first == (tmp_path / "second" / name).read_bytes()


def test_run_interleaved_static_model(tmp_path, cluster_dataset):
    """Test a static method keeps its rule count through the stream"""
    points = run_interleaved(_spec(tmp_path, method="static-efcml"), cluster_dataset)
    assert len({point.rules for point in points}) == 1
    assert isinstance(load_model(tmp_path / "run" / MODEL_FILE), FrozenModel)


def test_run_interleaved_active_budget(tmp_path, cluster_dataset):
    """Test an active run never spends beyond its budget"""
    points = run_interleaved(_spec(tmp_path, al="labels", budget=0.3), cluster_dataset)
    assert max(point.selected_fraction for point in points) <= 0.3
    selection = read_rows(tmp_path / "run" / SELECTION_FILE)
    assert set(selection["verdict"]) <= {"full", "partial", "none"}


def test_run_interleaved_abort(tmp_path, cluster_dataset, monkeypatch, caplog):
    """Test a learner failure writes the partial files before aborting"""
    update = EvolvingMultiLabelClassifier.update
    calls = []

    def _failing_update(self, x, y, label_mask=None):
        calls.append(1)
        if len(calls) > 55:
            raise SingularHessianError("singular")
        return update(self, x, y, label_mask)

    monkeypatch.setattr(EvolvingMultiLabelClassifier, "update", _failing_update)
    with caplog.at_level(logging.ERROR):
        with pytest.raises(RunAbortedError) as err:
            run_interleaved(_spec(tmp_path), cluster_dataset)
    assert isinstance(err.value.__cause__, SingularHessianError)
    assert "Error running efcml" in caplog.text
    trend = read_rows(tmp_path / "run" / TREND_FILE)
    assert len(trend) == 5
    assert not (tmp_path / "run" / MODEL_FILE).exists()


def test_run_interleaved_from_files(tmp_path):
    """Test a run on the ARFF fixture"""
    spec = RunSpec.from_dict(
        {
            "data": fixture_path("tiny.arff"),
            "labels_xml": fixture_path("tiny.xml"),
            "split": 0.5,
            "out": str(tmp_path / "tiny"),
            "grid_file": fixture_path("grid.toml"),
            "record_timing": False,
        }
    )
    assert spec.grid.folds == 3
    points = run_interleaved(spec)
    assert len(points) == 4
    assert (tmp_path / "tiny" / TREND_FILE).exists()


def test_emit_trends_line_count(tmp_path):
    """Test one line per point plus the header"""
    points = [TrendPoint(n, 1.0, 0.5, 2, 1.0, 0.0) for n in range(1, 8)]
    path = tmp_path / "trend.csv"
    emit_trends(points, path)
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[0] == ",".join(TREND_COLUMNS)
    assert lines[1] == "1,1,0.5,2,1,0"
    assert len([line for line in lines if line]) == 8


def test_emit_selection_format(tmp_path):
    """Test triggers and labels are joined with a bar"""
    decisions = [
        (7, SelectionDecision("partial", ("uncertainty",), (2, 5), 0.25)),
        (8, SelectionDecision("none", ("novelty",), (), 0.2)),
    ]
    path = tmp_path / "selection.csv"
    emit_selection(decisions, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[1] == "7,partial,uncertainty,2|5,0.25"
    assert lines[2] == "8,none,novelty,,0.2"


def test_time_updates(cluster_dataset):
    """Test the mean update time is measured"""
    spec = RunSpec(data="two-clusters", grid=SearchGrid.from_dict(SINGLE_POINT_GRID))
    assert time_updates(spec, cluster_dataset) > 0.0
    assert mean_update_seconds([]) == 0.0
    assert mean_update_seconds(
        [TrendPoint(1, 1.0, 1.0, 1, 1.0, 0.5), TrendPoint(2, 1.0, 1.0, 1, 1.0, 1.0)]
    ) == pytest.approx(0.5)


def _region_runs():
    features, labels = region_stream(
        [[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]], [[1, 0], [0, 1], [1, 1]], [40, 60, 60]
    )
    dataset = as_dataset(features, labels)
    return dataset.take(slice(0, 40)), dataset.take(slice(40, 160))


def _fitted(config, batch):
    model = EvolvingMultiLabelClassifier(batch.num_features, batch.num_labels, config)
    return model.fit_initial(batch.features, batch.labels)


@pytest.mark.parametrize("mode, budget", [("labels", 0.3), ("samples", 0.2)])
def test_run_stream_equals_replay_of_selected_samples(cluster_dataset, mode, budget):
    """Test selection is the only link between the stream and the model"""
    config = LearnConfig(budget=budget, **TOY_CONFIG)
    batch, stream = cluster_dataset.take(slice(0, 40)), cluster_dataset.take(slice(40, 200))
    result = run_stream(
        _fitted(config, batch), stream, ActiveSelector(mode, config, 2), record_timing=False
    )
    assert any(decision.selected for _, decision in result.decisions)
    assert not all(decision.selected for _, decision in result.decisions)

    replay = _fitted(config, batch)
    for sample_id, decision in result.decisions:
        if decision.selected:
            replay.update(
                cluster_dataset.features[sample_id],
                cluster_dataset.labels[sample_id],
                decision.label_mask(2),
            )
    assert replay.to_dict() == result.model.to_dict()


def test_full_budget_selects_every_evolving_sample():
    """Test samples that evolve rules under full supervision are always requested"""
    config = LearnConfig(budget=1.0, **TOY_CONFIG)
    batch, stream = _region_runs()

    full = _fitted(config, batch)
    evolved = set()
    for sample in stream:
        if full.update(sample.x, sample.y).kind == OutcomeKind.EVOLVED:
            evolved.add(sample.id)

    result = run_stream(
        _fitted(config, batch), stream, ActiveSelector("samples", config, 2), record_timing=False
    )
    selected = {sample_id for sample_id, decision in result.decisions if decision.selected}
    assert {40, 100} <= evolved
    assert evolved <= selected


def test_random_selection_trails_active_learning():
    """Test uniform random selection learns new regions later than the criteria"""
    config = LearnConfig(budget=0.1, **TOY_CONFIG)
    batch, stream = _region_runs()
    stream = stream.take(slice(0, 60))
    active = run_stream(
        _fitted(config, batch), stream, ActiveSelector("samples", config, 2), record_timing=False
    )
    random_pa = [
        run_stream(
            _fitted(config, batch),
            stream,
            RandomSelector(config, 2, seed),
            record_timing=False,
        ).points[-1].pa
        for seed in range(5)
    ]
    assert max(point.selected_fraction for point in active.points) <= 0.1
    assert np.mean(random_pa) < active.points[-1].pa


def test_correlation_weight_from_grid_not_worse_than_ablation(rng):
    """Test the tuned correlation weight keeps up with beta = 0 on correlated labels"""
    features = rng.uniform(size=(300, 2))
    first = (features.sum(axis=1) > 1.0).astype(np.int64)
    second = np.where(rng.uniform(size=300) < 0.1, 1 - first, first)
    dataset = as_dataset(features, np.column_stack((first, second)))
    batch, stream = dataset.take(slice(0, 75)), dataset.take(slice(75, 300))
    grid = SearchGrid.from_dict(
        {"alpha": [0.0], "beta": [0.0, 1.0, 10.0], "vigilance": [2.0], "folds": 3}
    )
    tuned = grid_search(batch, "efcml", grid, LearnConfig(**TOY_CONFIG))
    ablation = tuned.updated(beta=0.0)
    scores = [
        run_stream(_fitted(config, batch), stream, record_timing=False).points[-1].pa
        for config in (tuned, ablation)
    ]
    assert scores[0] >= scores[1] - 0.02
