""" Test the evolving multi-label classifier """
import numpy as np
import pytest

from efcml.antecedent import OutcomeKind
from efcml.classifier import EvolvingMultiLabelClassifier
from efcml.config import LearnConfig
from efcml.consequent import ObjectiveTerms, batch_fit
from efcml.exceptions import (
    DimensionMismatchError,
    EmptyDatasetError,
    MalformedFileError,
    NonFiniteInputError,
)
from efcml.rulebase import Rule, RuleBase, normalized_activations

from .common import two_cluster_stream


def _accuracy(model, features, labels):
    crisp = np.array([model.predict(x)[1] for x in features])
    return float(np.mean(crisp == labels))


def test_first_update_evolves():
    """Test the first sample creates the first rule"""
    model = EvolvingMultiLabelClassifier(2, 2)
    outcome = model.update(np.array([0.1, 0.2]), np.array([1, 0]))
    assert outcome.kind == OutcomeKind.EVOLVED
    assert outcome.index == 0
    assert model.rule_count == 1
    np.testing.assert_array_equal(model.rule_base.rules[0].center, [0.1, 0.2, 1.0, 0.0])


@pytest.mark.parametrize(
    "x, y, error",
    [
        ([0.1], [1, 0], DimensionMismatchError),
        ([0.1, 0.2], [1], DimensionMismatchError),
        ([np.nan, 0.2], [1, 0], NonFiniteInputError),
    ],
)
def test_update_rejects_bad_samples(x, y, error):
    """Test invalid samples leave the model untouched"""
    model = EvolvingMultiLabelClassifier(2, 2)
    with pytest.raises(error):
        model.update(np.array(x), np.array(y))
    assert model.rule_count == 0
    assert model.rule_base.tracker.count == 0


def test_learns_two_clusters(two_clusters):
    """Test a stream of two clusters is learned sample by sample"""
    features, labels = two_clusters
    model = EvolvingMultiLabelClassifier(2, 2)
    for x, y in zip(features, labels):
        model.update(x, y)
    assert model.rule_count >= 1
    assert model.rule_base.support_total == len(features)
    test_features, test_labels = two_cluster_stream(num_samples=50, seed=99)
    assert _accuracy(model, test_features, test_labels) >= 0.9


def test_far_sample_evolves(two_clusters):
    """Test a sample far from every rule starts a new one"""
    features, labels = two_clusters
    model = EvolvingMultiLabelClassifier(2, 2)
    for x, y in zip(features, labels):
        model.update(x, y)
    before = model.rule_count
    outcome = model.update(np.array([25.0, -25.0]), np.array([1, 1]))
    assert outcome.kind in (OutcomeKind.EVOLVED, OutcomeKind.MERGED)
    assert outcome.min_distance > outcome.threshold
    assert model.rule_count >= before


def test_fit_initial_with_trace(two_clusters):
    """Test batch training and its objective trace"""
    features, labels = two_clusters
    model = EvolvingMultiLabelClassifier(2, 2, LearnConfig(alpha=0.01, beta=0.5))
    trace = []
    assert model.fit_initial(features[:100], labels[:100], trace) is model
    assert trace
    rules = {rule for rule, _, _ in trace}
    assert rules == set(range(model.rule_count))
    assert all(isinstance(terms, ObjectiveTerms) for _, _, terms in trace)
    for rule in model.rule_base.rules:
        np.testing.assert_allclose(rule.inv_hessian, rule.inv_hessian.T)
        assert rule.weight_sum > 0.0
    assert _accuracy(model, features[100:], labels[100:]) >= 0.9


def test_fit_initial_plain_rfwls_skips_refit(two_clusters):
    """Test plain RFWLS keeps the incremental consequents"""
    features, labels = two_clusters
    model = EvolvingMultiLabelClassifier(2, 2, LearnConfig(correlation_learning=False))
    trace = []
    model.fit_initial(features[:50], labels[:50], trace)
    assert trace == []
    assert model.rule_count >= 1


def test_fit_initial_errors():
    """Test empty and mismatched batches"""
    model = EvolvingMultiLabelClassifier(2, 2)
    with pytest.raises(EmptyDatasetError):
        model.fit_initial(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(DimensionMismatchError):
        model.fit_initial(np.zeros((3, 2)), np.zeros((3, 1)))


def test_partial_update_keeps_unannotated_columns():
    """Test a masked label column is not learned"""
    model = EvolvingMultiLabelClassifier(2, 2, LearnConfig(beta=1.0))
    x = np.array([0.5, 0.5])
    for _ in range(2):
        model.update(x, np.array([1, 0]))
    before = model.rule_base.rules[0].consequents.copy()
    outcome = model.update(x, np.array([1, 1]), np.array([True, False]))
    assert outcome.kind == OutcomeKind.UPDATED
    assert model.rule_count == 1
    after = model.rule_base.rules[0].consequents
    np.testing.assert_array_equal(after[:, 1], before[:, 1])
    assert not np.array_equal(after[:, 0], before[:, 0])


def test_partial_update_keeps_label_statistics():
    """Test predicted labels never reach the label statistics"""
    model = EvolvingMultiLabelClassifier(2, 2, LearnConfig(beta=1.0))
    x = np.array([0.5, 0.5])
    for _ in range(2):
        model.update(x, np.array([1, 0]))
    rule = model.rule_base.rules[0]
    before = (rule.wmean_y.copy(), rule.wcov_y.copy(), rule.weight_sum)
    model.update(x, np.array([1, 1]), np.array([True, False]))
    np.testing.assert_array_equal(rule.wmean_y, before[0])
    np.testing.assert_array_equal(rule.wcov_y, before[1])
    assert rule.weight_sum == before[2]


def test_fit_initial_refit_keeps_consistent_state(two_clusters):
    """Test the refit solves the same prior-regularized problem it stores"""
    features, labels = two_clusters
    config = LearnConfig(alpha=0.01, beta=0.5)
    model = EvolvingMultiLabelClassifier(2, 2, config)
    model.fit_initial(features[:100], labels[:100])
    regressors = np.column_stack((features[:100], np.ones(100)))
    weights = np.stack(
        [normalized_activations(model.rule_base, x) for x in features[:100]]
    )
    for position, rule in enumerate(model.rule_base.rules):
        psi = weights[:, position]
        prior = np.eye(3) / rule.p_init
        np.testing.assert_allclose(
            rule.hessian, regressors.T @ (regressors * psi[:, None]) + prior
        )
        np.testing.assert_allclose(
            rule.info_matrix, regressors.T @ (labels[:100] * psi[:, None])
        )
        np.testing.assert_allclose(rule.inv_hessian @ rule.hessian, np.eye(3), atol=1e-8)
        expected = batch_fit(
            regressors, labels[:100], psi, config, prior=1.0 / rule.p_init
        )
        np.testing.assert_array_equal(rule.consequents, expected)


def test_fit_initial_without_penalties_skips_refit(two_clusters):
    """Test zero penalties keep the incremental consequents"""
    features, labels = two_clusters
    incremental = EvolvingMultiLabelClassifier(2, 2)
    for x, y in zip(features[:60], labels[:60]):
        incremental.update(x, y)
    trace = []
    batch = EvolvingMultiLabelClassifier(2, 2).fit_initial(
        features[:60], labels[:60], trace
    )
    assert trace == []
    for first, second in zip(incremental.rule_base.rules, batch.rule_base.rules):
        np.testing.assert_array_equal(first.consequents, second.consequents)


def test_partial_update_without_labels():
    """Test an empty mask changes nothing"""
    model = EvolvingMultiLabelClassifier(2, 2)
    model.update(np.array([0.5, 0.5]), np.array([1, 0]))
    outcome = model.update(
        np.array([0.9, 0.1]), np.array([0, 1]), np.array([False, False])
    )
    assert outcome.kind == OutcomeKind.UPDATED
    assert outcome.index == -1
    assert model.rule_base.tracker.count == 1
    with pytest.raises(DimensionMismatchError):
        model.update(np.array([0.5, 0.5]), np.array([1, 0]), np.array([True]))


def test_update_merges_overlapping_rules():
    """Test rules that end up overlapping are merged into the stronger one"""
    rule_base = RuleBase(1, 1)
    for center, support in (([0.0, 0.0], 5), ([0.1, 0.0], 1)):
        rule_base.add_rule(
            Rule(
                center=center,
                inv_cov=np.eye(2),
                consequents=np.zeros((2, 1)),
                support=support,
            )
        )
    model = EvolvingMultiLabelClassifier(1, 1, rule_base=rule_base)
    outcome = model.update(np.array([0.05]), np.array([0]))
    assert outcome.kind == OutcomeKind.MERGED
    assert outcome.index == 0
    assert outcome.removed == 1
    assert model.rule_count == 1
    assert model.rule_base.rules[0].support == 7
    assert model.rule_base.merges == 1


def test_round_trip(two_clusters):
    """Test a checkpoint predicts like the original"""
    features, labels = two_clusters
    model = EvolvingMultiLabelClassifier(2, 2)
    model.fit_initial(features[:60], labels[:60])
    restored = EvolvingMultiLabelClassifier.from_dict(model.to_dict())
    assert restored.rule_count == model.rule_count
    for x in features[60:70]:
        np.testing.assert_array_equal(restored.predict(x)[0], model.predict(x)[0])


def test_from_dict_rejects_other_method():
    """Test a checkpoint of another learner"""
    data = EvolvingMultiLabelClassifier(1, 1).to_dict()
    data["method"] = "ovr"
    with pytest.raises(MalformedFileError):
        EvolvingMultiLabelClassifier.from_dict(data)
