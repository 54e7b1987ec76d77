"""
Tests for evaluation protocols, the static classifier and report files.
"""

import numpy as np
import pytest

from wartem.evaluation import (
    OPTIMISTIC,
    ClassifierConfig,
    EvalEntry,
    StaticClassifier,
    baseline_method,
    eval_baseline_nn,
    eval_dl,
    eval_static,
    eval_wartem_dl,
    eval_wartem_nn,
    flag_best,
    format_table,
    hidden_sizes,
    read_report,
    select_best_family,
    table_path,
    train_static_classifier,
    write_report,
)
from wartem.exceptions import ArgumentError, EvaluationError
from wartem.metrics import DTW, EUCLIDEAN, DistanceKind, Metric
from wartem.series import LabeledDataset
from wartem.twin import AEConfig, build_twin

FAST = ClassifierConfig(max_epochs=30, patience=5, batch_size=8, learning_rate=0.01, trials=2)


@pytest.fixture
def split(sine_dataset):
    """Train and test halves of the sine fixture (both hold both classes)."""
    return sine_dataset.subset(range(0, 12)), sine_dataset.subset(range(12, 24))


def clusters(seed, n, dim=4, gap=6.0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    features = rng.normal(size=(n, dim)) + gap * labels[:, None]
    return features, labels


def entry(dataset, method, mean, **extra):
    return EvalEntry(dataset=dataset, method=method, accuracies=(mean,), mean=mean, **extra)


class TestNearestNeighborProtocols:
    """Test the 1-NN evaluation protocols."""

    def test_baseline_names(self):
        """Methods are named after their distance."""
        assert baseline_method(EUCLIDEAN) == "eucl-nn"
        assert baseline_method(DTW) == "dtw-nn"
        assert baseline_method(DistanceKind(Metric.DTW, 3)) == "dtw-nn:3"

    def test_baseline_entry(self, split):
        """Deterministic baselines report one accuracy and no spread."""
        train, test = split
        result = eval_baseline_nn(train, test, EUCLIDEAN, workers=1)
        assert result.method == "eucl-nn"
        assert result.dataset == test.name
        assert result.seeds == 1
        assert result.std is None
        assert result.accuracies == (result.mean,)
        assert 0.0 <= result.mean <= 100.0

    def test_baseline_separable(self):
        """Clearly separated classes are classified perfectly."""
        train = LabeledDataset(np.array([[0.0] * 4, [5.0] * 4]), np.array([0, 1]), name="Toy")
        test = LabeledDataset(np.array([[0.5] * 4, [4.0] * 4, [6.0] * 4]), np.array([0, 1, 1]), name="Toy")
        assert eval_baseline_nn(train, test, EUCLIDEAN).mean == 100.0
        assert eval_baseline_nn(train, test, DTW).mean == 100.0

    def test_mismatched_class_numbering(self):
        """Splits numbering the same labels differently are rejected."""
        train = LabeledDataset(np.array([[0.0] * 4, [5.0] * 4]), np.array([0, 1]), label_names=("1", "2"))
        test = LabeledDataset(np.array([[5.0] * 4, [0.0] * 4]), np.array([0, 1]), label_names=("2", "1"))
        with pytest.raises(EvaluationError):
            eval_baseline_nn(train, test, EUCLIDEAN)
        with pytest.raises(EvaluationError):
            eval_dl(train, test, FAST)
        twin = build_twin(AEConfig(input_length=16, code_length=2, conv_blocks=((2, 3),)), seed=0)
        with pytest.raises(EvaluationError):
            eval_wartem_nn([twin], train, test)
        aligned = LabeledDataset(test.series, np.array([1, 0]), label_names=("1", "2"))
        assert eval_baseline_nn(train, aligned, EUCLIDEAN).mean == 100.0

    def test_wartem_nn_per_model(self, split):
        """One accuracy per model, summarized with the population std."""
        train, test = split
        config = AEConfig(input_length=16, code_length=3, conv_blocks=((3, 3),))
        models = [build_twin(config, seed) for seed in (0, 1, 2)]
        result = eval_wartem_nn(models, train, test, config_hash="abc", workers=1)
        assert result.method == "wartem-nn"
        assert result.seeds == 3
        assert len(result.accuracies) == 3
        assert result.mean == pytest.approx(np.mean(result.accuracies))
        assert result.std == pytest.approx(np.std(result.accuracies))
        assert result.config_hash == "abc"

    def test_wartem_nn_length_mismatch(self, split):
        """Models trained on another length are rejected."""
        train, test = split
        model = build_twin(AEConfig(input_length=20, code_length=3, conv_blocks=((3, 3),)), 0)
        with pytest.raises(EvaluationError):
            eval_wartem_nn([model], train, test)

    def test_wartem_nn_needs_models(self, split):
        """An empty model list is an argument error."""
        with pytest.raises(ArgumentError):
            eval_wartem_nn([], *split)


class TestStaticClassifier:
    """Test the three-layer dense classifier."""

    def test_hidden_sizes(self):
        """First layer max(10, L // 10), then 50, then one per class."""
        assert hidden_sizes(64, 3) == (10, 50, 3)
        assert hidden_sizes(500, 2) == (50, 50, 2)

    def test_logits_shape(self):
        """One logit per class for every row."""
        classifier = StaticClassifier(6, 3)
        classifier.network.initialize(np.random.default_rng(0))
        assert classifier.logits(np.zeros((4, 6))).shape == (4, 3)
        with pytest.raises(EvaluationError):
            classifier.logits(np.zeros((4, 5)))

    def test_learns_separable_clusters(self):
        """Two far-apart clusters are learned perfectly."""
        train_x, train_y = clusters(0, 40)
        test_x, test_y = clusters(1, 20)
        config = ClassifierConfig(max_epochs=100, patience=20, batch_size=8, learning_rate=0.01)
        classifier = train_static_classifier(train_x, train_y, 2, config, seed=0)
        assert eval_static(classifier, test_x, test_y) == 100.0

    def test_deterministic(self):
        """Same data and seed give the same classifier."""
        x, y = clusters(2, 20)
        a = train_static_classifier(x, y, 2, FAST, seed=3)
        b = train_static_classifier(x, y, 2, FAST, seed=3)
        for p, q in zip(a.network.parameters(), b.network.parameters()):
            np.testing.assert_array_equal(p, q)

    def test_tiny_training_set(self):
        """Fewer than three rows train without a held-out slice."""
        classifier = train_static_classifier([[0.0], [1.0]], [0, 1], 2, FAST, seed=0)
        assert classifier.predict([[0.0]]).shape == (1,)

    def test_label_validation(self):
        """Labels must fit the class count."""
        with pytest.raises(ArgumentError):
            train_static_classifier([[0.0], [1.0]], [0, 2], 2, FAST)
        with pytest.raises(ArgumentError):
            train_static_classifier([[0.0], [1.0]], [0], 2, FAST)

    def test_config_validation(self):
        """Counts must be positive."""
        with pytest.raises(ArgumentError):
            ClassifierConfig(trials=0)


class TestClassifierProtocols:
    """Test the best-of-trials protocols."""

    def test_dl(self, split):
        """Raw-series classifier: best trial reported, flagged optimistic."""
        train, test = split
        result = eval_dl(train, test, FAST, seed=0)
        assert result.method == "dl"
        assert result.note == OPTIMISTIC
        assert len(result.accuracies) == 1
        assert result.trial_mean <= result.mean

    def test_wartem_dl(self, split):
        """Embedding classifier: one best-of-trials accuracy per model."""
        train, test = split
        config = AEConfig(input_length=16, code_length=3, conv_blocks=((3, 3),))
        models = [build_twin(config, seed) for seed in (0, 1)]
        result = eval_wartem_dl(models, train, test, FAST, seed=0, config_hash="h")
        assert result.method == "wartem-dl"
        assert result.seeds == 2
        assert result.note == OPTIMISTIC
        assert result.std is not None
        assert result.trial_mean <= max(result.accuracies)

    def test_length_mismatch(self, split):
        """Train and test lengths must agree."""
        train, _ = split
        other = LabeledDataset(np.zeros((3, 10)), np.array([0, 1, 0]), name="Other")
        with pytest.raises(EvaluationError):
            eval_dl(train, other, FAST)


class TestFamilySelection:
    """Test picking the best warp family."""

    def test_picks_highest_mean(self):
        """The family with the best wartem-nn mean wins and is recorded in the note."""
        results = {
            "copy": entry("D", "wartem-nn:copy", 80.0),
            "interpolation": entry("D", "wartem-nn:interpolation", 85.0),
            "mixed": entry("D", "wartem-nn:mixed", 82.0),
        }
        family, chosen = select_best_family(results)
        assert family == "interpolation"
        assert chosen.method == "wartem-nn"
        assert chosen.note == "family=interpolation"
        assert chosen.mean == 85.0

    def test_tie_goes_to_first(self):
        """Equal means keep the first family."""
        family, _ = select_best_family({"copy": entry("D", "a", 80.0), "mixed": entry("D", "b", 80.0)})
        assert family == "copy"

    def test_empty(self):
        """No families, no selection."""
        with pytest.raises(ArgumentError):
            select_best_family({})


class TestReports:
    """Test report CSV and table files."""

    def test_flag_best_per_dataset(self):
        """Ties share the flag; datasets are ranked separately."""
        rows = flag_best(
            [entry("A", "x", 90.0), entry("A", "y", 90.0), entry("A", "z", 70.0), entry("B", "x", 10.0)]
        )
        assert [r.best for r in rows] == [True, True, False, True]

    def test_write_and_read(self, tmp_path):
        """Every field survives the CSV."""
        rows = [
            EvalEntry("D", "wartem-nn", (80.0, 90.0), 85.0, std=5.0, seeds=2, config_hash="abc123"),
            entry("D", "dl", 70.0, note=OPTIMISTIC, trial_mean=65.5),
        ]
        path = tmp_path / "report.csv"
        written = write_report(rows, path)
        loaded = read_report(path)
        assert loaded == written
        assert loaded[0].best and not loaded[1].best
        assert loaded[1].std is None
        assert loaded[1].trial_mean == 65.5

    def test_table_file(self, tmp_path):
        """A text table sits next to the CSV with the best row starred."""
        path = tmp_path / "report.csv"
        write_report([entry("D", "eucl-nn", 60.0), entry("D", "dtw-nn", 75.0)], path)
        table = table_path(path).read_text()
        assert table_path(path) == tmp_path / "report.txt"
        assert "dtw-nn *" in table
        assert "eucl-nn *" not in table

    def test_append_reflags(self, tmp_path):
        """Appending keeps earlier rows and re-ranks across all of them."""
        path = tmp_path / "report.csv"
        write_report([entry("D", "eucl-nn", 60.0)], path)
        rows = write_report([entry("D", "dtw-nn", 75.0)], path, append=True)
        assert [(r.method, r.best) for r in rows] == [("eucl-nn", False), ("dtw-nn", True)]
        assert len(read_report(path)) == 2

    def test_empty_report(self, tmp_path):
        """Nothing to write is an error."""
        with pytest.raises(ArgumentError):
            write_report([], tmp_path / "r.csv")

    def test_format_table_spread(self):
        """Multi-model rows show mean and spread."""
        text = format_table([EvalEntry("D", "wartem-nn", (80.0, 90.0), 85.0, std=5.0, seeds=2)])
        assert "85.00 +- 5.00" in text
