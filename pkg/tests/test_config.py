"""
Tests for config file parsing, key resolution and provenance records.
"""

import json

import pytest

from wartem import __version__
from wartem.config import (
    SCHEMA,
    default_config,
    load_config,
    parse_config_text,
    resolve_config,
    suggest_key,
    write_provenance,
)
from wartem.exceptions import (
    ConfigError,
    ConfigSyntaxError,
    InvalidConfigValueError,
    MissingConfigKeyError,
    UnknownConfigKeyError,
)
from wartem.warping import WarpFamily


def resolve(text):
    return resolve_config(parse_config_text(text))


class TestParse:
    """Test the line grammar."""

    def test_entries_in_order(self):
        """Keys, raw values and line numbers."""
        entries = parse_config_text("family = mixed\n\nlambda=0.5\n")
        assert [(e.key, e.raw, e.line) for e in entries] == [
            ("family", "mixed", 1),
            ("lambda", "0.5", 3),
        ]

    def test_comments(self):
        """Whole-line and trailing comments are dropped."""
        entries = parse_config_text("# header\nseeds = 1, 2, 3   # three runs\n")
        assert len(entries) == 1
        assert entries[0].raw == "1, 2, 3"

    def test_no_trailing_newline(self):
        """The last line does not need a newline."""
        assert parse_config_text("family = copy")[0].raw == "copy"

    def test_empty_value(self):
        """A key with nothing after '=' has an empty raw value."""
        assert parse_config_text("max_warps =\n")[0].raw == ""

    def test_syntax_error_line(self):
        """A line without '=' is reported with its number."""
        with pytest.raises(ConfigSyntaxError) as exc_info:
            parse_config_text("family = mixed\nlambda 0.5\n")
        assert exc_info.value.line == 2


class TestResolve:
    """Test key checking, conversion and defaults."""

    def test_defaults_filled(self):
        """Unset keys take their schema defaults."""
        config = resolve("family = interpolation\n")
        assert config["family"] == "interpolation"
        assert config["batch_size"] == 32
        assert config["seeds"] == (0,)
        assert config["max_warps"] is None
        assert config.explicit == {"family"}

    def test_conversions(self):
        """Values take their declared types."""
        config = resolve(
            "family = COPY\nlambda = 0.25\nseeds = 4,5\nregenerate_pairs = no\nconv_filters = 8\nconv_kernels = 3\n"
        )
        assert config["family"] == "copy"
        assert config["lambda"] == 0.25
        assert config["seeds"] == (4, 5)
        assert config["regenerate_pairs"] is False
        assert config.conv_blocks() == ((8, 3),)

    def test_unknown_key_suggestion(self):
        """Near misses name the intended key and the line."""
        with pytest.raises(UnknownConfigKeyError) as exc_info:
            resolve("family = mixed\nbatchsize = 16\n")
        assert exc_info.value.suggestion == "batch_size"
        assert exc_info.value.line == 2
        assert "did you mean 'batch_size'" in str(exc_info.value)

    def test_unknown_key_without_suggestion(self):
        """Far-off keys get no suggestion."""
        assert suggest_key("zzzzzz") is None
        assert suggest_key("patiense") == "patience"

    def test_duplicate_key(self):
        """A key may be set once."""
        with pytest.raises(ConfigSyntaxError) as exc_info:
            resolve("lambda = 1\nfamily = copy\nlambda = 2\n")
        assert exc_info.value.line == 3

    def test_invalid_values(self):
        """Bad values name their key."""
        for text, key in [
            ("batch_size = 0\n", "batch_size"),
            ("family = sideways\n", "family"),
            ("lambda = heavy\n", "lambda"),
            ("seeds = 1, x\n", "seeds"),
            ("patience =\n", "patience"),
        ]:
            with pytest.raises(InvalidConfigValueError) as exc_info:
                resolve(text)
            assert exc_info.value.key == key

    def test_optional_empty_value(self):
        """Optional keys accept an empty value as unset."""
        assert resolve("code_length =\n")["code_length"] is None

    def test_load_config(self, tmp_path):
        """Files record their source path."""
        path = tmp_path / "run.cfg"
        path.write_text("family = mixed\nmax_epochs = 5\n")
        config = load_config(path)
        assert config.source == str(path)
        assert config["max_epochs"] == 5


class TestRunConfig:
    """Test the resolved configuration object."""

    def test_train_config(self):
        """Training settings map onto TrainConfig."""
        config = resolve("family = mixed\nlambda = 0.5\nseeds = 9, 10\ncode_length = 4\n")
        train = config.train_config()
        assert train.family is WarpFamily.MIXED
        assert train.loss_weight == 0.5
        assert train.seed == 9
        assert train.code_length == 4
        assert train.conv_blocks == ((16, 5), (32, 5))
        assert config.train_config(seed=10).seed == 10

    def test_missing_family(self):
        """Training cannot start without a warp family."""
        with pytest.raises(MissingConfigKeyError) as exc_info:
            default_config().train_config()
        assert exc_info.value.key == "family"

    def test_block_mismatch(self):
        """Filter and kernel lists must have the same length."""
        config = resolve("family = copy\nconv_filters = 8, 16, 32\n")
        with pytest.raises(InvalidConfigValueError):
            config.train_config()

    def test_invalid_training_range(self):
        """Range checks inside TrainConfig surface as config errors."""
        config = resolve("family = copy\nholdout_fraction = 1.5\n")
        with pytest.raises(ConfigError):
            config.train_config()

    def test_classifier_config(self):
        """Classifier keys map onto ClassifierConfig."""
        config = resolve("classifier_trials = 3\nclassifier_epochs = 40\n")
        classifier = config.classifier_config()
        assert classifier.trials == 3
        assert classifier.max_epochs == 40

    def test_with_values(self):
        """Overrides produce a new config and reject unknown keys."""
        base = default_config()
        changed = base.with_values(family="copy")
        assert changed["family"] == "copy"
        assert base["family"] is None
        with pytest.raises(UnknownConfigKeyError):
            base.with_values(famly="copy")

    def test_hash(self):
        """Equal resolved configs hash equally; any change alters the hash."""
        a = resolve("family = mixed\n")
        b = resolve("# same thing\nfamily = mixed\nlambda = 1.0\n")
        c = resolve("family = mixed\nlambda = 2\n")
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()
        assert len(a.config_hash()) == 12

    def test_to_dict_covers_schema(self):
        """Every schema key is present, lists for tuples."""
        values = default_config().to_dict()
        assert set(values) == set(SCHEMA)
        assert values["seeds"] == [0]


class TestProvenance:
    """Test run records."""

    def test_record_fields(self, tmp_path):
        """Command, version, seeds and the full config are recorded."""
        config = resolve("family = mixed\n")
        path = write_provenance(tmp_path / "run.json", config, "train", seeds=[0], models=["a.wartem"])
        record = json.loads(path.read_text())
        assert record["command"] == "train"
        assert record["version"] == __version__
        assert record["seeds"] == [0]
        assert record["config_hash"] == config.config_hash()
        assert record["config"]["family"] == "mixed"
        assert record["config"]["batch_size"] == 32
        assert record["models"] == ["a.wartem"]
