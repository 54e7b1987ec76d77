"""
Pytest configuration for WaRTEm tests.

The end-to-end synthetic benchmark trains several models and takes minutes;
it is marked ``slow``. Skip it with:
    pytest -m "not slow"
"""

import numpy as np
import pytest

from wartem.series import LabeledDataset


def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line(
        "markers", "slow: marks long-running training tests (deselect with '-m \"not slow\"')"
    )


@pytest.fixture
def sine_dataset():
    """24 noisy sines of length 16 in two classes (one and two cycles)."""
    rng = np.random.default_rng(11)
    x = np.arange(16) / 16
    rows, labels = [], []
    for i in range(24):
        label = i % 2
        phase = rng.uniform(0, 0.2)
        rows.append(np.sin(2 * np.pi * (label + 1) * (x + phase)) + rng.normal(0, 0.05, 16))
        labels.append(label)
    return LabeledDataset(np.array(rows), np.array(labels), ("1", "2"), name="Sines")


@pytest.fixture
def write_tsv():
    """Return a helper writing rows of (label, values...) as a UCR TSV file."""

    def write(path, rows):
        with open(path, "w") as f:
            for row in rows:
                f.write("\t".join(str(v) for v in row) + "\n")
        return path

    return write
