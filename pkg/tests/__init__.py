"""
WaRTEm Test Suite

Unit tests for the warping operators, distances, the autodiff engine, the twin
auto-encoder, training, evaluation, configuration and the command line.
"""

__all__ = [
    "test_series",
    "test_warping",
    "test_metrics",
    "test_autodiff",
    "test_twin",
    "test_checkpoint",
    "test_training",
    "test_evaluation",
    "test_config",
    "test_console_script",
    "test_synthetic",
    "test_end_to_end",
    "test_utils",
]
