"""Unit tests for the structured logging helpers."""

import numpy as np
import structlog

from noiselab.utils.logger import get_logger, numpy_values, run_context


class TestNumpyValues:
    """Test cases for the numpy processor."""

    def test_scalars_and_small_arrays(self):
        """Test that numpy values become plain Python values."""
        event = numpy_values(None, "info", {"x": np.float64(0.5), "n": np.int64(3), "v": np.arange(3)})

        assert event == {"x": 0.5, "n": 3, "v": [0, 1, 2]}
        assert type(event["x"]) is float

    def test_large_arrays_are_summarized(self):
        """Test that big arrays are replaced by their shape."""
        event = numpy_values(None, "info", {"m": np.zeros((40, 40))})

        assert event["m"] == "<array shape=(40, 40)>"


class TestRunContext:
    """Test cases for per-run context binding."""

    def test_values_bound_inside_block_only(self):
        """Test that bound values are visible inside the block and removed after it."""
        with run_context(command="gram", seed=4):
            inside = structlog.contextvars.get_contextvars()

        assert inside["command"] == "gram"
        assert inside["seed"] == 4
        assert "command" not in structlog.contextvars.get_contextvars()

    def test_get_logger(self):
        """Test that loggers can be obtained and used."""
        logger = get_logger("noiselab.test")
        logger.debug("logger ready", value=np.float64(1.0))
