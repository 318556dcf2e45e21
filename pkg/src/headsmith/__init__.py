"""Post-hoc classifier-head improvement: variance thresholding, architecture search, reports."""

from .data import FeatureMatrix
from .errors import ConfigError, DataError, HeadsmithError, ShapeError

__version__ = "0.1.0"

__all__ = ["FeatureMatrix", "HeadsmithError", "ShapeError", "ConfigError", "DataError", "__version__"]
