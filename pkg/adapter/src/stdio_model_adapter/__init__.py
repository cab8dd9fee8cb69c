"""Reference stdio JSON-lines adapter for batch predictors."""

__version__ = "0.1.0"

from .server import AdapterSpec, Predictor, serve

__all__ = ["AdapterSpec", "Predictor", "serve", "__version__"]
