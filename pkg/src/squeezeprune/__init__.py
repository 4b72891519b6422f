"""Taylor-score filter pruning for a SqueezeNet-style face embedding network."""

__version__ = "0.1.0"
