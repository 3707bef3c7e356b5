"""Chain-of-thought multi-organ toxicity prediction pipeline."""

__version__ = "0.1.0"
